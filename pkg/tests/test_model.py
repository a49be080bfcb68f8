import math

import numpy as np
import pytest
import torch

from alpha_embed.embedding import BaselineEmbedding, DualPartEmbedding
from alpha_embed.errors import ConfigError, DepthError, LengthError, ModeError, ParseError
from alpha_embed.losses import cross_entropy
from alpha_embed.model import (
    MODEL_PRESETS,
    DecodeResult,
    DecodeSpec,
    ModelConfig,
    Seq2SeqModel,
    decode,
    model_preset,
    rope_apply,
    tree_positions,
)
from alpha_embed.randvec import RandMethod
from alpha_embed.vocab import EOS_ID, PAD_ID, SOS_ID


def small_model(seed=0, n=3, m=5, d_alpha=12, d_beta=4, **cfg_overrides):
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    emb = DualPartEmbedding(n, m, d_alpha, RandMethod("normal", d_beta), rng)
    cfg = ModelConfig(d_model=16, layer_count=2, head_count=2, fc_size=24, **cfg_overrides)
    return Seq2SeqModel(cfg, emb), rng


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(d_model=30, layer_count=1, head_count=4, fc_size=8)
    with pytest.raises(ConfigError):
        ModelConfig(d_model=12, layer_count=1, head_count=4, fc_size=8)  # odd head dim
    with pytest.raises(ConfigError):
        ModelConfig(d_model=16, layer_count=1, head_count=2, fc_size=8, encoder_pos="learned")


def test_presets():
    assert set(MODEL_PRESETS) == {"copy-small", "copy-big", "ltl", "prop"}
    small = model_preset("copy-small")
    assert (small.d_model, small.layer_count, small.head_count, small.fc_size) == (64, 2, 4, 64)
    big = model_preset("copy-big")
    assert (big.d_model, big.layer_count, big.head_count, big.fc_size) == (128, 6, 8, 128)
    ltl = model_preset("ltl")
    assert (ltl.d_model, ltl.layer_count, ltl.head_count, ltl.fc_size) == (128, 8, 8, 1024)
    assert ltl.encoder_pos == "tree"
    prop = model_preset("prop")
    assert (prop.d_model, prop.layer_count, prop.head_count, prop.fc_size) == (132, 6, 6, 512)
    with pytest.raises(ConfigError):
        model_preset("copy-huge")


def test_rope_position_zero_is_identity():
    x = torch.randn(2, 3, 8)
    out = rope_apply(x, torch.zeros(3))
    assert torch.allclose(out, x, atol=1e-7)


def test_rope_preserves_norm():
    x = torch.randn(4, 6, 16)
    out = rope_apply(x, torch.arange(6))
    assert torch.allclose(
        torch.linalg.vector_norm(out, dim=-1), torch.linalg.vector_norm(x, dim=-1), atol=1e-5
    )


def test_rope_relative_shift():
    rng = np.random.default_rng(0)
    for _ in range(20):
        q = torch.tensor(rng.standard_normal((1, 8)), dtype=torch.float64)
        k = torch.tensor(rng.standard_normal((1, 8)), dtype=torch.float64)
        m, n, c = rng.integers(0, 50, size=3)
        a = rope_apply(q, torch.tensor([float(m)])) @ rope_apply(k, torch.tensor([float(n)])).T
        b = rope_apply(q, torch.tensor([float(m + c)])) @ rope_apply(k, torch.tensor([float(n + c)])).T
        assert float(a) == pytest.approx(float(b), abs=1e-5)


def test_rope_odd_dim_rejected():
    with pytest.raises(ConfigError):
        rope_apply(torch.randn(1, 2, 7), torch.arange(2))


BIN_ARITY = {"&": 2, "|": 2, "!": 1, "X": 1, "a": 0, "b": 0, "c": 0, "d": 0}


def test_tree_positions_root_and_children():
    paths = tree_positions(["&", "a", "b"], BIN_ARITY)
    assert not paths[0].any()
    assert paths[1][0] == 1.0 and paths[1][1] == 0.0 and not paths[1][2:].any()
    assert paths[2][0] == 0.0 and paths[2][1] == 1.0 and not paths[2][2:].any()


def test_tree_positions_nested():
    tokens = list("&&abX&cd")
    paths = tree_positions(tokens, BIN_ARITY)
    assert paths.shape == (8, 64)
    depths = (paths.reshape(8, 32, 2).sum(axis=2) > 0).sum(axis=1)
    assert depths.max() == 3
    # 'd' sits at right child -> unary -> right child: path (1, 0, 1)
    d_path = paths[7].reshape(32, 2)
    assert d_path[0][1] == 1.0 and d_path[1][0] == 1.0 and d_path[2][1] == 1.0


def test_tree_positions_errors():
    with pytest.raises(ParseError):
        tree_positions(["&", "a"], BIN_ARITY)  # missing operand
    with pytest.raises(ParseError):
        tree_positions(["a", "b"], BIN_ARITY)  # trailing token
    with pytest.raises(ParseError):
        tree_positions(["&", "a", "?"], BIN_ARITY)
    with pytest.raises(DepthError):
        tree_positions(list("&&abX&cd"), BIN_ARITY, depth_max=2)


def test_forward_shape_and_length_guard():
    model, _ = small_model()
    model.eval()
    src = torch.tensor([[SOS_ID, 3, 4, EOS_ID]])
    tgt = torch.tensor([[SOS_ID, 3, 4]])
    logits = model(src, tgt)
    assert logits.shape == (1, 3, model.embedding.vocab_size)
    long_src = torch.full((1, 300), 3)
    with pytest.raises(LengthError):
        model(long_src, tgt)
    with pytest.raises(LengthError):
        model(src, torch.full((1, 300), 3))


def test_pad_positions_do_not_leak():
    model, _ = small_model(seed=1)
    model.eval()
    src = torch.tensor([[SOS_ID, 3, 4, EOS_ID, PAD_ID, PAD_ID]])
    tgt = torch.tensor([[SOS_ID, 3, 4, PAD_ID, PAD_ID]])
    src_pad = src == PAD_ID
    tgt_pad = tgt == PAD_ID
    base = model(src, tgt, src_pad, tgt_pad)
    # Rewrite the padded tails with arbitrary ids while keeping the masks.
    src2 = src.clone()
    src2[0, 4:] = torch.tensor([5, 6])
    tgt2 = tgt.clone()
    tgt2[0, 3:] = torch.tensor([7, 3])
    other = model(src2, tgt2, src_pad, tgt_pad)
    assert torch.allclose(base[:, :3], other[:, :3], atol=1e-6)


def test_causal_masking():
    model, _ = small_model(seed=2)
    model.eval()
    src = torch.tensor([[SOS_ID, 3, 4, EOS_ID]])
    tgt_a = torch.tensor([[SOS_ID, 3, 4, 5]])
    tgt_b = torch.tensor([[SOS_ID, 3, 6, 7]])  # differs from position 2 on
    a = model(src, tgt_a)
    b = model(src, tgt_b)
    assert torch.allclose(a[:, :2], b[:, :2], atol=1e-6)
    assert not torch.allclose(a[:, 2:], b[:, 2:], atol=1e-4)


def test_same_seed_same_forward():
    a, _ = small_model(seed=9)
    b, _ = small_model(seed=9)
    a.eval(), b.eval()
    src = torch.tensor([[SOS_ID, 3, 4, EOS_ID]])
    tgt = torch.tensor([[SOS_ID, 4, 3]])
    assert torch.equal(a(src, tgt), b(src, tgt))


def test_tree_mode_forward():
    torch.manual_seed(3)
    emb = BaselineEmbedding(5, 4, 16)
    cfg = ModelConfig(16, 2, 2, 24, encoder_pos="tree")
    model = Seq2SeqModel(cfg, emb)
    model.eval()
    paths = torch.from_numpy(tree_positions(["&", "a", "b"], BIN_ARITY)).unsqueeze(0)
    src = torch.tensor([[5, 6, 7]])
    tgt = torch.tensor([[SOS_ID, 6]])
    logits = model(src, tgt, tree_paths=paths)
    assert logits.shape == (1, 2, 9)
    with pytest.raises(ConfigError):
        model(src, tgt)  # paths are mandatory in tree mode


def test_embedding_width_must_match():
    emb = BaselineEmbedding(3, 3, 8)
    with pytest.raises(ConfigError):
        Seq2SeqModel(ModelConfig(16, 1, 2, 8), emb)


def test_overfit_single_sample():
    torch.manual_seed(4)
    emb = BaselineEmbedding(3, 6, 32)
    cfg = ModelConfig(32, 1, 2, 32, dropout=0.0)
    model = Seq2SeqModel(cfg, emb)
    src = torch.tensor([[SOS_ID, 3, 5, 4, EOS_ID]])
    tgt_in = torch.tensor([[SOS_ID, 3, 5, 4]])
    tgt_out = torch.tensor([[3, 5, 4, EOS_ID]])
    pad = torch.zeros_like(tgt_out, dtype=torch.bool)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    loss = None
    for _ in range(2000):
        opt.zero_grad()
        loss = cross_entropy(model(src, tgt_in), tgt_out, pad)
        if float(loss.detach()) < 0.01:
            break
        loss.backward()
        opt.step()
    assert float(loss.detach()) < 0.01


class _ScriptedModel:
    """Stands in for Seq2SeqModel: next-token logits looked up by prefix."""

    def __init__(self, script: dict, vocab_size: int):
        self.script = script
        self.vocab_size = vocab_size
        self.training = False
        self.embedding = type("E", (), {"mode": "inference", "feature_normalize": False})()

    @property
    def normalize_features(self):
        return False

    def eval(self):
        return self

    def train(self):
        return self

    def assemble_table(self):
        return torch.eye(self.vocab_size)

    def encode(self, src, src_pad=None, tree_paths=None, table=None):
        return torch.zeros(1, src.shape[1], self.vocab_size)

    def decode_features(self, memory, tgt, src_pad, tgt_pad=None, table=None):
        rows = [self.script[tuple(seq.tolist())] for seq in tgt]
        last = torch.log(torch.tensor(rows))
        out = torch.zeros(tgt.shape[0], tgt.shape[1], self.vocab_size)
        out[:, -1] = last
        return out


def _beam_fixture():
    # Vocabulary: pad 0, start 1, end 2, 'a' 3, 'b' 4.
    eps = 1e-9
    script = {
        (1,): [eps, eps, 0.05, 0.5, 0.45],
        (1, 3): [eps, eps, 0.4, 0.3, 0.3],
        (1, 4): [eps, eps, 0.05, 0.9, 0.05],
        (1, 3, 3): [eps, eps, 0.9, 0.05, 0.05],
        (1, 3, 4): [eps, eps, 0.9, 0.05, 0.05],
        (1, 4, 3): [eps, eps, 0.95, 0.025, 0.025],
        (1, 4, 4): [eps, eps, 0.9, 0.05, 0.05],
    }
    for a in (3, 4):
        for b in (3, 4):
            for c in (3, 4):
                script[(1, a, b, c)] = [eps, eps, 1.0 - 4 * eps, eps, eps]
    return _ScriptedModel(script, 5)


def _enumerate_best(model, max_len):
    # Exhaustive oracle over all end-token-terminated sequences.
    best, best_score = None, -math.inf
    stack = [((1,), 0.0)]
    while stack:
        prefix, logp = stack.pop()
        row = model.script[prefix]
        for token in (2, 3, 4):
            p = logp + math.log(row[token])
            if token == 2:
                score = p / (len(prefix) - 1 + 1)
                if score > best_score:
                    best, best_score = prefix[1:], score
            elif len(prefix) < max_len:
                stack.append((prefix + (token,), p))
    return list(best), best_score


def test_beam_recovers_what_greedy_misses():
    model = _beam_fixture()
    src = torch.tensor([1, 2])
    greedy = decode(model, src, DecodeSpec("greedy", 1, max_len=4))
    assert greedy.tokens == [3]
    beam = decode(model, src, DecodeSpec("beam", 3, max_len=4))
    oracle_tokens, oracle_score = _enumerate_best(model, max_len=4)
    assert beam.tokens == oracle_tokens == [4, 3]
    assert beam.finished
    assert beam.score == pytest.approx(oracle_score, abs=1e-6)


def test_beam_size_one_equals_greedy():
    model, rng = small_model(seed=5)
    model.embedding.freeze(rng)
    src = torch.tensor([SOS_ID, 3, 4, 5, EOS_ID])
    g = decode(model, src, DecodeSpec("greedy", 1, max_len=8))
    b = decode(model, src, DecodeSpec("beam", 1, max_len=8))
    assert g.tokens == b.tokens


def test_decode_requires_frozen():
    model, _ = small_model(seed=6)
    with pytest.raises(ModeError):
        decode(model, torch.tensor([SOS_ID, 3, EOS_ID]), DecodeSpec())


def test_decode_spec_validation():
    with pytest.raises(ConfigError):
        DecodeSpec("sampled")
    with pytest.raises(ConfigError):
        DecodeSpec("beam", 0)
    with pytest.raises(ConfigError):
        DecodeSpec("greedy", 1, 0)


def test_truncation_is_flagged():
    model = _beam_fixture()
    # max_len 1 forces truncation unless end wins immediately; here 'a' wins.
    result = decode(model, torch.tensor([1, 2]), DecodeSpec("greedy", 1, max_len=1))
    assert result.tokens == [3] and not result.finished


def test_greedy_equivariant_under_joint_renaming():
    model, rng = small_model(seed=7, n=3, m=6, d_alpha=10, d_beta=6)
    model.embedding.freeze(rng)
    src = torch.tensor([SOS_ID, 3, 7, 4, 3, EOS_ID])
    base = decode(model, src, DecodeSpec("greedy", 1, max_len=6))

    perm = np.random.default_rng(8).permutation(6)
    renamed_src = src.clone()
    for j, p in enumerate(perm):
        renamed_src[src == 3 + j] = 3 + int(p)
    inverse = np.argsort(perm)
    model.embedding.install_betas(model.embedding.betas[torch.from_numpy(inverse)].clone())
    renamed = decode(model, renamed_src, DecodeSpec("greedy", 1, max_len=6))

    undo = {3 + int(p): 3 + j for j, p in enumerate(perm)}
    assert [undo.get(t, t) for t in renamed.tokens] == base.tokens
