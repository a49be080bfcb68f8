import numpy as np
import pytest
import torch

from alpha_embed.checkpoint import load_checkpoint, save_checkpoint
from alpha_embed.embedding import INFERENCE, TRAINING, BaselineEmbedding, DualPartEmbedding
from alpha_embed.errors import DataError
from alpha_embed.model import DecodeSpec, ModelConfig, Seq2SeqModel, decode
from alpha_embed.randvec import RandMethod
from alpha_embed.tasks.copying import copy_vocabulary


def dual_model(seed=0, frozen=False):
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    vocab = copy_vocabulary(4)
    emb = DualPartEmbedding(vocab.n, vocab.m, 10, RandMethod("hypercube", 6), rng)
    if frozen:
        emb.freeze(rng)
    cfg = ModelConfig(d_model=16, layer_count=1, head_count=2, fc_size=24, dropout=0.0)
    return Seq2SeqModel(cfg, emb), vocab, rng


def baseline_model(seed=0):
    torch.manual_seed(seed)
    vocab = copy_vocabulary(4)
    emb = BaselineEmbedding(vocab.n, vocab.m, 16, augmentation="shuffle")
    cfg = ModelConfig(d_model=16, layer_count=1, head_count=2, fc_size=24, dropout=0.0)
    return Seq2SeqModel(cfg, emb), vocab


def test_dual_roundtrip_exact(tmp_path):
    model, vocab, _ = dual_model()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, vocab, {"note": "x"})
    bundle = load_checkpoint(path)
    assert bundle.meta == {"note": "x"}
    assert bundle.vocab.spec() == vocab.spec()
    assert bundle.model.config == model.config
    assert bundle.model.embedding.mode == TRAINING
    for key, tensor in model.state_dict().items():
        assert torch.equal(bundle.model.state_dict()[key], tensor), key


def test_frozen_model_decodes_identically(tmp_path):
    model, vocab, _ = dual_model(frozen=True)
    model.eval()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, vocab)
    bundle = load_checkpoint(path)
    assert bundle.model.embedding.mode == INFERENCE
    bundle.model.eval()
    src = torch.tensor(vocab.encode("abca") + [2])
    spec = DecodeSpec(max_len=8)
    assert decode(model, src, spec).tokens == decode(bundle.model, src, spec).tokens


def test_baseline_roundtrip(tmp_path):
    model, vocab = baseline_model()
    path = tmp_path / "b.ckpt"
    save_checkpoint(path, model, vocab)
    bundle = load_checkpoint(path)
    emb = bundle.model.embedding
    assert isinstance(emb, BaselineEmbedding)
    assert emb.augmentation == "shuffle"
    assert torch.equal(emb.table, model.embedding.table)
    assert torch.equal(emb.row_order, model.embedding.row_order)


def test_bytes_deterministic(tmp_path):
    model, vocab, _ = dual_model(frozen=True)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, model, vocab, {"k": 1})
    save_checkpoint(b, model, vocab, {"k": 1})
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(DataError):
        load_checkpoint(path)
