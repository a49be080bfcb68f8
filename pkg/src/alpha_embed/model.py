"""Encoder-decoder transformer sized for single-CPU experiments.

Positional information enters two ways: rotary phases on queries and keys
in self-attention (always in the decoder, optionally in the encoder), or
root-to-node path vectors added to encoder token embeddings for tree-shaped
inputs.  Cross-attention is never rotated.  The embedding table is shared
three ways per forward pass: encoder lookup, decoder lookup, and the final
projection, which with row-normalized tables yields cosine logits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .embedding import INFERENCE, BaselineEmbedding, DualPartEmbedding, project
from .errors import ConfigError, DepthError, LengthError, ModeError, ParseError
from .vocab import EOS_ID, PAD_ID, SOS_ID

ROPE_BASE = 10000.0
TREE_DEPTH_MAX = 32

ROTARY = "rotary"
TREE = "tree"


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    layer_count: int
    head_count: int
    fc_size: int
    dropout: float = 0.1
    max_src_len: int = 256
    max_tgt_len: int = 256
    encoder_pos: str = ROTARY
    preset: str | None = None

    def __post_init__(self):
        if self.d_model % self.head_count:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.head_count} heads")
        if (self.d_model // self.head_count) % 2:
            raise ConfigError("head dimension must be even for rotary phases")
        if self.encoder_pos not in (ROTARY, TREE):
            raise ConfigError(f"unknown encoder positional mode: {self.encoder_pos!r}")


MODEL_PRESETS = {
    "copy-small": ModelConfig(64, 2, 4, 64, encoder_pos=ROTARY, preset="copy-small"),
    "copy-big": ModelConfig(128, 6, 8, 128, encoder_pos=ROTARY, preset="copy-big"),
    "ltl": ModelConfig(128, 8, 8, 1024, encoder_pos=TREE, preset="ltl"),
    "prop": ModelConfig(132, 6, 6, 512, encoder_pos=TREE, preset="prop"),
}


def model_preset(name: str, **overrides) -> ModelConfig:
    if name not in MODEL_PRESETS:
        raise ConfigError(f"unknown model preset: {name!r}")
    return replace(MODEL_PRESETS[name], **overrides)


def rope_apply(x: torch.Tensor, positions: torch.Tensor, base: float = ROPE_BASE) -> torch.Tensor:
    """Rotate component pairs (2j, 2j+1) of ``x`` by angle position * base^(-2j/d).

    ``x`` has shape (..., seq, d) with even d; ``positions`` broadcasts
    against the sequence axis.
    """
    d = x.shape[-1]
    if d % 2:
        raise ConfigError("rotary dimension must be even")
    half = torch.arange(d // 2, dtype=x.dtype)
    freqs = base ** (-2.0 * half / d)
    angles = positions.to(x.dtype).unsqueeze(-1) * freqs  # (..., seq, d/2)
    cos, sin = torch.cos(angles), torch.sin(angles)
    even, odd = x[..., 0::2], x[..., 1::2]
    out = torch.empty_like(x)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def tree_positions(
    tokens: list[str], arity: dict[str, int], depth_max: int = TREE_DEPTH_MAX
) -> np.ndarray:
    """Per-token path vectors for a prefix-notation expression.

    Each ancestor step k with child index c in {0, 1} sets dims [2k, 2k+1]
    one-hot at c; the root token's vector is all zeros.  The sequence must
    parse as exactly one complete expression under the arity map.
    """
    out = np.zeros((len(tokens), 2 * depth_max), dtype=np.float32)
    pos = 0

    def parse(path: tuple[int, ...]):
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("expression ends before all operands are parsed")
        if len(path) > depth_max:
            raise DepthError(f"tree depth exceeds {depth_max}")
        token = tokens[pos]
        if token not in arity:
            raise ParseError(f"unknown token {token!r} at position {pos}")
        for k, child in enumerate(path):
            out[pos, 2 * k + child] = 1.0
        pos += 1
        for child in range(arity[token]):
            parse(path + (child,))

    parse(())
    if pos != len(tokens):
        raise ParseError(f"trailing tokens after position {pos}")
    return out


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with optional rotary query/key phases."""

    def __init__(self, d_model: int, head_count: int, dropout: float, rotary: bool):
        super().__init__()
        self.head_count = head_count
        self.d_head = d_model // head_count
        self.rotary = rotary
        self.dropout = dropout
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.head_count, self.d_head).transpose(1, 2)

    def forward(
        self,
        query: torch.Tensor,
        keyvalue: torch.Tensor,
        attend_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        # attend_mask: bool, True where a query may attend to a key;
        # broadcastable to (batch, heads, q_len, k_len).
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(keyvalue))
        v = self._split(self.v_proj(keyvalue))
        if self.rotary:
            q = rope_apply(q, torch.arange(q.shape[-2]))
            k = rope_apply(k, torch.arange(k.shape[-2]))
        dropout_p = self.dropout if self.training else 0.0
        out = F.scaled_dot_product_attention(q, k, v, attn_mask=attend_mask, dropout_p=dropout_p)
        b, _, t, _ = out.shape
        return self.out_proj(out.transpose(1, 2).reshape(b, t, -1))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, fc_size: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, fc_size), nn.ReLU(), nn.Linear(fc_size, d_model), nn.Dropout(dropout)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig, rotary: bool):
        super().__init__()
        self.norm_attn = nn.LayerNorm(cfg.d_model)
        self.attn = MultiHeadAttention(cfg.d_model, cfg.head_count, cfg.dropout, rotary)
        self.drop = nn.Dropout(cfg.dropout)
        self.norm_ff = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.fc_size, cfg.dropout)

    def forward(self, x: torch.Tensor, attend_mask: torch.Tensor | None) -> torch.Tensor:
        h = self.norm_attn(x)
        x = x + self.drop(self.attn(h, h, attend_mask))
        return x + self.ff(self.norm_ff(x))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm_self = nn.LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.head_count, cfg.dropout, rotary=True)
        self.drop_self = nn.Dropout(cfg.dropout)
        self.norm_cross = nn.LayerNorm(cfg.d_model)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.head_count, cfg.dropout, rotary=False)
        self.drop_cross = nn.Dropout(cfg.dropout)
        self.norm_ff = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.fc_size, cfg.dropout)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor,
        self_mask: torch.Tensor,
        cross_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        h = self.norm_self(x)
        x = x + self.drop_self(self.self_attn(h, h, self_mask))
        x = x + self.drop_cross(self.cross_attn(self.norm_cross(x), memory, cross_mask))
        return x + self.ff(self.norm_ff(x))


def _keep_mask_from_pad(pad_mask: torch.Tensor) -> torch.Tensor:
    # (batch, k_len) pad flags -> (batch, 1, 1, k_len) "may attend" flags
    return (~pad_mask)[:, None, None, :]


class Seq2SeqModel(nn.Module):
    """Pre-LN transformer whose three embedding uses share one table per pass."""

    def __init__(self, config: ModelConfig, embedding: DualPartEmbedding | BaselineEmbedding):
        super().__init__()
        if embedding.d_model != config.d_model:
            raise ConfigError(
                f"embedding width {embedding.d_model} != model width {config.d_model}"
            )
        self.config = config
        self.embedding = embedding
        rotary_encoder = config.encoder_pos == ROTARY
        self.encoder_layers = nn.ModuleList(
            EncoderLayer(config, rotary_encoder) for _ in range(config.layer_count)
        )
        self.encoder_norm = nn.LayerNorm(config.d_model)
        self.decoder_layers = nn.ModuleList(
            DecoderLayer(config) for _ in range(config.layer_count)
        )
        self.decoder_norm = nn.LayerNorm(config.d_model)
        if config.encoder_pos == TREE:
            self.tree_affine = nn.Linear(2 * TREE_DEPTH_MAX, config.d_model)
        else:
            self.tree_affine = None

    def assemble_table(self) -> torch.Tensor:
        return self.embedding.assemble()

    @property
    def normalize_features(self) -> bool:
        return self.embedding.feature_normalize

    def encode(
        self,
        src: torch.Tensor,
        src_pad: torch.Tensor | None = None,
        tree_paths: torch.Tensor | None = None,
        table: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if src.shape[1] > self.config.max_src_len:
            raise LengthError(f"source length {src.shape[1]} > {self.config.max_src_len}")
        if src_pad is None:
            src_pad = src == PAD_ID
        if table is None:
            table = self.assemble_table()
        x = table[src]
        if self.tree_affine is not None:
            if tree_paths is None:
                raise ConfigError("tree-positional encoder needs path vectors")
            x = x + self.tree_affine(tree_paths.to(x.dtype))
        mask = _keep_mask_from_pad(src_pad)
        for layer in self.encoder_layers:
            x = layer(x, mask)
        return self.encoder_norm(x)

    def decode_features(
        self,
        memory: torch.Tensor,
        tgt: torch.Tensor,
        src_pad: torch.Tensor,
        tgt_pad: torch.Tensor | None = None,
        table: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if tgt.shape[1] > self.config.max_tgt_len:
            raise LengthError(f"target length {tgt.shape[1]} > {self.config.max_tgt_len}")
        if tgt_pad is None:
            tgt_pad = tgt == PAD_ID
        if table is None:
            table = self.assemble_table()
        x = table[tgt]
        t = tgt.shape[1]
        causal = torch.ones(t, t, dtype=torch.bool).tril()
        self_mask = causal[None, None] & _keep_mask_from_pad(tgt_pad)
        cross_mask = _keep_mask_from_pad(src_pad)
        for layer in self.decoder_layers:
            x = layer(x, memory, self_mask, cross_mask)
        return self.decoder_norm(x)

    def forward(
        self,
        src: torch.Tensor,
        tgt: torch.Tensor,
        src_pad: torch.Tensor | None = None,
        tgt_pad: torch.Tensor | None = None,
        tree_paths: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Per-position logits of shape (batch, target length, vocab size)."""
        if src_pad is None:
            src_pad = src == PAD_ID
        table = self.assemble_table()
        memory = self.encode(src, src_pad, tree_paths, table)
        features = self.decode_features(memory, tgt, src_pad, tgt_pad, table)
        return project(table, features, normalize_features=self.normalize_features)


@dataclass(frozen=True)
class DecodeSpec:
    strategy: str = "greedy"
    beam_size: int = 1
    max_len: int = 64

    def __post_init__(self):
        if self.strategy not in ("greedy", "beam"):
            raise ConfigError(f"unknown decode strategy: {self.strategy!r}")
        if self.beam_size < 1:
            raise ConfigError("beam size must be at least 1")
        if self.max_len < 1:
            raise ConfigError("max_len must be at least 1")


@dataclass
class DecodeResult:
    tokens: list[int]  # generated ids, start/end tokens stripped
    finished: bool  # False when cut off at max_len
    score: float  # log-probability per generated token (greedy: 0.0)


@torch.no_grad()
def decode(
    model: Seq2SeqModel,
    src: torch.Tensor,
    spec: DecodeSpec,
    tree_paths: torch.Tensor | None = None,
) -> DecodeResult:
    """Decode one source sequence; ``src`` has shape (src_len,)."""
    if model.embedding.mode != INFERENCE:
        raise ModeError("decoding requires a frozen embedding")
    was_training = model.training
    model.eval()
    try:
        if spec.strategy == "greedy" and spec.beam_size == 1:
            return _decode_greedy(model, src, spec, tree_paths)
        return _decode_beam(model, src, spec, tree_paths)
    finally:
        if was_training:
            model.train()


def _decode_greedy(model, src, spec, tree_paths) -> DecodeResult:
    src = src.unsqueeze(0)
    src_pad = src == PAD_ID
    table = model.assemble_table()
    paths = tree_paths.unsqueeze(0) if tree_paths is not None else None
    memory = model.encode(src, src_pad, paths, table)
    out = [SOS_ID]
    for _ in range(spec.max_len):
        tgt = torch.tensor([out])
        features = model.decode_features(memory, tgt, src_pad, table=table)
        logits = project(table, features[:, -1], normalize_features=model.normalize_features)
        nxt = int(logits[0].argmax())
        if nxt == EOS_ID:
            return DecodeResult(out[1:], True, 0.0)
        out.append(nxt)
    return DecodeResult(out[1:], False, 0.0)


@torch.no_grad()
def decode_greedy_batch(
    model: Seq2SeqModel,
    src: torch.Tensor,
    max_len: int,
    tree_paths: torch.Tensor | None = None,
) -> list[DecodeResult]:
    """Greedy-decode a padded batch of sources in lockstep."""
    if model.embedding.mode != INFERENCE:
        raise ModeError("decoding requires a frozen embedding")
    was_training = model.training
    model.eval()
    try:
        src_pad = src == PAD_ID
        table = model.assemble_table()
        memory = model.encode(src, src_pad, tree_paths, table)
        b = src.shape[0]
        tgt = torch.full((b, 1), SOS_ID, dtype=torch.long)
        done = torch.zeros(b, dtype=torch.bool)
        for _ in range(max_len):
            features = model.decode_features(memory, tgt, src_pad, table=table)
            logits = project(table, features[:, -1], normalize_features=model.normalize_features)
            nxt = logits.argmax(dim=-1)
            done |= nxt == EOS_ID
            tgt = torch.cat([tgt, nxt.unsqueeze(1)], dim=1)
            if bool(done.all()):
                break
        results = []
        for row_done, row in zip(done, tgt):
            tokens = []
            for token in row.tolist()[1:]:
                if token == EOS_ID:
                    break
                tokens.append(token)
            results.append(DecodeResult(tokens, bool(row_done), 0.0))
        return results
    finally:
        if was_training:
            model.train()


def _decode_beam(model, src, spec, tree_paths) -> DecodeResult:
    src = src.unsqueeze(0)
    src_pad = src == PAD_ID
    table = model.assemble_table()
    paths = tree_paths.unsqueeze(0) if tree_paths is not None else None
    memory = model.encode(src, src_pad, paths, table)

    live: list[tuple[list[int], float]] = [([SOS_ID], 0.0)]
    finished: list[tuple[list[int], float]] = []  # (ids incl. eos position, cum logp)
    for _ in range(spec.max_len):
        if not live:
            break
        tgt = torch.tensor([ids for ids, _ in live])
        mem = memory.expand(len(live), -1, -1)
        pad = src_pad.expand(len(live), -1)
        features = model.decode_features(mem, tgt, pad, table=table)
        logits = project(table, features[:, -1], normalize_features=model.normalize_features)
        logp = F.log_softmax(logits, dim=-1)
        candidates: list[tuple[list[int], float]] = []
        for (ids, score), row in zip(live, logp):
            for token in range(row.shape[0]):
                candidates.append((ids + [token], score + float(row[token])))
        # Same generated length everywhere, so cumulative order = normalized order.
        candidates.sort(key=lambda pair: -pair[1])
        live = []
        for ids, score in candidates[: spec.beam_size]:
            if ids[-1] == EOS_ID:
                finished.append((ids, score))
            else:
                live.append((ids, score))

    def normalized(pair):
        ids, score = pair
        return score / (len(ids) - 1)  # generated tokens incl. the end token

    if finished:
        ids, score = max(finished, key=normalized)
        return DecodeResult(ids[1:-1], True, normalized((ids, score)))
    ids, score = max(live, key=normalized)
    return DecodeResult(ids[1:], False, normalized((ids, score)))
