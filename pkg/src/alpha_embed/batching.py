"""Turning samples into padded teacher-forced tensor batches.

Conventions: encoder input is the tokenized source plus the end token;
decoder input starts with the start token; decoder targets end with the
end token.  Padding uses the pad id, with boolean masks marking padded
positions (True = padding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError
from .losses import cross_entropy
from .model import TREE_DEPTH_MAX, tree_positions
from .tasks.data import Dataset, Sample
from .vocab import EOS_ID, PAD_ID, SOS_ID, Vocabulary


@dataclass
class Batch:
    src: torch.Tensor
    src_pad: torch.Tensor
    tgt_in: torch.Tensor
    tgt_out: torch.Tensor
    tgt_pad: torch.Tensor
    tree_paths: torch.Tensor | None = None


def encode_sample(vocab: Vocabulary, sample: Sample) -> tuple[list[int], list[int]]:
    """Source ids (with end token) and target content ids (no specials)."""
    return vocab.encode(sample.input) + [EOS_ID], vocab.encode(sample.target)


def _pad_rows(rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
    for i, row in enumerate(rows):
        out[i, : len(row)] = torch.tensor(row, dtype=torch.long)
    return out


def make_batch(
    vocab: Vocabulary,
    samples: list[Sample],
    arity: dict[str, int] | None = None,
) -> Batch:
    if not samples:
        raise DataError("cannot build an empty batch")
    srcs, tgt_ins, tgt_outs = [], [], []
    paths = [] if arity is not None else None
    for sample in samples:
        src, tgt = encode_sample(vocab, sample)
        srcs.append(src)
        tgt_ins.append([SOS_ID] + tgt)
        tgt_outs.append(tgt + [EOS_ID])
        if paths is not None:
            tokens = [vocab.id_to_token(i) for i in src[:-1]]
            paths.append(tree_positions(tokens, arity))
    src = _pad_rows(srcs)
    tgt_in = _pad_rows(tgt_ins)
    tgt_out = _pad_rows(tgt_outs)
    tree = None
    if paths is not None:
        tree_np = np.zeros((len(samples), src.shape[1], 2 * TREE_DEPTH_MAX), dtype=np.float32)
        for i, p in enumerate(paths):
            tree_np[i, : p.shape[0]] = p  # end-token and pad rows stay zero
        tree = torch.from_numpy(tree_np)
    return Batch(
        src=src,
        src_pad=src == PAD_ID,
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_pad=tgt_out == PAD_ID,
        tree_paths=tree,
    )


@torch.no_grad()
def dataset_loss(
    model,
    vocab: Vocabulary,
    dataset: Dataset | list[Sample],
    batch_size: int = 64,
    arity: dict[str, int] | None = None,
) -> float:
    """Teacher-forced mean cross-entropy per non-padding token."""
    samples = list(dataset)
    if not samples:
        raise DataError("cannot score an empty dataset")
    was_training = model.training
    model.eval()
    try:
        total, tokens = 0.0, 0
        for start in range(0, len(samples), batch_size):
            batch = make_batch(vocab, samples[start : start + batch_size], arity)
            logits = model(
                batch.src, batch.tgt_in, batch.src_pad, batch.tgt_pad, batch.tree_paths
            )
            count = int((~batch.tgt_pad).sum())
            total += float(cross_entropy(logits, batch.tgt_out, batch.tgt_pad)) * count
            tokens += count
        return total / tokens
    finally:
        if was_training:
            model.train()
