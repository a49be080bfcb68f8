"""Embedding tables for vocabularies with an interchangeable token class.

The dual-part table gives every interchangeable token the same learnable
content row and a random, non-learnable distinguishing row; the two are
concatenated and the result row-normalized.  During training the random
rows are redrawn every optimization step, so the only stable information
about an interchangeable token is that it differs from the others.  For
inference the rows are drawn once and held fixed.

A conventional fully learnable table is provided as the baseline, with
optional per-step shuffling of its interchangeable rows.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch
from torch import nn

from .errors import ModeError, NormalizationError, SizeError
from .randvec import RandMethod, generate_betas

TRAINING = "training"
INFERENCE = "inference"


def l2_normalize_rows(matrix: torch.Tensor) -> torch.Tensor:
    """Divide each row by its L2 norm; a zero row raises NormalizationError."""
    norms = torch.linalg.vector_norm(matrix, dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise NormalizationError("cannot normalize a zero row")
    return matrix / norms


def project(table: torch.Tensor, features: torch.Tensor, normalize_features: bool = True) -> torch.Tensor:
    """Logits for feature vectors against every table row: features @ table^T."""
    if normalize_features:
        features = l2_normalize_rows(features)
    return features @ table.transpose(-2, -1)


class DualPartEmbedding(nn.Module):
    """Content-plus-distinguisher table over n fixed and m interchangeable tokens.

    Learnable state is the n x d_alpha matrix for fixed tokens and one
    shared 1 x d_alpha row for the interchangeable class.  The m x d_beta
    distinguishing rows live in a buffer, excluded from every optimizer.
    """

    def __init__(
        self,
        n: int,
        m: int,
        d_alpha: int,
        method: RandMethod,
        rng: np.random.Generator,
        block_normalize: bool = True,
        feature_normalize: bool = True,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        if n < 1 or m < 0 or d_alpha < 1:
            raise ValueError("need n >= 1, m >= 0, d_alpha >= 1")
        self.n = n
        self.m = m
        self.d_alpha = d_alpha
        self.d_beta = method.d_beta
        self.method = method
        self.block_normalize = block_normalize
        self.feature_normalize = feature_normalize
        self.mode = TRAINING
        std = (d_alpha + self.d_beta) ** -0.5
        self.L = nn.Parameter(torch.empty(n, d_alpha, dtype=dtype).normal_(0.0, std))
        self.alpha = nn.Parameter(torch.empty(1, d_alpha, dtype=dtype).normal_(0.0, std))
        self.register_buffer("betas", torch.zeros(m, self.d_beta, dtype=dtype))
        self._draw_betas(rng)

    @property
    def d_model(self) -> int:
        return self.d_alpha + self.d_beta

    @property
    def vocab_size(self) -> int:
        return self.n + self.m

    def _draw_betas(self, rng: np.random.Generator):
        fresh = generate_betas(self.method, self.m, rng)
        with torch.no_grad():
            self.betas.copy_(torch.from_numpy(fresh))

    def resample(self, rng: np.random.Generator):
        """Redraw the distinguishing rows; once per optimization step."""
        if self.mode != TRAINING:
            raise ModeError("cannot resample a frozen embedding")
        self._draw_betas(rng)

    def freeze(self, rng: np.random.Generator):
        """Draw one final set of distinguishing rows and enter inference mode."""
        self._draw_betas(rng)
        self.mode = INFERENCE

    def install_betas(self, betas: torch.Tensor):
        """Install a previously drawn set and enter inference mode."""
        if betas.shape != self.betas.shape:
            raise ValueError(f"expected shape {tuple(self.betas.shape)}, got {tuple(betas.shape)}")
        with torch.no_grad():
            self.betas.copy_(betas)
        self.mode = INFERENCE

    def assemble(self) -> torch.Tensor:
        """The full (n + m) x d_model table for one forward pass."""
        top_left = l2_normalize_rows(self.L) if self.block_normalize else self.L
        top = torch.cat([top_left, torch.zeros(self.n, self.d_beta, dtype=self.L.dtype)], dim=1)
        if self.m:
            shared = l2_normalize_rows(self.alpha) if self.block_normalize else self.alpha
            distinct = l2_normalize_rows(self.betas) if self.block_normalize else self.betas
            bottom = torch.cat([shared.expand(self.m, self.d_alpha), distinct], dim=1)
            table = torch.cat([top, bottom], dim=0)
        else:
            table = top
        return l2_normalize_rows(table) if self.feature_normalize else table

    def forward(self, ids: torch.Tensor, table: torch.Tensor | None = None) -> torch.Tensor:
        if table is None:
            table = self.assemble()
        return table[ids]


class BaselineEmbedding(nn.Module):
    """Fully learnable (n + m) x d_model table.

    ``augmentation="shuffle"`` permutes the interchangeable rows afresh at
    every resample call, so row identity is unstable during training the
    way the dual-part distinguishers are.
    """

    AUGMENTATIONS = ("none", "shuffle")

    def __init__(
        self,
        n: int,
        m: int,
        d_model: int,
        augmentation: str = "none",
        feature_normalize: bool = False,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        if augmentation not in self.AUGMENTATIONS:
            raise ValueError(f"unknown augmentation: {augmentation!r}")
        self.n = n
        self.m = m
        self._d_model = d_model
        self.augmentation = augmentation
        self.feature_normalize = feature_normalize
        self.mode = TRAINING
        self.table = nn.Parameter(torch.empty(n + m, d_model, dtype=dtype).normal_(0.0, d_model**-0.5))
        self.register_buffer("row_order", torch.arange(m, dtype=torch.long))

    @property
    def d_model(self) -> int:
        return self._d_model

    @property
    def vocab_size(self) -> int:
        return self.n + self.m

    def resample(self, rng: np.random.Generator):
        if self.mode != TRAINING:
            raise ModeError("cannot resample a frozen embedding")
        if self.augmentation == "shuffle" and self.m:
            order = torch.from_numpy(rng.permutation(self.m))
            with torch.no_grad():
                self.row_order.copy_(order)

    def freeze(self, rng: np.random.Generator):
        with torch.no_grad():
            self.row_order.copy_(torch.arange(self.m))
        self.mode = INFERENCE

    def assemble(self) -> torch.Tensor:
        if self.augmentation == "shuffle" and self.m:
            table = torch.cat([self.table[: self.n], self.table[self.n :][self.row_order]], dim=0)
        else:
            table = self.table
        return l2_normalize_rows(table) if self.feature_normalize else table

    def forward(self, ids: torch.Tensor, table: torch.Tensor | None = None) -> torch.Tensor:
        if table is None:
            table = self.assemble()
        return table[ids]


def extend_embedding(embedding: DualPartEmbedding, new_m: int) -> DualPartEmbedding:
    """A copy of the embedding with room for ``new_m`` interchangeable tokens.

    The learned parts carry over unchanged; the distinguishing rows are
    redrawn for the larger count, so the result starts in training mode
    and must be frozen (or resampled) before inference.  The candidate
    set must still cover ``new_m`` distinct vectors.
    """
    if new_m < embedding.m:
        raise SizeError(f"cannot shrink the interchangeable block from {embedding.m} to {new_m}")
    out = DualPartEmbedding(
        embedding.n,
        new_m,
        embedding.d_alpha,
        embedding.method,
        np.random.default_rng(0),
        block_normalize=embedding.block_normalize,
        feature_normalize=embedding.feature_normalize,
        dtype=embedding.L.dtype,
    )
    with torch.no_grad():
        out.L.copy_(embedding.L)
        out.alpha.copy_(embedding.alpha)
    return out


def select_median_embedding(
    embedding: DualPartEmbedding,
    eval_loss: Callable[[], float],
    k: int = 10,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Freeze k candidate distinguisher sets, keep the one with median loss.

    ``eval_loss`` scores the currently installed set (teacher-forced
    cross-entropy over a held-out dataset, in the intended use).  For even
    k the lower median is kept.  Returns the sorted candidate losses.
    """
    if k < 1:
        raise ValueError("need at least one candidate")
    if rng is None:
        rng = np.random.default_rng()
    candidates: list[tuple[float, torch.Tensor]] = []
    for _ in range(k):
        embedding.freeze(rng)
        candidates.append((float(eval_loss()), embedding.betas.clone()))
    candidates.sort(key=lambda pair: pair[0])
    median_loss, median_betas = candidates[(k - 1) // 2]
    embedding.install_betas(median_betas)
    return [loss for loss, _ in candidates]
