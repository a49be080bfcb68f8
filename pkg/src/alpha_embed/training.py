"""Seeded training loop with per-step distinguisher resampling.

Learning rate follows linear warmup to the peak, then inverse square
root decay.  The log CSV has columns step, loss, scale, lr; the scale
column is the multiplier applied to the logits that step (1.0 in plain
cross-entropy mode).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch

from .batching import make_batch
from .checkpoint import save_checkpoint
from .config import RunConfig
from .embedding import BaselineEmbedding, DualPartEmbedding
from .errors import ConfigError, DataError, NumericError
from .losses import adacos_init, adacos_step, cross_entropy
from .model import TREE, Seq2SeqModel
from .randvec import RandMethod
from .tasks.copying import copy_vocabulary
from .tasks.data import Dataset
from .tasks.ltl import ltl_arity_map, ltl_vocabulary
from .tasks.prop import prop_arity_map, prop_vocabulary
from .tasks.transforms import augment_alpha_rename
from .vocab import Vocabulary

_TASK_VOCABS = {"copy": copy_vocabulary, "prop": prop_vocabulary, "ltl": ltl_vocabulary}


def lr_schedule(step: int, peak: float, warmup: int) -> float:
    """1-based step; warmup ramp is linear, decay is step^-0.5."""
    if step < 1:
        raise ConfigError("step numbering starts at 1")
    return peak * min(step / warmup, math.sqrt(warmup / step))


def task_arity_map(task: str, vocab: Vocabulary) -> dict[str, int]:
    if task == "prop":
        return prop_arity_map(vocab.interchangeable)
    if task == "ltl":
        return ltl_arity_map(vocab.interchangeable)
    raise ConfigError(f"task {task!r} has no tree structure")


def build_model(config: RunConfig, rng: np.random.Generator):
    """Model, vocabulary, and (for tree encoders) the arity map."""
    if config.task not in _TASK_VOCABS:
        raise ConfigError(f"unknown task: {config.task!r}")
    vocab = _TASK_VOCABS[config.task](config.vocab_m)
    if config.embedding_mode == "dual":
        method = RandMethod(config.method, config.d_beta, config.enforce_unique)
        embedding = DualPartEmbedding(
            vocab.n,
            vocab.m,
            config.model.d_model - config.d_beta,
            method,
            rng,
            block_normalize=config.block_normalize,
            feature_normalize=config.feature_normalize,
        )
    else:
        augmentation = "shuffle" if config.embedding_mode == "shuffle-aps" else "none"
        embedding = BaselineEmbedding(
            vocab.n,
            vocab.m,
            config.model.d_model,
            augmentation=augmentation,
            feature_normalize=config.feature_normalize,
        )
    model = Seq2SeqModel(config.model, embedding)
    arity = task_arity_map(config.task, vocab) if config.model.encoder_pos == TREE else None
    return model, vocab, arity


def _batch_indices(count: int, batch_size: int, rng: np.random.Generator):
    while True:
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            yield order[start : start + batch_size]


@dataclass
class TrainResult:
    steps: int
    final_loss: float
    log_path: str | None
    checkpoint_path: str | None


def train_model(
    config: RunConfig,
    dataset: Dataset,
    log_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    timestamp: bool = False,
) -> tuple[Seq2SeqModel, Vocabulary, TrainResult]:
    """Run the configured number of steps; deterministic for a fixed seed."""
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    model, vocab, arity = build_model(config, rng)
    model.train()

    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=config.peak_lr)
    adacos = config.loss == "adacos"
    state = adacos_init(len(vocab)) if adacos else None

    meta = {
        "task": config.task,
        "loss": config.loss,
        "embedding_mode": config.embedding_mode,
        "preset": config.preset,
        "seed": config.seed,
        "steps": config.steps,
        "vocab_m": config.vocab_m,
    }
    log_rows: list[tuple[int, float, float, float]] = []
    batches = _batch_indices(len(dataset), config.batch_size, rng)
    final_loss = math.nan

    for step in range(1, config.steps + 1):
        samples = [dataset[int(i)] for i in next(batches)]
        if config.embedding_mode == "alpha-renaming":
            samples = list(augment_alpha_rename(Dataset(samples), config.vocab_m, rng))
        model.embedding.resample(rng)
        batch = make_batch(vocab, samples, arity)
        logits = model(batch.src, batch.tgt_in, batch.src_pad, batch.tgt_pad, batch.tree_paths)
        if adacos:
            used_scale = state.scale
            loss, state = adacos_step(logits, batch.tgt_out, batch.tgt_pad, state)
        else:
            used_scale = 1.0
            loss = cross_entropy(logits, batch.tgt_out, batch.tgt_pad)
        loss_value = float(loss.detach())
        if not math.isfinite(loss_value):
            raise NumericError(f"non-finite loss at step {step}")
        lr = lr_schedule(step, config.peak_lr, config.warmup)
        for group in optimizer.param_groups:
            group["lr"] = lr
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        log_rows.append((step, loss_value, used_scale, lr))
        final_loss = loss_value
        if (
            checkpoint_path is not None
            and config.checkpoint_interval
            and step % config.checkpoint_interval == 0
            and step < config.steps
        ):
            save_checkpoint(_interval_path(checkpoint_path, step), model, vocab, meta)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, vocab, meta)
    if log_path is not None:
        write_train_log(log_path, log_rows, timestamp=timestamp)
    return model, vocab, TrainResult(
        config.steps,
        final_loss,
        str(log_path) if log_path is not None else None,
        str(checkpoint_path) if checkpoint_path is not None else None,
    )


def _interval_path(path: str | Path, step: int) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}-step{step}{path.suffix}")


def write_train_log(path: str | Path, rows, timestamp: bool = False):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if timestamp:
            fh.write(f"# {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "scale", "lr"])
        for step, loss, scale, lr in rows:
            writer.writerow([step, repr(float(loss)), repr(float(scale)), repr(float(lr))])


def read_train_log(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return [
        {"step": int(r["step"]), "loss": float(r["loss"]), "scale": float(r["scale"]), "lr": float(r["lr"])}
        for r in reader
    ]
