"""Metrics and evaluation protocols.

Alpha-covariance measures how stable a model's predictions are under
renaming of interchangeable tokens: every variant's prediction is mapped
back through the inverse renaming, and the score is
1 - (distinct predictions - 1) / (variants - 1), so 1 means perfectly
consistent and 0 means every variant answered differently.

Grid evaluation buckets copy-task samples by (unique token count, length)
and reports the mean token edit distance per cell.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch

from .batching import dataset_loss, encode_sample
from .embedding import INFERENCE, DualPartEmbedding, extend_embedding, select_median_embedding
from .errors import ConfigError, DataError, ModeError
from .model import DecodeSpec, Seq2SeqModel, decode, decode_greedy_batch, tree_positions
from .tasks.data import Dataset, Sample
from .tasks.prop import Assignment, PropFormula, all_completions_satisfy, decode_assignment
from .tasks.transforms import perturb_sample
from .vocab import (
    EOS_ID,
    PAD_ID,
    Renaming,
    Vocabulary,
    apply_renaming,
    enumerate_renamings,
    extend_vocabulary,
    invert_renaming,
    renaming_count,
    sample_renaming,
)


def edit_distance(a, b) -> int:
    """Levenshtein distance at token granularity, unit costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i]
        for j, token_b in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (token_a != token_b),
                )
            )
        previous = current
    return previous[-1]


def prop_correct(formula: PropFormula, assignment: Assignment) -> bool:
    """True iff every completion of the assignment satisfies the formula."""
    return all_completions_satisfy(formula, dict(assignment))


def prop_exact_match(a: Assignment, b: Assignment) -> bool:
    """Order-insensitive equality of (AP, bit) sets."""
    return set(a) == set(b)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: int
    variant: int
    renaming: Renaming
    raw: tuple[int, ...]
    unrenamed: tuple[int, ...]


def undo_renaming(prediction: list[int] | tuple[int, ...], renaming: Renaming) -> tuple[int, ...]:
    """Map a variant's prediction back through the inverse renaming.

    Predicted interchangeable ids outside the renaming's image have no
    preimage; they pass through unchanged so that stray tokens still
    count against consistency rather than crashing the protocol.
    """
    inverse = invert_renaming(renaming)
    return tuple(
        inverse.mapping.get(t, t) if t >= inverse.boundary else t for t in prediction
    )


def alpha_covariance(records: list[PredictionRecord]) -> float:
    """1 - (|distinct un-renamed predictions| - 1) / (|variants| - 1)."""
    if len(records) < 2:
        raise ConfigError("alpha-covariance needs at least two variants")
    distinct = len({r.unrenamed for r in records})
    return 1.0 - (distinct - 1) / (len(records) - 1)


@dataclass(frozen=True)
class AllVariants:
    pass


@dataclass(frozen=True)
class RandomVariants:
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError("need at least two variants")


def _variant_renamings(
    variants: AllVariants | RandomVariants,
    domain: tuple[int, ...],
    m: int,
    n: int,
    rng: np.random.Generator,
) -> list[Renaming]:
    k = len(domain)
    total = renaming_count(k, m)
    if isinstance(variants, AllVariants):
        return list(enumerate_renamings(k, m, n, domain=domain))
    if variants.count >= total:
        if variants.count > total:
            warnings.warn(
                f"requested {variants.count} variants but only {total} exist; using all"
            )
        return list(enumerate_renamings(k, m, n, domain=domain))
    seen: set[tuple[int, ...]] = set()
    out: list[Renaming] = []
    while len(out) < variants.count:
        base = sample_renaming(rng, k, m, n)
        mapping = dict(zip(domain, base.image_tuple()))
        image = tuple(mapping[d] for d in domain)
        if image in seen:
            continue
        seen.add(image)
        out.append(Renaming(mapping, boundary=n))
    return out


def run_alpha_cov_protocol(
    model: Seq2SeqModel,
    vocab: Vocabulary,
    dataset: Dataset,
    variants: AllVariants | RandomVariants,
    rng: np.random.Generator,
    max_len: int = 64,
    arity: dict[str, int] | None = None,
    predict=None,
) -> list[dict]:
    """Per-sample renaming-consistency means grouped by distinct-AP count.

    Returns rows ``{"ap_count": k, "mean": x, "samples": n}`` sorted by k.
    ``predict`` overrides the greedy decoder: a callable taking a list of
    source id sequences plus an optional tree-path tensor and returning a
    list of predicted id sequences.
    """
    if predict is None:
        if model.embedding.mode != INFERENCE:
            raise ModeError("the protocol requires a frozen embedding")
        predict = lambda sources, paths: [
            r.tokens
            for r in decode_greedy_batch(
                model, _pad_tensor(sources), max_len, tree_paths=paths
            )
        ]
    n, m = vocab.n, vocab.m
    by_count: dict[int, list[float]] = {}
    for sample_id, sample in enumerate(dataset):
        src = vocab.encode(sample.input) + [EOS_ID]
        domain = tuple(sorted({t for t in src if t >= n}))
        if not domain:
            continue
        renamings = _variant_renamings(variants, domain, m, n, rng)
        if len(renamings) < 2:
            continue
        sources = [apply_renaming(src, r) for r in renamings]
        paths = None
        if arity is not None:
            tokens = [vocab.id_to_token(i) for i in src[:-1]]
            single = tree_positions(tokens, arity)
            padded = np.zeros((len(sources), len(src), single.shape[1]), dtype=np.float32)
            padded[:, : single.shape[0]] = single
            paths = torch.from_numpy(padded)
        predictions = predict(sources, paths)
        records = [
            PredictionRecord(sample_id, i, r, tuple(p), undo_renaming(p, r))
            for i, (r, p) in enumerate(zip(renamings, predictions))
        ]
        k = len(domain)
        by_count.setdefault(k, []).append(alpha_covariance(records))
    return [
        {"ap_count": k, "mean": float(np.mean(scores)), "samples": len(scores)}
        for k, scores in sorted(by_count.items())
    ]


def _pad_tensor(sources: list[list[int]]) -> torch.Tensor:
    width = max(len(s) for s in sources)
    out = torch.full((len(sources), width), PAD_ID, dtype=torch.long)
    for i, s in enumerate(sources):
        out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
    return out


def write_alpha_cov_json(rows: list[dict], path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


def extend_model_vocab(
    model: Seq2SeqModel, vocab: Vocabulary, new_m: int
) -> tuple[Seq2SeqModel, Vocabulary]:
    """Grow a trained dual-part model to a larger interchangeable vocabulary.

    Transformer weights carry over unchanged; the embedding gains fresh
    distinguishing rows.  The result is in training mode: freeze it (or
    let the grid protocol do so) before decoding.
    """
    if not isinstance(model.embedding, DualPartEmbedding):
        raise ConfigError("only dual-part embeddings can grow their vocabulary")
    new_vocab = extend_vocabulary(vocab, new_m)
    new_model = Seq2SeqModel(model.config, extend_embedding(model.embedding, new_m))
    carried = {
        k: v for k, v in model.state_dict().items() if not k.startswith("embedding.")
    }
    new_model.load_state_dict(carried, strict=False)
    return new_model, new_vocab


@dataclass(frozen=True)
class AverageRepeats:
    repeats: int = 10

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("need at least one repeat")


@dataclass(frozen=True)
class MedianCandidates:
    candidates: int = 10

    def __post_init__(self):
        if self.candidates < 1:
            raise ConfigError("need at least one candidate")


@dataclass
class EvalGrid:
    cells: dict[tuple[int, int], tuple[float, int]]  # (u, l) -> (mean, count)
    training_region: tuple[int, int] | None = None  # (u_max, l_max)

    def __post_init__(self):
        for u, l in self.cells:
            if u > l:
                raise ConfigError(f"infeasible cell ({u}, {l}): more unique tokens than length")


def _prepare_grid_sample(sample: Sample, vocab: Vocabulary):
    """Classify one grid sample for a model with vocabulary ``vocab``.

    Returns (u, l, src_ids, target_ids, encodable_sample); the last three
    are None when the sample cannot be represented, in which case the
    prediction counts as empty.  Out-of-vocabulary samples whose distinct
    count still fits are canonicalized first, which is an
    alpha-equivalent rewrite.
    """
    tokens = list(sample.input)
    u, l = len(set(tokens)), len(tokens)
    try:
        ids = vocab.encode(sample.input)
        in_vocab = True
    except Exception:
        in_vocab = False
    if in_vocab:
        return u, l, ids + [EOS_ID], vocab.encode(sample.target), sample
    if u <= vocab.m:
        canonical = perturb_sample(sample)
        ids = vocab.encode(canonical.input)
        return u, l, ids + [EOS_ID], vocab.encode(canonical.target), canonical
    return u, l, None, None, None


def run_grid_eval(
    model: Seq2SeqModel,
    vocab: Vocabulary,
    dataset: Dataset,
    strategy: AverageRepeats | MedianCandidates,
    rng: np.random.Generator,
    max_len: int = 64,
    batch_size: int = 128,
    training_region: tuple[int, int] | None = None,
) -> EvalGrid:
    """Mean edit distance per (unique count, length) cell.

    ``AverageRepeats(r)``: r independent embedding freezes, all runs
    aggregated.  ``MedianCandidates(k)``: one run with the median-loss
    embedding of k candidates.
    """
    prepared = [_prepare_grid_sample(s, vocab) for s in dataset]
    sums: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}

    def accumulate_empty_predictions():
        for u, l, src, _, _ in prepared:
            if src is None:
                sums[(u, l)] = sums.get((u, l), 0.0) + float(l)
                counts[(u, l)] = counts.get((u, l), 0) + 1

    decodable = [(u, l, src, tgt) for u, l, src, tgt, _ in prepared if src is not None]

    def run_once():
        for start in range(0, len(decodable), batch_size):
            chunk = decodable[start : start + batch_size]
            results = decode_greedy_batch(
                model, _pad_tensor([src for _, _, src, _ in chunk]), max_len
            )
            for (u, l, _, tgt), result in zip(chunk, results):
                value = float(edit_distance(result.tokens, tgt))
                sums[(u, l)] = sums.get((u, l), 0.0) + value
                counts[(u, l)] = counts.get((u, l), 0) + 1
        accumulate_empty_predictions()

    if isinstance(strategy, AverageRepeats):
        for _ in range(strategy.repeats):
            model.embedding.freeze(rng)
            run_once()
    else:
        if isinstance(model.embedding, DualPartEmbedding):
            scoring = [enc for _, _, _, _, enc in prepared if enc is not None]
            if not scoring:
                raise DataError("no scorable samples for median selection")
            select_median_embedding(
                model.embedding,
                lambda: dataset_loss(model, vocab, scoring, batch_size),
                k=strategy.candidates,
                rng=rng,
            )
        else:
            model.embedding.freeze(rng)
        run_once()

    cells = {key: (sums[key] / counts[key], counts[key]) for key in sums}
    return EvalGrid(cells, training_region)


def write_grid_csv(grid: EvalGrid, path: str | Path, timestamp: bool = False):
    """Row-major CSV with header u,l,mean,count; absent cells are omitted.

    ``timestamp`` prepends one self-declared comment line; everything
    else is byte-deterministic.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if timestamp:
            fh.write(f"# {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(["u", "l", "mean", "count"])
        for u, l in sorted(grid.cells):
            mean, count = grid.cells[(u, l)]
            writer.writerow([u, l, repr(mean), count])


def read_grid_csv(path: str | Path) -> EvalGrid:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["u", "l", "mean", "count"]:
        raise DataError(f"unexpected grid CSV header: {header}")
    cells = {}
    for row in reader:
        u, l, mean, count = int(row[0]), int(row[1]), float(row[2]), int(row[3])
        cells[(u, l)] = (mean, count)
    return EvalGrid(cells)


def run_seq_eval(
    model: Seq2SeqModel,
    vocab: Vocabulary,
    dataset: Dataset,
    max_len: int = 64,
    batch_size: int = 128,
    arity: dict[str, int] | None = None,
) -> dict:
    """Exact-match rate and mean edit distance, teacher targets as truth."""
    samples = list(dataset)
    if not samples:
        raise DataError("cannot evaluate an empty dataset")
    exact = 0
    edit_total = 0
    truncated = 0
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        encoded = [encode_sample(vocab, s) for s in chunk]
        paths = None
        if arity is not None:
            width = max(len(src) for src, _ in encoded)
            paths_np = np.zeros((len(chunk), width, 64), dtype=np.float32)
            for i, (src, _) in enumerate(encoded):
                tokens = [vocab.id_to_token(t) for t in src[:-1]]
                p = tree_positions(tokens, arity)
                paths_np[i, : p.shape[0]] = p
            paths = torch.from_numpy(paths_np)
        results = decode_greedy_batch(
            model, _pad_tensor([src for src, _ in encoded]), max_len, tree_paths=paths
        )
        for (_, tgt), result in zip(encoded, results):
            if not result.finished:
                truncated += 1
            if result.finished and result.tokens == tgt:
                exact += 1
            edit_total += edit_distance(result.tokens, tgt)
    n = len(samples)
    return {
        "samples": n,
        "exact_match": exact / n,
        "mean_edit_distance": edit_total / n,
        "truncated": truncated,
    }


def run_prop_eval(
    model: Seq2SeqModel,
    vocab: Vocabulary,
    dataset: Dataset,
    max_len: int = 64,
    batch_size: int = 128,
    arity: dict[str, int] | None = None,
) -> dict:
    """Semantic correctness and exact match for assignment predictions.

    Truncated or unparseable predictions count as incorrect and are
    tallied separately.
    """
    samples = list(dataset)
    if not samples:
        raise DataError("cannot evaluate an empty dataset")
    correct = 0
    exact = 0
    truncated = 0
    parse_failures = 0
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        encoded = [encode_sample(vocab, s) for s in chunk]
        paths = None
        if arity is not None:
            width = max(len(src) for src, _ in encoded)
            paths_np = np.zeros((len(chunk), width, 64), dtype=np.float32)
            for i, (src, _) in enumerate(encoded):
                tokens = [vocab.id_to_token(t) for t in src[:-1]]
                p = tree_positions(tokens, arity)
                paths_np[i, : p.shape[0]] = p
            paths = torch.from_numpy(paths_np)
        results = decode_greedy_batch(
            model, _pad_tensor([src for src, _ in encoded]), max_len, tree_paths=paths
        )
        for sample, result in zip(chunk, results):
            if not result.finished:
                truncated += 1
                continue
            text = vocab.decode(result.tokens)
            try:
                prediction = decode_assignment(text)
            except Exception:
                parse_failures += 1
                continue
            formula = PropFormula.from_text(sample.input)
            truth = decode_assignment(sample.target)
            if prop_correct(formula, prediction):
                correct += 1
            if prop_exact_match(prediction, truth):
                exact += 1
    n = len(samples)
    return {
        "samples": n,
        "correct": correct / n,
        "exact_match": exact / n,
        "truncated": truncated,
        "parse_failures": parse_failures,
    }
