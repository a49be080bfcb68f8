"""String-copying corpora: training strings and the unique-count/length grid."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..vocab import Vocabulary, default_interchangeable_name
from .data import Dataset, Sample

GRID_MIN_UNIQUE = 3


def copy_vocabulary(m: int) -> Vocabulary:
    """Specials plus m interchangeable characters; nothing else."""
    return Vocabulary(["<pad>", "<s>", "</s>"], m)


def gen_copy_dataset(
    count: int, len_min: int, len_max: int, vocab_m: int, rng: np.random.Generator
) -> Dataset:
    """Random strings with length uniform in [len_min, len_max], characters
    uniform over the first vocab_m interchangeable tokens; target = input."""
    if not 3 <= len_min <= len_max:
        raise ConfigError(f"need 3 <= len_min <= len_max, got [{len_min}, {len_max}]")
    if vocab_m < 1:
        raise ConfigError("vocab_m must be at least 1")
    alphabet = [default_interchangeable_name(i) for i in range(vocab_m)]
    samples = []
    for _ in range(count):
        length = int(rng.integers(len_min, len_max + 1))
        picks = rng.integers(0, vocab_m, size=length)
        text = "".join(alphabet[i] for i in picks)
        samples.append(Sample(text, text, int(len(set(picks)))))
    return Dataset(samples)


def grid_cells(max_len: int, max_unique: int) -> list[tuple[int, int]]:
    """All feasible (unique count u, length l) cells: 3 <= u <= l <= max_len."""
    return [
        (u, l)
        for u in range(GRID_MIN_UNIQUE, max_unique + 1)
        for l in range(u, max_len + 1)
    ]


def gen_eval_grid_dataset(
    max_len: int, max_unique: int, per_cell: int, rng: np.random.Generator
) -> Dataset:
    """per_cell strings for every feasible cell, each of length l with exactly
    u distinct characters drawn from the first max_unique tokens."""
    if max_unique > max_len:
        raise ConfigError(f"max_unique {max_unique} exceeds max_len {max_len}")
    if max_unique < GRID_MIN_UNIQUE:
        raise ConfigError(f"max_unique must be at least {GRID_MIN_UNIQUE}")
    if per_cell < 1:
        raise ConfigError("per_cell must be at least 1")
    alphabet = [default_interchangeable_name(i) for i in range(max_unique)]
    samples = []
    for u, l in grid_cells(max_len, max_unique):
        for _ in range(per_cell):
            chosen = rng.choice(max_unique, size=u, replace=False)
            # Every chosen character once, the rest drawn from the chosen set.
            extra = chosen[rng.integers(0, u, size=l - u)]
            picks = np.concatenate([chosen, extra])
            rng.shuffle(picks)
            text = "".join(alphabet[i] for i in picks)
            samples.append(Sample(text, text, u))
    return Dataset(samples)
