"""Random vector generation for the distinguishing part of token embeddings.

Three methods: i.i.d. standard normal components, the nonzero grid
neighbors of the origin ({-1,0,1}^d minus the zero vector), and the
vertices of the centered hypercube ({-1,1}^d).  The discrete methods
draw *unique* vectors by sampling distinct integers from the implicit
index set and mapping them to vectors, which never materializes the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, SizeError

NORMAL = "normal"
NEIGHBOR = "neighbor"
HYPERCUBE = "hypercube"

METHOD_KINDS = (NORMAL, NEIGHBOR, HYPERCUBE)

# Beyond 32 dimensions the integer index sets outgrow practical integer
# arithmetic, and collisions are vanishingly unlikely anyway.
UNIQUENESS_DIM_LIMIT = 32


@dataclass
class RandMethod:
    """A generation method plus its dimension count and uniqueness flag."""

    kind: str
    d_beta: int
    enforce_unique: bool = True

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method kind: {self.kind!r}")
        if self.d_beta < 0:
            raise ValueError("d_beta must be nonnegative")
        if self.kind == NORMAL:
            self.enforce_unique = False
        elif self.d_beta > UNIQUENESS_DIM_LIMIT:
            self.enforce_unique = False

    @property
    def set_size(self) -> int | None:
        """Size of the sampling set, or None for the continuous method."""
        if self.kind == NEIGHBOR:
            return 3**self.d_beta - 1
        if self.kind == HYPERCUBE:
            return 2**self.d_beta
        return None

    def spec(self) -> dict:
        return {"kind": self.kind, "d_beta": self.d_beta, "enforce_unique": self.enforce_unique}

    @classmethod
    def from_spec(cls, spec: dict) -> "RandMethod":
        return cls(spec["kind"], spec["d_beta"], spec["enforce_unique"])


def int_to_hypercube(i: int, d: int) -> np.ndarray:
    """Map an integer in [0, 2^d) to a hypercube vertex, least-significant bit first."""
    if not 0 <= i < 2**d:
        raise RangeError(f"integer {i} outside [0, 2^{d})")
    out = np.empty(d, dtype=np.float64)
    for k in range(d):
        out[k] = 1.0 if (i >> k) & 1 else -1.0
    return out


def int_to_neighbor(i: int, d: int) -> np.ndarray:
    """Map an integer in [0, 3^d - 1) to a nonzero point of {-1,0,1}^d.

    Ternary digits (least-significant first) map 0 -> -1, 1 -> 0, 2 -> +1,
    so the all-ones digit string is the zero vector; its index
    i_z = (3^d - 1) / 2 is skipped by shifting the upper half up by one.
    """
    if not 0 <= i < 3**d - 1:
        raise RangeError(f"integer {i} outside [0, 3^{d} - 1)")
    i_z = (3**d - 1) // 2
    j = i + 1 if i >= i_z else i
    out = np.empty(d, dtype=np.float64)
    for k in range(d):
        out[k] = float(j % 3 - 1)
        j //= 3
    return out


def _uniform_open(rng: np.random.Generator) -> float:
    # Strictly inside (0, 1); log() of either endpoint would misbehave.
    while True:
        u = rng.random()
        if 0.0 < u < 1.0:
            return u


def reservoir_sample_unique(m: int, set_size: int, rng: np.random.Generator) -> list[int]:
    """Draw m distinct integers from [0, set_size), each m-subset equally likely.

    Skip-based reservoir sampling over the implicit index range: runtime
    and memory are O(m log(set_size / m)) and O(m), independent of the
    set size.  The reservoir is shuffled before returning so that the
    token-to-vector assignment carries no positional bias.
    """
    if m > set_size:
        raise SizeError(f"cannot draw {m} distinct integers from a set of {set_size}")
    if set_size >= 2**64:
        raise OverflowError("set size exceeds 64-bit unsigned range")
    if m == 0:
        return []
    reservoir = list(range(m))
    if m < set_size:
        w = math.exp(math.log(_uniform_open(rng)) / m)
        i = m - 1
        while True:
            i += int(math.log(_uniform_open(rng)) / math.log1p(-w)) + 1
            if i >= set_size:
                break
            reservoir[int(rng.integers(0, m))] = i
            w *= math.exp(math.log(_uniform_open(rng)) / m)
    rng.shuffle(reservoir)
    return reservoir


def naive_sample_unique(m: int, set_size: int, rng: np.random.Generator) -> list[int]:
    """Rejection-based unique sampling; the slow baseline for the micro-benchmark."""
    if m > set_size:
        raise SizeError(f"cannot draw {m} distinct integers from a set of {set_size}")
    seen: set[int] = set()
    out: list[int] = []
    while len(out) < m:
        candidate = int(rng.integers(0, set_size))
        if candidate not in seen:
            seen.add(candidate)
            out.append(candidate)
    return out


def generate_betas(method: RandMethod, m: int, rng: np.random.Generator) -> np.ndarray:
    """Generate m random vectors of length ``method.d_beta`` as an (m, d) array."""
    d = method.d_beta
    if method.kind == NORMAL:
        return rng.standard_normal((m, d))

    to_vec = int_to_hypercube if method.kind == HYPERCUBE else int_to_neighbor
    set_size = method.set_size
    if method.enforce_unique:
        ints = reservoir_sample_unique(m, set_size, rng)
        return np.stack([to_vec(i, d) for i in ints]) if m else np.empty((0, d))

    if set_size < 2**64:
        ints = rng.integers(0, set_size, size=m, dtype=np.uint64, endpoint=False)
        return np.stack([to_vec(int(i), d) for i in ints]) if m else np.empty((0, d))

    # Index set too large for integer sampling; draw components directly.
    if method.kind == HYPERCUBE:
        return rng.integers(0, 2, size=(m, d)).astype(np.float64) * 2.0 - 1.0
    out = rng.integers(0, 3, size=(m, d)).astype(np.float64) - 1.0
    while True:
        zero_rows = np.flatnonzero((out == 0.0).all(axis=1))
        if zero_rows.size == 0:
            return out
        out[zero_rows] = rng.integers(0, 3, size=(zero_rows.size, d)).astype(np.float64) - 1.0
