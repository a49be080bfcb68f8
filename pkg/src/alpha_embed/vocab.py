"""Token tables and the renaming algebra for interchangeable tokens.

A vocabulary is split into two blocks: non-interchangeable tokens occupy
ids ``[0, n)`` and interchangeable tokens occupy ``[n, n + m)``.  The
interchangeable block can be grown after training, and renamings map
interchangeable ids injectively between (possibly differently sized)
interchangeable blocks while leaving everything else fixed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError, ParseError, SizeError

PAD = "<pad>"
SOS = "<s>"
EOS = "</s>"

PAD_ID = 0
SOS_ID = 1
EOS_ID = 2

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


NAME_SPACE_LIMIT = 92  # a..z plus ap10..ap99


def default_interchangeable_name(i: int) -> str:
    """Name for the i-th interchangeable token: a..z, then ap10 .. ap99.

    The numeric suffixes have exactly two digits so that no name is a
    prefix of another and greedy tokenization stays unambiguous against
    the constant and bit tokens ``0`` and ``1``; a three-digit suffix
    would collide with a two-digit name followed by a bit, hence the cap.
    """
    if not 0 <= i < NAME_SPACE_LIMIT:
        raise ValueError(f"interchangeable token index {i} outside [0, {NAME_SPACE_LIMIT})")
    if i < 26:
        return _LETTERS[i]
    return f"ap{i - 26 + 10}"


class Vocabulary:
    """Ordered token table with a trailing interchangeable block.

    ``non_interchangeable`` must start with the pad, start and end
    specials (ids 0, 1, 2).  Interchangeable tokens are auto-named via
    :func:`default_interchangeable_name` unless explicit names are given.
    """

    def __init__(
        self,
        non_interchangeable: Sequence[str],
        interchangeable_count: int,
        interchangeable_names: Sequence[str] | None = None,
    ):
        if len(non_interchangeable) < 3 or list(non_interchangeable[:3]) != [PAD, SOS, EOS]:
            raise ValueError("non-interchangeable block must start with pad/start/end specials")
        if interchangeable_count < 0:
            raise ValueError("interchangeable_count must be non-negative")
        if interchangeable_names is None:
            interchangeable_names = [
                default_interchangeable_name(i) for i in range(interchangeable_count)
            ]
        elif len(interchangeable_names) != interchangeable_count:
            raise ValueError("interchangeable_names length mismatch")

        self.non_interchangeable = list(non_interchangeable)
        self.interchangeable = list(interchangeable_names)
        tokens = self.non_interchangeable + self.interchangeable
        if len(set(tokens)) != len(tokens):
            raise ValueError("token strings must be unique")
        self._token_to_id = {t: i for i, t in enumerate(tokens)}
        self._id_to_token = tokens
        self._max_token_len = max(len(t) for t in tokens)

    @property
    def n(self) -> int:
        """Number of non-interchangeable tokens (start of the interchangeable block)."""
        return len(self.non_interchangeable)

    @property
    def m(self) -> int:
        return len(self.interchangeable)

    def __len__(self) -> int:
        return self.n + self.m

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def token_to_id(self, token: str) -> int:
        return self._token_to_id[token]

    def id_to_token(self, i: int) -> str:
        return self._id_to_token[i]

    def is_interchangeable(self, i: int) -> bool:
        return i >= self.n

    def interchangeable_ids(self) -> range:
        return range(self.n, self.n + self.m)

    def encode(self, text: str) -> list[int]:
        """Tokenize ``text`` by greedy longest match against the token table."""
        ids: list[int] = []
        pos = 0
        while pos < len(text):
            for ln in range(min(self._max_token_len, len(text) - pos), 0, -1):
                tid = self._token_to_id.get(text[pos : pos + ln])
                if tid is not None:
                    ids.append(tid)
                    pos += ln
                    break
            else:
                raise ParseError(f"unknown token at position {pos}: {text[pos:pos + 8]!r}")
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self._id_to_token[i] for i in ids)

    def ap_count(self, *sequences: Sequence[int]) -> int:
        """Number of distinct interchangeable ids across the given sequences."""
        return len({i for seq in sequences for i in seq if i >= self.n})

    def spec(self) -> dict:
        """JSON-serializable description, for checkpoints."""
        return {
            "non_interchangeable": self.non_interchangeable,
            "interchangeable": self.interchangeable,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "Vocabulary":
        return cls(
            spec["non_interchangeable"],
            len(spec["interchangeable"]),
            spec["interchangeable"],
        )


def extend_vocabulary(v: Vocabulary, new_m: int) -> Vocabulary:
    """Grow the interchangeable block to ``new_m`` tokens; ids of existing tokens keep."""
    if new_m < v.m:
        raise SizeError(f"cannot shrink interchangeable block from {v.m} to {new_m}")
    names = list(v.interchangeable) + [
        default_interchangeable_name(i) for i in range(v.m, new_m)
    ]
    return Vocabulary(v.non_interchangeable, new_m, names)


@dataclass(frozen=True)
class Renaming:
    """Injective map over interchangeable token ids, identity elsewhere.

    ``mapping`` uses absolute token ids; every key and value must be at
    least ``boundary`` (the id where the interchangeable block starts).
    When source and target vocabularies coincide and the map is onto, it
    is a permutation.
    """

    mapping: dict[int, int]
    boundary: int

    def __post_init__(self):
        vals = list(self.mapping.values())
        if len(set(vals)) != len(vals):
            raise ValueError("renaming must be injective")
        for k, x in self.mapping.items():
            if k < self.boundary or x < self.boundary:
                raise ValueError("renaming may only touch interchangeable ids")

    def __call__(self, i: int) -> int:
        if i < self.boundary:
            return i
        try:
            return self.mapping[i]
        except KeyError:
            raise DomainError(f"token id {i} not in renaming domain") from None

    def image_tuple(self) -> tuple[int, ...]:
        return tuple(self.mapping[k] for k in sorted(self.mapping))


def identity_renaming(m: int, n: int) -> Renaming:
    return Renaming({n + i: n + i for i in range(m)}, n)


def apply_renaming(seq: Sequence[int], r: Renaming) -> list[int]:
    """Element-wise image of ``seq`` under ``r``; non-interchangeable ids pass through."""
    return [r(i) for i in seq]


def invert_renaming(r: Renaming) -> Renaming:
    """Inverse map, defined on the image of ``r``."""
    return Renaming({v: k for k, v in r.mapping.items()}, r.boundary)


def sample_renaming(
    rng: np.random.Generator, source_m: int, target_m: int, n: int
) -> Renaming:
    """Uniformly random injection of the source interchangeable ids into the target block."""
    if target_m < source_m:
        raise SizeError(f"cannot inject {source_m} tokens into {target_m}")
    image = rng.permutation(target_m)[:source_m]
    return Renaming({n + i: n + int(image[i]) for i in range(source_m)}, n)


def enumerate_renamings(
    k: int,
    target_m: int,
    n: int,
    domain: Sequence[int] | None = None,
) -> Iterator[Renaming]:
    """All injections of ``k`` interchangeable ids into a ``target_m``-sized block.

    Yields exactly ``target_m! / (target_m - k)!`` renamings in
    lexicographic order of the image tuple.  The domain defaults to the
    first ``k`` interchangeable ids; pass ``domain`` to rename a specific
    set of ids (e.g. the tokens appearing in one sample).
    """
    if k > target_m:
        raise SizeError(f"cannot inject {k} tokens into {target_m}")
    if domain is None:
        domain = [n + i for i in range(k)]
    elif len(domain) != k:
        raise ValueError("domain length must equal k")
    for image in itertools.permutations(range(target_m), k):
        yield Renaming({d: n + img for d, img in zip(domain, image)}, n)


def renaming_count(k: int, target_m: int) -> int:
    """Number of injections of k tokens into a target_m-sized block."""
    if k > target_m:
        raise SizeError(f"cannot inject {k} tokens into {target_m}")
    return math.perm(target_m, k)
