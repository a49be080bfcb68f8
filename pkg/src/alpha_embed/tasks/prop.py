"""Propositional formulas, minimal partial assignments, and their corpus.

Formulas are prefix-notation strings over single-character operators:
``!`` negation, ``&`` conjunction, ``|`` disjunction, ``=`` biconditional,
``^`` exclusive-or, plus constants ``0``/``1`` and interchangeable
proposition tokens.  Assignments serialize as AP/bit pairs, ``a1b0``.

The solver enumerates partial assignments in minimality order (cardinality
ascending, AP subsets lexicographic, value 1 before 0) and returns the
first whose every completion satisfies the formula, so labels are exact
and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from ..errors import ParseError, SizeError
from ..vocab import Vocabulary, default_interchangeable_name
from .data import Dataset, Sample

OP_ARITY = {"!": 1, "&": 2, "|": 2, "=": 2, "^": 2}
CONSTANTS = ("0", "1")
SOLVER_AP_LIMIT = 20

DEFAULT_AP_NAMES = tuple(default_interchangeable_name(i) for i in range(92))

Assignment = list[tuple[str, int]]


def prop_vocabulary(m: int) -> Vocabulary:
    return Vocabulary(["<pad>", "<s>", "</s>", "!", "&", "|", "=", "^", "0", "1"], m)


def prop_arity_map(ap_names) -> dict[str, int]:
    """Child counts for every formula token, for tree positions."""
    out = dict(OP_ARITY)
    out.update({c: 0 for c in CONSTANTS})
    out.update({name: 0 for name in ap_names})
    return out


def tokenize(text: str, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES) -> list[str]:
    """Greedy longest-match split into operator, constant, and AP tokens."""
    by_length = sorted(ap_names, key=len, reverse=True)
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in OP_ARITY or ch in CONSTANTS:
            tokens.append(ch)
            i += 1
            continue
        for name in by_length:
            if text.startswith(name, i):
                tokens.append(name)
                i += len(name)
                break
        else:
            raise ParseError(f"unexpected character {ch!r} at offset {i}")
    return tokens


@dataclass(frozen=True)
class PropFormula:
    tokens: tuple[str, ...]

    def __post_init__(self):
        need = 1
        for pos, token in enumerate(self.tokens):
            if need == 0:
                raise ParseError(f"trailing tokens at position {pos}")
            need += OP_ARITY.get(token, 0) - 1
        if need:
            raise ParseError("expression ends before all operands are parsed")

    @classmethod
    def from_text(cls, text: str, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES) -> "PropFormula":
        return cls(tuple(tokenize(text, ap_names)))

    @property
    def text(self) -> str:
        return "".join(self.tokens)

    def aps(self) -> list[str]:
        """Distinct proposition names in lexicographic order."""
        return sorted({t for t in self.tokens if t not in OP_ARITY and t not in CONSTANTS})

    def eval(self, assignment: dict[str, int]) -> bool:
        value, rest = _eval_at(self.tokens, 0, assignment)
        assert rest == len(self.tokens)
        return value


def _eval_at(tokens, i, assignment):
    token = tokens[i]
    if token == "!":
        value, j = _eval_at(tokens, i + 1, assignment)
        return not value, j
    if token in OP_ARITY:
        left, j = _eval_at(tokens, i + 1, assignment)
        right, k = _eval_at(tokens, j, assignment)
        if token == "&":
            return left and right, k
        if token == "|":
            return left or right, k
        if token == "=":
            return left == right, k
        return left != right, k
    if token in CONSTANTS:
        return token == "1", i + 1
    return bool(assignment[token]), i + 1


def eval_formula(formula: PropFormula, assignment: dict[str, int]) -> bool:
    return formula.eval(assignment)


def _truth_table(formula: PropFormula, aps: list[str]) -> np.ndarray:
    """Row r holds the formula value under assignment bit j = (r >> j) & 1."""
    if len(aps) > SOLVER_AP_LIMIT:
        raise SizeError(f"formula uses {len(aps)} APs, limit is {SOLVER_AP_LIMIT}")
    rows = np.empty(2 ** len(aps), dtype=bool)
    for r in range(rows.size):
        rows[r] = formula.eval({ap: (r >> j) & 1 for j, ap in enumerate(aps)})
    return rows


def _consistent_rows(aps: list[str], assigned: dict[str, int]) -> np.ndarray:
    index = {ap: j for j, ap in enumerate(aps)}
    rows = np.arange(2 ** len(aps))
    keep = np.ones(rows.size, dtype=bool)
    for ap, bit in assigned.items():
        keep &= ((rows >> index[ap]) & 1) == bit
    return keep


def all_completions_satisfy(
    formula: PropFormula, assigned: dict[str, int], table: np.ndarray | None = None
) -> bool:
    """True iff the formula holds under every completion of ``assigned``.

    Assignments to propositions the formula never mentions are ignored;
    they cannot change its value.
    """
    aps = formula.aps()
    relevant = {ap: bit for ap, bit in assigned.items() if ap in aps}
    if table is None:
        table = _truth_table(formula, aps)
    return bool(table[_consistent_rows(aps, relevant)].all())


def solve_prop(formula: PropFormula) -> Assignment | None:
    """Minimum-cardinality partial assignment forcing the formula, or None.

    Ties break by lexicographic AP subsets, then value 1 before 0 at each
    position, so the label for a formula is unique.
    """
    aps = formula.aps()
    table = _truth_table(formula, aps)
    if not table.any():
        return None
    for cardinality in range(len(aps) + 1):
        for subset in combinations(aps, cardinality):
            for values in product((1, 0), repeat=cardinality):
                assigned = dict(zip(subset, values))
                if bool(table[_consistent_rows(aps, assigned)].all()):
                    return list(zip(subset, values))
    return None


def encode_assignment(assignment: Assignment) -> str:
    return "".join(f"{ap}{bit}" for ap, bit in assignment)


def decode_assignment(text: str, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES) -> Assignment:
    """Parse alternating AP/bit pairs; duplicates and stray characters fail."""
    by_length = sorted(ap_names, key=len, reverse=True)
    out: Assignment = []
    seen: set[str] = set()
    i = 0
    while i < len(text):
        for name in by_length:
            if text.startswith(name, i):
                break
        else:
            raise ParseError(f"expected an AP name at offset {i}")
        i += len(name)
        if i >= len(text) or text[i] not in "01":
            raise ParseError(f"expected a bit after {name!r} at offset {i}")
        if name in seen:
            raise ParseError(f"duplicate assignment for {name!r}")
        seen.add(name)
        out.append((name, int(text[i])))
        i += 1
    return out


def gen_prop_formula(
    ap_count: int, max_size: int, rng: np.random.Generator, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES
) -> PropFormula:
    """Random formula with at most max_size nodes.

    Node kinds are drawn with weights: leaf 1, ``!`` 1, ``&`` 1, ``|`` 1,
    ``=`` 0.5, ``^`` 0.5, restricted to what the remaining budget allows;
    leaves are uniform over the first ap_count APs and both constants.
    """
    if ap_count < 1 or max_size < 1:
        raise ValueError("need ap_count >= 1 and max_size >= 1")
    leaves = [ap_names[i] for i in range(ap_count)] + list(CONSTANTS)

    def grow(budget: int) -> list[str]:
        kinds = ["leaf"]
        weights = [1.0]
        if budget >= 2:
            kinds.append("!")
            weights.append(1.0)
        if budget >= 3:
            kinds += ["&", "|", "=", "^"]
            weights += [1.0, 1.0, 0.5, 0.5]
        probs = np.array(weights) / sum(weights)
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
        if kind == "leaf":
            return [leaves[int(rng.integers(0, len(leaves)))]]
        if kind == "!":
            return ["!"] + grow(budget - 1)
        left_budget = int(rng.integers(1, budget - 1))
        return [kind] + grow(left_budget) + grow(budget - 1 - left_budget)

    return PropFormula(tuple(grow(max_size)))


def gen_prop_dataset(
    count: int, ap_count: int, max_size: int, rng: np.random.Generator
) -> Dataset:
    """Satisfiable formulas paired with their minimal forcing assignments."""
    samples = []
    while len(samples) < count:
        formula = gen_prop_formula(ap_count, max_size, rng)
        solution = solve_prop(formula)
        if solution is None:
            continue
        distinct = len(formula.aps())
        samples.append(Sample(formula.text, encode_assignment(solution), distinct))
    return Dataset(samples)
