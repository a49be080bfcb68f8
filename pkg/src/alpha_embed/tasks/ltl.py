"""Ingestion of linear-temporal-logic corpora: formula/trace pairs.

Formulas are prefix strings over unary ``!``/``X``, binary ``&``/``|``/``U``,
constants, and single-letter propositions.  A trace is a finite prefix of
propositional steps followed by a braced repeating period:
``(step ';')* '{' step (';' step)* '}'``, e.g. ``a;&ab;{b}``.  Semantic
checking is out of scope; corpora are validated structurally, tokenized,
and annotated with their proposition counts.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import DataError, ParseError
from ..vocab import Vocabulary
from .data import Dataset, Sample
from .prop import PropFormula

LTL_OP_ARITY = {"!": 1, "X": 1, "&": 2, "|": 2, "U": 2}
CONSTANTS = ("0", "1")


def ltl_vocabulary(m: int) -> Vocabulary:
    non_interchangeable = ["<pad>", "<s>", "</s>", "!", "X", "&", "|", "U", "=", "^", "0", "1", ";", "{", "}"]
    return Vocabulary(non_interchangeable, m)


def ltl_arity_map(ap_names) -> dict[str, int]:
    """Child counts for every formula token, for tree positions."""
    out = dict(LTL_OP_ARITY)
    out.update({"0": 0, "1": 0})
    out.update({name: 0 for name in ap_names})
    return out


def _is_ap(ch: str) -> bool:
    return ch.isalpha() and ch.islower()


def parse_ltl_formula(text: str) -> list[str]:
    """Validate a prefix formula and return its single-character tokens."""
    need = 1
    for pos, ch in enumerate(text):
        if need == 0:
            raise ParseError(f"trailing tokens at offset {pos}")
        if ch in LTL_OP_ARITY:
            need += LTL_OP_ARITY[ch] - 1
        elif ch in CONSTANTS or _is_ap(ch):
            need -= 1
        else:
            raise ParseError(f"unexpected character {ch!r} at offset {pos}")
    if need:
        raise ParseError("formula ends before all operands are parsed")
    if not text:
        raise ParseError("empty formula")
    return list(text)


def parse_trace(text: str) -> tuple[list[str], list[str]]:
    """Split a trace into (prefix steps, period steps), validating each step."""
    if text.count("{") != 1 or text.count("}") != 1:
        raise ParseError("trace needs exactly one braced period")
    if not text.endswith("}"):
        raise ParseError("trace must end with '}'")
    brace = text.index("{")
    head, period = text[:brace], text[brace + 1 : -1]
    if head and not head.endswith(";"):
        raise ParseError("prefix steps must each end with ';'")
    prefix_steps = head.split(";")[:-1] if head else []
    period_steps = period.split(";")
    for step in prefix_steps + period_steps:
        if not step:
            raise ParseError("empty trace step")
        PropFormula.from_text(step)  # single-letter APs; raises on malformed
    return prefix_steps, period_steps


def _ap_letters(*texts: str) -> set[str]:
    return {ch for text in texts for ch in text if _is_ap(ch)}


def _sample_from_pair(formula: str, trace: str, lineno: int) -> Sample:
    try:
        parse_ltl_formula(formula)
        parse_trace(trace)
    except ParseError as exc:
        raise ParseError(str(exc), line=lineno) from exc
    return Sample(formula, trace, len(_ap_letters(formula, trace)))


def ingest_ltl_corpus(path: str | Path, fmt: str = "auto") -> Dataset:
    """Load formula/trace pairs from JSONL (fields ``formula``, ``trace``)
    or two-column tab-separated text; malformed lines fail with their number."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such corpus file: {path}")
    if fmt not in ("auto", "jsonl", "tsv"):
        raise DataError(f"unknown corpus format: {fmt!r}")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            line_fmt = fmt
            if line_fmt == "auto":
                line_fmt = "jsonl" if line.lstrip().startswith('{"') else "tsv"
            if line_fmt == "jsonl":
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
                if not isinstance(record, dict) or "formula" not in record or "trace" not in record:
                    raise ParseError("expected fields 'formula' and 'trace'", line=lineno)
                formula, trace = str(record["formula"]), str(record["trace"])
            else:
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(f"expected 2 tab-separated columns, got {len(parts)}", line=lineno)
                formula, trace = parts
            samples.append(_sample_from_pair(formula, trace, lineno))
    if not samples:
        raise DataError(f"corpus file is empty: {path}")
    return Dataset(samples)
