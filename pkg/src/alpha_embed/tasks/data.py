"""Dataset container and its JSONL serialization.

One JSON object per line with fields ``input``, ``target``, ``ap_count``;
UTF-8, no trailing whitespace.  Two-column tab-separated text is accepted
on load for corpora produced elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from ..errors import DataError, ParseError


@dataclass(frozen=True)
class Sample:
    input: str
    target: str
    ap_count: int


@dataclass
class Dataset:
    samples: list[Sample]

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Dataset(self.samples[index])
        return self.samples[index]


def save_dataset(dataset: Dataset, path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        for sample in dataset:
            record = {"input": sample.input, "target": sample.target, "ap_count": sample.ap_count}
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def _parse_jsonl_line(line: str, lineno: int) -> Sample:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(record, dict):
        raise ParseError("expected a JSON object", line=lineno)
    missing = {"input", "target", "ap_count"} - set(record)
    if missing:
        raise ParseError(f"missing fields: {', '.join(sorted(missing))}", line=lineno)
    return Sample(str(record["input"]), str(record["target"]), int(record["ap_count"]))


def load_dataset(path: str | Path) -> Dataset:
    """Load a JSONL dataset; raises DataError if the file is missing or empty."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such dataset file: {path}")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                samples.append(_parse_jsonl_line(line, lineno))
    if not samples:
        raise DataError(f"dataset file is empty: {path}")
    return Dataset(samples)
