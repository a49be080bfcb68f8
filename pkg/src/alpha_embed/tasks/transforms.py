"""Sample-level renaming transforms shared by training and evaluation.

Perturbation canonicalizes each sample: the distinct interchangeable
tokens, in order of first appearance in the target and then the input,
are renamed to the first k canonical names.  Alpha-renaming augmentation
draws a fresh random injection into a larger name space per sample.
"""

from __future__ import annotations

import numpy as np

from ..errors import SizeError
from .data import Dataset, Sample
from .prop import DEFAULT_AP_NAMES


def _split_aps(text: str, ap_names: tuple[str, ...]) -> list[tuple[str, bool]]:
    """Tokenize into (chunk, is_ap) pairs; non-AP characters pass through."""
    by_length = sorted(ap_names, key=len, reverse=True)
    out = []
    i = 0
    while i < len(text):
        for name in by_length:
            if text.startswith(name, i):
                out.append((name, True))
                i += len(name)
                break
        else:
            out.append((text[i], False))
            i += 1
    return out


def _rename(text: str, mapping: dict[str, str], ap_names: tuple[str, ...]) -> str:
    return "".join(
        mapping.get(chunk, chunk) if is_ap else chunk
        for chunk, is_ap in _split_aps(text, ap_names)
    )


def perturb_sample(sample: Sample, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES) -> Sample:
    """Rename APs so first appearances in target-then-input read canonically."""
    order: list[str] = []
    for text in (sample.target, sample.input):
        for chunk, is_ap in _split_aps(text, ap_names):
            if is_ap and chunk not in order:
                order.append(chunk)
    mapping = {ap: ap_names[i] for i, ap in enumerate(order)}
    return Sample(
        _rename(sample.input, mapping, ap_names),
        _rename(sample.target, mapping, ap_names),
        sample.ap_count,
    )


def perturb_dataset(dataset: Dataset, ap_names: tuple[str, ...] = DEFAULT_AP_NAMES) -> Dataset:
    return Dataset([perturb_sample(s, ap_names) for s in dataset])


def augment_alpha_rename(
    dataset: Dataset,
    target_m: int,
    rng: np.random.Generator,
    ap_names: tuple[str, ...] = DEFAULT_AP_NAMES,
) -> Dataset:
    """Per sample, map its APs through a fresh random injection into the
    first target_m names; the distinct-AP count of each sample is unchanged."""
    out = []
    for sample in dataset:
        present = sorted(
            {c for text in (sample.input, sample.target) for c, ap in _split_aps(text, ap_names) if ap}
        )
        if len(present) > target_m:
            raise SizeError(f"sample uses {len(present)} APs, target space has {target_m}")
        images = rng.permutation(target_m)[: len(present)]
        mapping = {ap: ap_names[int(img)] for ap, img in zip(present, images)}
        out.append(
            Sample(
                _rename(sample.input, mapping, ap_names),
                _rename(sample.target, mapping, ap_names),
                sample.ap_count,
            )
        )
    return Dataset(out)
