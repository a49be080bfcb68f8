"""Dataset generation, transformation, and ingestion for the three tasks."""

from .copying import copy_vocabulary, gen_copy_dataset, gen_eval_grid_dataset
from .data import Dataset, Sample, load_dataset, save_dataset
from .ltl import ingest_ltl_corpus, ltl_vocabulary, parse_ltl_formula, parse_trace
from .prop import (
    PropFormula,
    decode_assignment,
    encode_assignment,
    eval_formula,
    gen_prop_dataset,
    gen_prop_formula,
    prop_vocabulary,
    solve_prop,
)
from .transforms import augment_alpha_rename, perturb_dataset, perturb_sample

__all__ = [
    "Dataset",
    "PropFormula",
    "Sample",
    "augment_alpha_rename",
    "copy_vocabulary",
    "decode_assignment",
    "encode_assignment",
    "eval_formula",
    "gen_copy_dataset",
    "gen_eval_grid_dataset",
    "gen_prop_dataset",
    "gen_prop_formula",
    "ingest_ltl_corpus",
    "load_dataset",
    "ltl_vocabulary",
    "parse_ltl_formula",
    "parse_trace",
    "perturb_dataset",
    "perturb_sample",
    "prop_vocabulary",
    "save_dataset",
    "solve_prop",
]
