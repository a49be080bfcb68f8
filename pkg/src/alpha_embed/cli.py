"""Command-line entry points.

Exit codes: 0 ok, 2 configuration problem, 3 data problem, 4 numeric
failure.  Every subcommand honors --seed (env ALPHA_EMBED_SEED as the
fallback); outputs are byte-deterministic except for the optional
timestamp header line on CSV artifacts, suppressed by --no-timestamp.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint
from .config import load_config_file, resolve_run_config
from .embedding import INFERENCE
from .errors import (
    AlphaEmbedError,
    ConfigError,
    DataError,
    LengthError,
    NormalizationError,
    NumericError,
    ParseError,
)
from .evaluation import (
    AllVariants,
    AverageRepeats,
    MedianCandidates,
    RandomVariants,
    extend_model_vocab,
    run_alpha_cov_protocol,
    run_grid_eval,
    run_prop_eval,
    run_seq_eval,
    write_alpha_cov_json,
    write_grid_csv,
)
from .randvec import RandMethod, naive_sample_unique, reservoir_sample_unique
from .tasks.copying import gen_copy_dataset, gen_eval_grid_dataset
from .tasks.data import load_dataset, save_dataset
from .tasks.ltl import ingest_ltl_corpus
from .tasks.prop import gen_prop_dataset
from .tasks.transforms import perturb_dataset
from .training import task_arity_map, train_model

TREE_TASKS = ("prop", "ltl")


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ALPHA_EMBED_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"ALPHA_EMBED_SEED is not an integer: {env!r}") from None
    return 0


def _parse_range(text: str) -> tuple[int, int]:
    try:
        low, high = text.split(":")
        return int(low), int(high)
    except ValueError:
        raise ConfigError(f"expected MIN:MAX, got {text!r}") from None


def _dataset_summary(dataset) -> str:
    lengths = [len(s.input) for s in dataset]
    histogram: dict[int, int] = {}
    for s in dataset:
        histogram[s.ap_count] = histogram.get(s.ap_count, 0) + 1
    parts = [
        f"samples: {len(dataset)}",
        f"input length min/mean/max: {min(lengths)}/{sum(lengths) / len(lengths):.2f}/{max(lengths)}",
        "ap histogram: " + ", ".join(f"{k}:{v}" for k, v in sorted(histogram.items())),
    ]
    return "\n".join(parts)


def cmd_gen_data(args) -> int:
    rng = np.random.default_rng(_seed_from(args))
    if args.task == "copy":
        if args.len is None or args.vocab is None or args.count is None:
            raise ConfigError("copy generation needs --len, --vocab, and --count")
        low, high = _parse_range(args.len)
        dataset = gen_copy_dataset(args.count, low, high, args.vocab, rng)
    elif args.task == "copy-grid":
        if args.max_len is None or args.per_cell is None:
            raise ConfigError("grid generation needs --max-len and --per-cell")
        max_unique = args.max_unique if args.max_unique is not None else args.max_len
        dataset = gen_eval_grid_dataset(args.max_len, max_unique, args.per_cell, rng)
    elif args.task == "prop":
        if args.aps is None or args.size is None or args.count is None:
            raise ConfigError("prop generation needs --aps, --size, and --count")
        dataset = gen_prop_dataset(args.count, args.aps, args.size, rng)
    elif args.task == "ltl":
        if args.input is None:
            raise ConfigError("ltl ingestion needs --in")
        dataset = ingest_ltl_corpus(args.input, fmt=args.format)
    else:
        raise ConfigError(f"unknown task: {args.task!r}")
    save_dataset(dataset, args.out)
    print(_dataset_summary(dataset))
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    file_values = load_config_file(args.config) if args.config else None
    overrides: dict = {}
    for key, value in [
        ("steps", args.steps),
        ("batch_size", args.batch),
        ("seed", args.seed),
        ("train_data", getattr(args, "data", None)),
        ("loss", args.loss),
        ("method", args.method),
        ("d_beta", args.d_beta),
        ("vocab_m", args.vocab),
        ("peak_lr", args.peak_lr),
        ("warmup", args.warmup),
        ("checkpoint_interval", args.checkpoint_interval),
    ]:
        if value is not None:
            overrides[key] = value
    if args.baseline is not None:
        overrides["embedding_mode"] = args.baseline
    for name in args.ablate or []:
        if name == "f_bn":
            overrides["block_normalize"] = False
        elif name == "f_fn":
            overrides["feature_normalize"] = False
        else:
            raise ConfigError(f"unknown ablation: {name!r} (have f_bn, f_fn)")
    config = resolve_run_config(args.preset, file_values, overrides)
    if config.train_data is None:
        raise ConfigError("no training data given (--data or train_data in the config)")
    dataset = load_dataset(config.train_data)
    out_dir = Path(args.out if args.out is not None else config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, vocab, result = train_model(
        config,
        dataset,
        log_path=out_dir / "train-log.csv",
        checkpoint_path=out_dir / "checkpoint.ckpt",
        timestamp=not args.no_timestamp,
    )
    print(f"trained {result.steps} steps, final loss {result.final_loss:.6f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return 0


def _parse_selection(text: str):
    if text.startswith("median"):
        rest = text[len("median"):]
        if not rest.isdigit():
            raise ConfigError(f"expected medianK, got {text!r}")
        return MedianCandidates(int(rest))
    if text.startswith("average:"):
        rest = text[len("average:"):]
        if not rest.isdigit():
            raise ConfigError(f"expected average:R, got {text!r}")
        return AverageRepeats(int(rest))
    raise ConfigError(f"unknown embedding selection: {text!r}")


def _load_frozen(args, rng):
    bundle = load_checkpoint(args.checkpoint)
    _maybe_extend(bundle, args)
    if bundle.model.embedding.mode != INFERENCE:
        bundle.model.embedding.freeze(rng)
    bundle.model.eval()
    return bundle


def _maybe_extend(bundle, args):
    new_m = getattr(args, "extend_vocab", None)
    if new_m is not None:
        bundle.model, bundle.vocab = extend_model_vocab(bundle.model, bundle.vocab, new_m)


def _eval_arity(bundle):
    task = bundle.meta.get("task")
    if bundle.model.config.encoder_pos == "tree":
        if task not in TREE_TASKS:
            raise ConfigError(f"checkpoint has a tree encoder but task {task!r}")
        return task_arity_map(task, bundle.vocab)
    return None


def cmd_eval(args) -> int:
    rng = np.random.default_rng(_seed_from(args))
    torch.manual_seed(_seed_from(args))
    dataset = load_dataset(args.data)
    bundle = load_checkpoint(args.checkpoint)
    _maybe_extend(bundle, args)
    mode = args.mode
    if mode is None:
        mode = {"copy": "grid", "prop": "prop"}.get(bundle.meta.get("task"), "seq")
    if mode == "grid":
        # the grid protocol freezes the embedding per its strategy
        bundle.model.eval()
        region = None
        if args.training_region is not None:
            region = _parse_range(args.training_region)
        grid = run_grid_eval(
            bundle.model,
            bundle.vocab,
            dataset,
            _parse_selection(args.embedding_selection),
            rng,
            max_len=args.max_len,
            training_region=region,
        )
        out = args.out if args.out is not None else "eval-grid.csv"
        write_grid_csv(grid, out, timestamp=not args.no_timestamp)
        print(f"wrote {out} ({len(grid.cells)} cells)")
        return 0
    if bundle.model.embedding.mode != INFERENCE:
        bundle.model.embedding.freeze(rng)
    bundle.model.eval()
    arity = _eval_arity(bundle)
    if mode == "prop":
        report = run_prop_eval(bundle.model, bundle.vocab, dataset, max_len=args.max_len, arity=arity)
    else:
        report = run_seq_eval(bundle.model, bundle.vocab, dataset, max_len=args.max_len, arity=arity)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_alphacov(args) -> int:
    rng = np.random.default_rng(_seed_from(args))
    dataset = load_dataset(args.data)
    bundle = _load_frozen(args, rng)
    if args.variants == "all":
        variants = AllVariants()
    elif args.variants.startswith("random:"):
        rest = args.variants[len("random:"):]
        if not rest.isdigit():
            raise ConfigError(f"expected random:K, got {args.variants!r}")
        variants = RandomVariants(int(rest))
    else:
        raise ConfigError(f"unknown variants mode: {args.variants!r}")
    rows = run_alpha_cov_protocol(
        bundle.model,
        bundle.vocab,
        dataset,
        variants,
        rng,
        max_len=args.max_len,
        arity=_eval_arity(bundle),
    )
    if args.out is not None:
        write_alpha_cov_json(rows, args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(rows, indent=2))
    return 0


def cmd_perturb(args) -> int:
    dataset = load_dataset(args.input)
    save_dataset(perturb_dataset(dataset), args.out)
    print(f"wrote {args.out} ({len(dataset)} samples)")
    return 0


def cmd_bench_randvec(args) -> int:
    rng = np.random.default_rng(_seed_from(args))
    method = RandMethod(args.method, args.d)
    set_size = method.set_size
    if set_size is None:
        raise ConfigError("benchmark needs a finite candidate set (neighbor or hypercube)")
    ms = [int(x) for x in args.m.split(",")]
    print(f"method={args.method} d_beta={args.d} set_size={set_size}")
    print(f"{'m':>10} {'reservoir_ms':>14} {'naive_ms':>12}")
    for m in ms:
        if m > set_size:
            raise ConfigError(f"m={m} exceeds the candidate set ({set_size})")
        times = {}
        for name, fn in [("reservoir", reservoir_sample_unique), ("naive", naive_sample_unique)]:
            start = time.perf_counter()
            for _ in range(args.repeats):
                fn(m, set_size, rng)
            times[name] = (time.perf_counter() - start) / args.repeats * 1000.0
        print(f"{m:>10} {times['reservoir']:>14.3f} {times['naive']:>12.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alpha-embed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None, help="rng seed (fallback: ALPHA_EMBED_SEED, then 0)")

    p = sub.add_parser("gen-data", help="generate or ingest task datasets")
    p.add_argument("--task", required=True, choices=["copy", "copy-grid", "prop", "ltl"])
    p.add_argument("--len", help="copy: inclusive MIN:MAX string length")
    p.add_argument("--vocab", type=int, help="copy: interchangeable vocabulary size")
    p.add_argument("--count", type=int, help="number of samples")
    p.add_argument("--max-len", type=int, help="copy-grid: largest string length")
    p.add_argument("--max-unique", type=int, help="copy-grid: largest unique count (default: --max-len)")
    p.add_argument("--per-cell", type=int, help="copy-grid: samples per (unique, length) cell")
    p.add_argument("--aps", type=int, help="prop: AP pool size")
    p.add_argument("--size", type=int, help="prop: max formula size")
    p.add_argument("--in", dest="input", help="ltl: corpus file to ingest")
    p.add_argument("--format", default="auto", choices=["auto", "jsonl", "tsv"], help="ltl corpus format")
    p.add_argument("--out", required=True)
    add_seed(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model from a config, preset, or flags")
    p.add_argument("--config", help="TOML run config")
    p.add_argument("--preset", help="run preset name")
    p.add_argument("--data", help="training dataset JSONL")
    p.add_argument("--out", help="output directory (default: config out_dir)")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--vocab", type=int, help="interchangeable vocabulary size (vocab_m)")
    p.add_argument("--loss", choices=["adacos", "cross-entropy"])
    p.add_argument("--baseline", choices=["dual", "full-vocab", "alpha-renaming", "shuffle-aps"],
                   help="embedding mode (dual = the proposed method)")
    p.add_argument("--method", choices=["normal", "neighbor", "hypercube"])
    p.add_argument("--d-beta", type=int, dest="d_beta")
    p.add_argument("--peak-lr", type=float, dest="peak_lr")
    p.add_argument("--warmup", type=int)
    p.add_argument("--checkpoint-interval", type=int, dest="checkpoint_interval")
    p.add_argument("--ablate", action="append", help="disable a normalization: f_bn or f_fn")
    p.add_argument("--no-timestamp", action="store_true")
    add_seed(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--grid", dest="mode", action="store_const", const="grid")
    group.add_argument("--seq", dest="mode", action="store_const", const="seq")
    group.add_argument("--prop", dest="mode", action="store_const", const="prop")
    p.add_argument("--embedding-selection", default="average:10",
                   help="grid protocol: average:R or medianK (default average:10)")
    p.add_argument("--training-region", help="grid: U:L bounds recorded in the artifact")
    p.add_argument("--extend-vocab", type=int, dest="extend_vocab",
                   help="grow a dual-part model to this interchangeable count first")
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--out")
    p.add_argument("--no-timestamp", action="store_true")
    add_seed(p)
    p.set_defaults(fn=cmd_eval, mode=None)

    p = sub.add_parser("alphacov", help="renaming-consistency protocol on a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--variants", default="all", help="all or random:K")
    p.add_argument("--extend-vocab", type=int, dest="extend_vocab",
                   help="grow a dual-part model to this interchangeable count first")
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--out")
    add_seed(p)
    p.set_defaults(fn=cmd_alphacov)

    p = sub.add_parser("perturb", help="rewrite a dataset into canonical AP names")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    add_seed(p)
    p.set_defaults(fn=cmd_perturb)

    p = sub.add_parser("bench-randvec", help="time distinct-vector sampling strategies")
    p.add_argument("--method", default="hypercube", choices=["neighbor", "hypercube"])
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--m", default="10,100,1000", help="comma-separated draw counts")
    p.add_argument("--repeats", type=int, default=3)
    add_seed(p)
    p.set_defaults(fn=cmd_bench_randvec)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (NumericError, NormalizationError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except (DataError, ParseError, LengthError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except AlphaEmbedError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
