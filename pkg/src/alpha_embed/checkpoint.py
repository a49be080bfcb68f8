"""Self-describing binary checkpoints.

Layout: magic, an 8-byte little-endian header length, a JSON header with
sorted keys, then the raw C-order little-endian array payloads in header
order.  No timestamps and no pickling, so a checkpoint's bytes depend
only on its content and files written twice compare equal.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .embedding import BaselineEmbedding, DualPartEmbedding
from .errors import DataError
from .model import ModelConfig, Seq2SeqModel
from .randvec import RandMethod
from .vocab import Vocabulary

MAGIC = b"AEMB1\n"

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64}


@dataclass
class CheckpointBundle:
    model: Seq2SeqModel
    vocab: Vocabulary
    meta: dict


def _embedding_spec(emb) -> dict:
    if isinstance(emb, DualPartEmbedding):
        return {
            "kind": "dual",
            "d_alpha": emb.d_alpha,
            "method": emb.method.spec(),
            "block_normalize": emb.block_normalize,
            "feature_normalize": emb.feature_normalize,
            "mode": emb.mode,
        }
    if isinstance(emb, BaselineEmbedding):
        return {
            "kind": "baseline",
            "d_model": emb.d_model,
            "augmentation": emb.augmentation,
            "feature_normalize": emb.feature_normalize,
            "mode": emb.mode,
        }
    raise TypeError(f"unsupported embedding type: {type(emb).__name__}")


def _build_embedding(spec: dict, n: int, m: int):
    # construction draws fresh parameters; the state dict overwrites them
    rng = np.random.default_rng(0)
    if spec["kind"] == "dual":
        emb = DualPartEmbedding(
            n,
            m,
            spec["d_alpha"],
            RandMethod.from_spec(spec["method"]),
            rng,
            block_normalize=spec["block_normalize"],
            feature_normalize=spec["feature_normalize"],
        )
    elif spec["kind"] == "baseline":
        emb = BaselineEmbedding(
            n,
            m,
            spec["d_model"],
            augmentation=spec["augmentation"],
            feature_normalize=spec["feature_normalize"],
        )
    else:
        raise DataError(f"unknown embedding kind: {spec['kind']!r}")
    emb.mode = spec["mode"]
    return emb


def save_checkpoint(path: str | Path, model: Seq2SeqModel, vocab: Vocabulary, meta: dict | None = None):
    arrays = []
    for name, tensor in sorted(model.state_dict().items()):
        arr = tensor.detach().cpu().numpy()
        if arr.dtype.name not in _DTYPES:
            raise DataError(f"cannot serialize dtype {arr.dtype.name} for {name}")
        arrays.append((name, np.ascontiguousarray(arr)))
    header = {
        "arrays": [
            {"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape)}
            for name, arr in arrays
        ],
        "embedding": _embedding_spec(model.embedding),
        "meta": meta or {},
        "model_config": asdict(model.config),
        "vocab": vocab.spec(),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes("C"))


def load_checkpoint(path: str | Path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError(f"not a checkpoint file: {path}")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len))
        state = {}
        for entry in header["arrays"]:
            dtype = _DTYPES.get(entry["dtype"])
            if dtype is None:
                raise DataError(f"unknown dtype in checkpoint: {entry['dtype']}")
            count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
            raw = fh.read(count * np.dtype(dtype).itemsize)
            arr = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).reshape(entry["shape"])
            state[entry["name"]] = torch.from_numpy(arr.astype(dtype, copy=True))
    vocab = Vocabulary.from_spec(header["vocab"])
    emb = _build_embedding(header["embedding"], vocab.n, vocab.m)
    config = ModelConfig(**header["model_config"])
    model = Seq2SeqModel(config, emb)
    model.load_state_dict(state)
    return CheckpointBundle(model, vocab, header.get("meta", {}))
