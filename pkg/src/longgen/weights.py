"""Portable weight archives and seeded parameter initialization.

Archive layout: a little-endian uint32 header length, a UTF-8 JSON header
describing every tensor (name, shape, dtype, byte offset) plus an optional
embedded model config, then the packed float32 tensor payload.  The format
is deliberately dumb so other languages can read it with a struct parser.
"""

from __future__ import annotations

import json
import math
import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .config import BLOCK_RECURRENT, ModelConfig
from .errors import CorruptArchiveError, SchemaError
from .ioutil import write_bytes_atomic

_LEN_PREFIX = struct.Struct("<I")
_FORMAT_NAME = "longgen-weights"
_FORMAT_VERSION = 1


def block_name(superblock: int, slot: int) -> str:
    return f"sb{superblock}.blk{slot}"


def tensor_inventory(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) inventory of every tensor the config requires.

    Naming scheme: superblock index, block slot, block kind, tensor role,
    e.g. ``sb0.blk2.local_attention.w_q``.
    """
    d = config.model_dim
    r = config.recurrence_dim
    hd = config.head_dim
    hq = config.num_query_heads
    cw = config.conv_width
    hidden = config.mlp_hidden
    v = config.vocab_size

    inv: list[tuple[str, tuple[int, ...]]] = [("embed.weight", (v, d))]
    slots = len(config.pattern)
    for bi, kind in enumerate(config.block_kinds):
        prefix = block_name(bi // slots, bi % slots)
        inv.append((f"{prefix}.norm_temporal.scale", (d,)))
        if kind == BLOCK_RECURRENT:
            base = f"{prefix}.recurrent"
            inv.extend(
                [
                    (f"{base}.w_gelu", (d, r)),
                    (f"{base}.b_gelu", (r,)),
                    (f"{base}.w_rec", (d, r)),
                    (f"{base}.b_rec", (r,)),
                    (f"{base}.conv_w", (cw, r)),
                    (f"{base}.conv_b", (r,)),
                    (f"{base}.w_decay_gate", (r, r)),
                    (f"{base}.b_decay_gate", (r,)),
                    (f"{base}.w_input_gate", (r, r)),
                    (f"{base}.b_input_gate", (r,)),
                    (f"{base}.decay_raw", (r,)),
                    (f"{base}.w_out", (r, d)),
                    (f"{base}.b_out", (d,)),
                ]
            )
        else:
            base = f"{prefix}.{kind}"
            inv.extend(
                [
                    (f"{base}.w_q", (d, hq * hd)),
                    (f"{base}.w_k", (d, hd)),
                    (f"{base}.w_v", (d, hd)),
                    (f"{base}.w_out", (hq * hd, d)),
                ]
            )
        inv.extend(
            [
                (f"{prefix}.norm_mlp.scale", (d,)),
                (f"{prefix}.mlp.w_gate", (d, hidden)),
                (f"{prefix}.mlp.b_gate", (hidden,)),
                (f"{prefix}.mlp.w_up", (d, hidden)),
                (f"{prefix}.mlp.b_up", (hidden,)),
                (f"{prefix}.mlp.w_down", (hidden, d)),
                (f"{prefix}.mlp.b_down", (d,)),
            ]
        )
    inv.append(("final_norm.scale", (d,)))
    inv.append(("head.weight", (d, v)))
    return inv


class ParameterSet(Mapping):
    """Read-only mapping of tensor name to array; safe to share across threads."""

    def __init__(self, tensors: Mapping[str, np.ndarray]):
        frozen = {}
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            frozen[name] = arr
        self._tensors = frozen

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet({k: v.astype(dtype) for k, v in self._tensors.items()})

    def nbytes(self) -> int:
        return sum(v.nbytes for v in self._tensors.values())


def _inverse_softplus(y: np.ndarray) -> np.ndarray:
    # y > 0; inverse of log(1 + exp(x))
    return np.log(np.expm1(y))


def init_random_weights(config: ModelConfig, seed: int | None = None) -> ParameterSet:
    """Deterministic Gaussian init; float32 tensors in inventory order.

    Per-channel recurrence decays are initialized so that the fully-open gate
    decay exp(-c * softplus(decay_raw)) lands in (0.9, 0.99): long memory,
    strictly inside (0, 1).
    """
    if seed is None:
        seed = config.seed
    rng = np.random.default_rng(seed)
    c = config.recurrence_gate_constant
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_inventory(config):
        role = name.rsplit(".", 1)[-1]
        if role == "scale":
            arr = np.ones(shape, dtype=np.float32)
        elif role.startswith("b_") or role == "conv_b":
            arr = np.zeros(shape, dtype=np.float32)
        elif role == "decay_raw":
            decay = rng.uniform(0.9, 0.99, size=shape)
            arr = _inverse_softplus(-np.log(decay) / c).astype(np.float32)
        elif name == "embed.weight":
            arr = rng.normal(0.0, 1.0, size=shape).astype(np.float32)
        else:
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            arr = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape).astype(np.float32)
        tensors[name] = arr
    return ParameterSet(tensors)


# ---------------------------------------------------------------------------
# Archive pack/unpack.


def pack_weights(params: Mapping[str, np.ndarray], config: ModelConfig | None = None) -> bytes:
    entries = []
    payload = bytearray()
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": "float32",
                "byte_offset": len(payload),
            }
        )
        payload.extend(arr.tobytes())
    header = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "config": config.to_dict() if config is not None else None,
        "tensors": entries,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    return _LEN_PREFIX.pack(len(header_bytes)) + header_bytes + bytes(payload)


def _parse_header(data: bytes) -> tuple[dict, bytes]:
    if len(data) < _LEN_PREFIX.size:
        raise CorruptArchiveError("archive shorter than its length prefix")
    (header_len,) = _LEN_PREFIX.unpack_from(data)
    if len(data) < _LEN_PREFIX.size + header_len:
        raise CorruptArchiveError("archive truncated inside the JSON header")
    try:
        header = json.loads(data[_LEN_PREFIX.size : _LEN_PREFIX.size + header_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptArchiveError(f"archive header is not valid JSON: {exc}") from exc
    if header.get("format") != _FORMAT_NAME:
        raise SchemaError(f"unexpected archive format {header.get('format')!r}")
    return header, data[_LEN_PREFIX.size + header_len :]


def unpack_weights(data: bytes, config: ModelConfig | None = None) -> ParameterSet:
    """Parse and validate an archive; with a config, the tensor inventory must
    match exactly (missing, extra, or misshapen tensors are rejected)."""
    header, payload = _parse_header(data)
    entries = header.get("tensors", [])

    total = 0
    spans = []
    for e in entries:
        if e.get("dtype") != "float32":
            raise SchemaError(f"tensor {e.get('name')!r} has unsupported dtype {e.get('dtype')!r}")
        size = int(np.prod(e["shape"], dtype=np.int64)) * 4 if e["shape"] else 4
        spans.append((int(e["byte_offset"]), size, e["name"]))
        total += size
    spans.sort()
    for (off_a, size_a, name_a), (off_b, _, name_b) in zip(spans, spans[1:]):
        if off_a + size_a > off_b:
            raise CorruptArchiveError(f"tensors {name_a!r} and {name_b!r} overlap")
    if len(payload) != total:
        raise CorruptArchiveError(
            f"payload holds {len(payload)} bytes but tensors declare {total}"
        )

    if config is not None:
        expected = dict(tensor_inventory(config))
        seen = set()
        for e in entries:
            name = e["name"]
            if name in seen:
                raise SchemaError(f"tensor {name!r} appears more than once")
            seen.add(name)
            if name not in expected:
                raise SchemaError(f"unexpected tensor {name!r} not in config inventory")
            if tuple(e["shape"]) != expected[name]:
                raise SchemaError(
                    f"tensor {name!r} has shape {tuple(e['shape'])}, "
                    f"config requires {expected[name]}"
                )
        missing = sorted(set(expected) - seen)
        if missing:
            raise SchemaError(f"archive is missing required tensor {missing[0]!r}")

    tensors = {}
    for e in entries:
        off = int(e["byte_offset"])
        count = int(np.prod(e["shape"], dtype=np.int64)) if e["shape"] else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=off)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float32)
    return ParameterSet(tensors)


def archive_config(data: bytes) -> ModelConfig | None:
    header, _ = _parse_header(data)
    cfg = header.get("config")
    return ModelConfig.from_dict(cfg) if cfg else None


def save_weights(path: str | Path, params: Mapping[str, np.ndarray], config: ModelConfig | None = None) -> None:
    write_bytes_atomic(path, pack_weights(params, config))


def load_weights(path: str | Path, config: ModelConfig | None = None) -> ParameterSet:
    with open(path, "rb") as fh:
        return unpack_weights(fh.read(), config)


def load_archive_config(path: str | Path) -> ModelConfig | None:
    with open(path, "rb") as fh:
        return archive_config(fh.read())
