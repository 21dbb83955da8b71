"""Checkpoint container for model parameters.

Layout: magic "SSVC", u32 format version, u32-length-prefixed JSON header
holding the config (and optionally the vocabulary token list), u32
parameter count, then per parameter in sorted name order:
u32 name length + name bytes + u32 rank + u32 dims + little-endian
float64 data. Round trips are byte-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .data import FormatError, _Reader
from .model import SsvcConfig, SsvcParams

MAGIC = b"SSVC"
VERSION = 1


def checkpoint_save(path, config: SsvcConfig, params: SsvcParams, vocab_tokens=None):
    named = params.named_tensors()
    header = json.dumps(
        {"config": config.to_dict(), "vocab": list(vocab_tokens) if vocab_tokens is not None else None},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(named)))
        for name in sorted(named):
            data = named[name].data
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def checkpoint_load(path, expected_config: SsvcConfig | None = None):
    """Read a checkpoint back into a fresh SsvcParams.

    Returns (config, params, vocab_tokens). When expected_config is given,
    every mismatched field is reported by name.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    header_len = r.u32("header length")
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt checkpoint header ({exc})") from None
    config = SsvcConfig.from_dict(header["config"])
    vocab_tokens = header.get("vocab")

    if expected_config is not None:
        mismatched = [
            name for name in config.to_dict()
            if getattr(config, name) != getattr(expected_config, name)
        ]
        if mismatched:
            raise FormatError(
                "checkpoint config mismatch in field(s): " + ", ".join(sorted(mismatched))
            )

    count = r.u32("parameter count")
    stored = {}
    for _ in range(count):
        name_len = r.u32("parameter name length")
        name = r.take(name_len, "parameter name").decode("utf-8")
        rank = r.u32(f"rank of {name!r}")
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank, f"shape of {name!r}"))
        n_values = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = r.take(8 * n_values, f"data of {name!r}")
        stored[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if r.pos != len(blob):
        raise FormatError(f"trailing garbage after byte {r.pos}")

    params = SsvcParams(config)
    named = params.named_tensors()
    missing = sorted(set(named) - set(stored))
    extra = sorted(set(stored) - set(named))
    if missing or extra:
        raise FormatError(f"parameter name mismatch: missing {missing}, unexpected {extra}")
    for name, tensor in named.items():
        if stored[name].shape != tensor.data.shape:
            raise FormatError(
                f"parameter {name!r} has shape {stored[name].shape}, expected {tensor.data.shape}"
            )
        tensor.data = stored[name]
    return config, params, vocab_tokens
