"""Content-addressed caching and deterministic artifact files.

All artifacts use one container format: a magic line, a length-prefixed
JSON header (sorted keys), then the raw C-order bytes of each array in
header order.  The writer introduces no timestamps or platform state, so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .grid import CONTROLS
from .planner import Policy, ValueTable
from .stp import StpTable

MAGIC = b"HGC1\n"

ENV_CACHE_DIR = "HAZARDGRID_CACHE_DIR"


def content_key(payload: dict) -> str:
    """sha256 over the canonical JSON encoding of a payload of plain data."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def cache_dir(default: Path) -> Path:
    """Cache root: the HAZARDGRID_CACHE_DIR env var, or the given default."""
    env = os.environ.get(ENV_CACHE_DIR)
    return Path(env) if env else default


def write_arrays(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        entries.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(">Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_arrays(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise InputError(f"{path} is not a hazardgrid artifact")
        (header_len,) = struct.unpack(">Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode())
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * dtype.itemsize)
            arrays[entry["name"]] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
    return header["meta"], arrays


def save_episodes(path, states: np.ndarray, meta: dict) -> None:
    """Episode cache: header (dimensions, E, seed, model hash) plus
    bit-packed states."""
    e, steps, h, w = states.shape
    meta = dict(meta)
    meta.update({"episodes": e, "steps": steps, "height": h, "width": w})
    write_arrays(path, meta, {"packed": np.packbits(states.reshape(-1))})


def load_episodes(path) -> tuple[dict, np.ndarray]:
    meta, arrays = read_arrays(path)
    e, steps, h, w = (meta[k] for k in ("episodes", "steps", "height", "width"))
    total = e * steps * h * w
    bits = np.unpackbits(arrays["packed"], count=total).astype(bool)
    return meta, bits.reshape(e, steps, h, w)


def save_table(path, table: StpTable, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta.update(
        {
            "kind": "stp_table",
            "horizon": table.horizon,
            "episodes": table.episodes,
            "master_seed": table.master_seed,
        }
    )
    write_arrays(
        path,
        meta,
        {
            "c_prev": table.c_prev,
            "c_hit": table.c_hit,
            "valid": table.valid,
        },
    )


def load_table(path) -> tuple[dict, StpTable]:
    meta, arrays = read_arrays(path)
    if meta.get("kind") != "stp_table":
        raise InputError(f"{path} is not an stp table artifact")
    table = StpTable(
        horizon=int(meta["horizon"]),
        episodes=int(meta["episodes"]),
        master_seed=int(meta["master_seed"]),
        c_prev=arrays["c_prev"],
        c_hit=arrays["c_hit"],
        valid=arrays["valid"],
    )
    return meta, table


def save_policy(path, policy: Policy, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta.update({"kind": "policy", "horizon": policy.horizon, "controls": list(CONTROLS)})
    write_arrays(path, meta, {"actions": policy.actions, "values": policy.values})


def load_policy(path) -> tuple[dict, ValueTable, Policy]:
    meta, arrays = read_arrays(path)
    if meta.get("kind") != "policy":
        raise InputError(f"{path} is not a policy artifact")
    horizon = int(meta["horizon"])
    values = arrays["values"]
    policy = Policy(horizon=horizon, actions=arrays["actions"], values=values)
    return meta, ValueTable(horizon=horizon, values=values), policy
