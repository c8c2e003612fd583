"""Versioned training checkpoints.

Binary layout, all integers little-endian::

    b"SARSCKPT" | u16 format version | u32 header length | header | payload

The header is UTF-8 JSON with sorted keys. It holds the schema tag, every
scalar field and the name, shape and byte offset of each array. The payload
is the arrays as contiguous little-endian float64. Python's shortest-repr
float formatting keeps scalars lossless, so save -> load -> save returns the
same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .policy import PolicyParams, RunningStats

MAGIC = b"SARSCKPT"
FORMAT_VERSION = 1
SCHEMA = "safe_ars.checkpoint/1"
_ARRAYS = ("weights", "stats_mean", "stats_m2")
_SCALARS = ("iteration", "lam", "alpha", "nu", "seed", "rng_cursor", "action_low",
            "action_high", "bias", "config_hash", "stats_count")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    iteration: int
    weights: np.ndarray
    stats: RunningStats
    lam: float
    alpha: float
    nu: float
    seed: int
    action_low: float = -0.2
    action_high: float = 0.0
    bias: bool = True
    config_hash: str = ""
    version: int = field(default=FORMAT_VERSION)

    @property
    def rng_cursor(self) -> int:
        # all random streams are keyed by iteration, so the cursor is the
        # index of the next iteration to run
        return self.iteration

    def policy(self) -> PolicyParams:
        return PolicyParams(self.weights, self.action_low, self.action_high, self.bias)

    def replace(self, **changes) -> "Checkpoint":
        return replace(self, **changes)

    def _fields(self) -> dict:
        return {
            "iteration": int(self.iteration),
            "lam": float(self.lam),
            "alpha": float(self.alpha),
            "nu": float(self.nu),
            "seed": int(self.seed),
            "rng_cursor": int(self.rng_cursor),
            "action_low": float(self.action_low),
            "action_high": float(self.action_high),
            "bias": bool(self.bias),
            "config_hash": str(self.config_hash),
            "stats_count": int(self.stats.count),
        }

    def _arrays(self) -> dict[str, np.ndarray]:
        return {
            "weights": np.asarray(self.weights, dtype=float),
            "stats_mean": np.asarray(self.stats.mean, dtype=float),
            "stats_m2": np.asarray(self.stats.m2, dtype=float),
        }

    def to_bytes(self) -> bytes:
        arrays = self._arrays()
        layout, offset = [], 0
        for name in _ARRAYS:
            a = arrays[name]
            layout.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += a.size * 8
        header = {"schema": SCHEMA, "fields": self._fields(), "arrays": layout,
                  "dtype": "<f8"}
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        payload = b"".join(arrays[n].astype("<f8").tobytes(order="C") for n in _ARRAYS)
        return MAGIC + struct.pack("<HI", FORMAT_VERSION, len(hbytes)) + hbytes + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:8] != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        try:
            version, hlen = struct.unpack("<HI", data[8:14])
        except struct.error as exc:
            raise CheckpointError("truncated checkpoint header") from exc
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(data[14:14 + hlen].decode("utf-8"))
        if header.get("schema") != SCHEMA:
            raise CheckpointError(f"unexpected schema tag {header.get('schema')!r}")
        payload = data[14 + hlen:]
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            chunk = payload[start:start + 8 * n]
            if len(chunk) != 8 * n:
                raise CheckpointError(f"truncated array {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(float)
        return cls._build(header["fields"], arrays)

    @classmethod
    def _build(cls, f: dict, arrays: dict) -> "Checkpoint":
        missing = set(_SCALARS) - f.keys()
        if missing:
            raise CheckpointError(f"checkpoint lacks fields {sorted(missing)}")
        if f["rng_cursor"] != f["iteration"]:
            raise CheckpointError("rng cursor does not match the iteration counter")
        stats = RunningStats(f["stats_count"], arrays["stats_mean"], arrays["stats_m2"])
        return cls(
            iteration=f["iteration"], weights=arrays["weights"], stats=stats,
            lam=f["lam"], alpha=f["alpha"], nu=f["nu"], seed=f["seed"],
            action_low=f["action_low"], action_high=f["action_high"], bias=f["bias"],
            config_hash=f["config_hash"],
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())

    def to_json(self) -> str:
        """Lossless text form for debugging: floats keep their shortest repr."""
        doc = {"schema": SCHEMA, "version": FORMAT_VERSION, "fields": self._fields(),
               "arrays": {n: {"shape": list(a.shape), "data": a.ravel().tolist()}
                          for n, a in self._arrays().items()}}
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Checkpoint":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise CheckpointError(f"unexpected schema tag {doc.get('schema')!r}")
        arrays = {n: np.array(v["data"], dtype=float).reshape(v["shape"])
                  for n, v in doc["arrays"].items()}
        return cls._build(doc["fields"], arrays)

    def equals(self, other: "Checkpoint") -> bool:
        return self.to_bytes() == other.to_bytes()
