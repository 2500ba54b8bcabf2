"""Binary checkpoint: magic line, JSON header, then little-endian float64 arrays.

Layout::

    b"VPRSNN1\\n"
    uint64 (little-endian) header length in bytes
    header: UTF-8 JSON, keys sorted
    array payloads, row-major <f8, in header order

The header records each array's name, shape and byte offset into the
payload section, the configuration echo and training metadata. Writing the
same checkpoint twice gives byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assignment import AssignmentTable, assign_standard
from .config import RunConfig
from .errors import CheckpointError

MAGIC = b"VPRSNN1\n"
FORMAT_VERSION = 1
_ARRAYS = ("W", "theta", "S_R", "labels", "omega")


@dataclass
class Checkpoint:
    config: RunConfig
    W: np.ndarray
    theta: np.ndarray
    S_R: np.ndarray
    assignment: AssignmentTable
    epochs_completed: int = 0
    presentations: int = 0

    @property
    def n_labels(self) -> int:
        return self.S_R.shape[1]

    def _arrays(self) -> dict[str, np.ndarray]:
        return {
            "W": self.W,
            "theta": self.theta,
            "S_R": self.S_R,
            "labels": self.assignment.labels.astype(np.float64),
            "omega": self.assignment.omega.astype(np.float64),
        }

    def to_bytes(self) -> bytes:
        arrays = self._arrays()
        specs, payload, offset = [], [], 0
        for name in _ARRAYS:
            a = np.ascontiguousarray(arrays[name], dtype="<f8")
            specs.append({"name": name, "shape": list(a.shape), "offset": offset})
            raw = a.tobytes()
            payload.append(raw)
            offset += len(raw)
        header = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "arrays": specs,
            "meta": {"epochs_completed": self.epochs_completed, "presentations": self.presentations},
        }
        hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return MAGIC + struct.pack("<Q", len(hdr)) + hdr + b"".join(payload)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Checkpoint":
        if not buf.startswith(MAGIC):
            raise CheckpointError("not a checkpoint file (bad magic)")
        pos = len(MAGIC)
        if len(buf) < pos + 8:
            raise CheckpointError("truncated header length")
        (n,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        try:
            header = json.loads(buf[pos:pos + n].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable header: {exc}") from None
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported format version {header.get('format_version')!r}")
        body = pos + n
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = body + spec["offset"]
            if start + 8 * count > len(buf):
                raise CheckpointError(f"array {spec['name']!r} truncated")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8", count=count, offset=start).reshape(shape).astype(np.float64)
        missing = set(_ARRAYS) - set(arrays)
        if missing:
            raise CheckpointError(f"missing arrays: {sorted(missing)}")

        config = RunConfig.from_dict(header["config"])
        W, theta, S = arrays["W"], arrays["theta"], arrays["S_R"]
        if W.shape != (config.n_input, config.run.n_neurons):
            raise CheckpointError(f"W shape {W.shape} does not match config "
                                  f"({config.n_input}, {config.run.n_neurons})")
        if theta.shape != (config.run.n_neurons,) or S.ndim != 2 or S.shape[0] != config.run.n_neurons:
            raise CheckpointError("theta / S_R dimensions do not match the configured neuron count")
        table = assign_standard(S)
        if not (np.array_equal(table.labels, arrays["labels"].astype(np.int64))
                and np.array_equal(table.omega, arrays["omega"].astype(np.int64))):
            raise CheckpointError("stored assignments disagree with the stored spike counts")
        meta = header.get("meta", {})
        return cls(config, W, theta, S, table,
                   int(meta.get("epochs_completed", 0)), int(meta.get("presentations", 0)))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())
