"""Checkpoint container: JSON spec header + named little-endian f32 blobs.

Layout:

    bytes 0..15  magic ``SHIFTADAPTCKP\\0\\0\\0``
    bytes 16..19 u32 header length (JSON, UTF-8)
    header JSON  {format_version, model_kind, spec, training_meta, tensors}
    payload      concatenated float32 tensor data in header order

Only floating-point state is serialized (parameters and float buffers such
as normalization running statistics); integer bookkeeping buffers are
restored to their defaults on load, which leaves forward outputs bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import DataError
from .build import build_model
from .spec import NetworkSpec

CHECKPOINT_MAGIC = b"SHIFTADAPTCKP\x00\x00\x00"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A spec plus serialized float32 state and provenance metadata."""

    spec: NetworkSpec
    model_kind: str
    state: dict  # name -> float32 ndarray
    training_meta: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def capture(cls, module: torch.nn.Module, spec: NetworkSpec, model_kind: str,
                training_meta: dict | None = None) -> "Checkpoint":
        state = {}
        for name, tensor in module.state_dict().items():
            if tensor.is_floating_point():
                state[name] = tensor.detach().cpu().numpy().astype("<f4")
        return cls(
            spec=spec,
            model_kind=model_kind,
            state=state,
            training_meta=dict(training_meta or {}),
        )

    def materialize(self) -> torch.nn.Module:
        """Rebuild the module and load the stored state."""
        module = build_model(self.spec, self.model_kind)
        full = module.state_dict()
        for name, arr in self.state.items():
            if name not in full:
                raise DataError(f"checkpoint tensor {name!r} not present in model")
            if tuple(full[name].shape) != arr.shape:
                raise DataError(
                    f"checkpoint tensor {name!r} shape {arr.shape} != model {tuple(full[name].shape)}"
                )
            full[name] = torch.from_numpy(arr.copy())
        module.load_state_dict(full)
        module.eval()
        return module

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tensors = []
        offset = 0
        blobs = []
        for name in sorted(self.state):
            arr = np.ascontiguousarray(self.state[name], dtype="<f4")
            tensors.append(
                {"name": name, "shape": list(arr.shape), "offset": offset,
                 "numel": int(arr.size)}
            )
            blobs.append(arr.tobytes())
            offset += arr.size * 4
        header = json.dumps(
            {
                "format_version": self.format_version,
                "model_kind": self.model_kind,
                "spec": self.spec.to_dict(),
                "training_meta": self.training_meta,
                "tensors": tensors,
            },
            sort_keys=True,
        ).encode("utf-8")
        with path.open("wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for blob in blobs:
                fh.write(blob)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"checkpoint not found: {path}")
        raw = path.read_bytes()
        if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic; not a checkpoint container")
        (header_len,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
        start = len(CHECKPOINT_MAGIC) + 4
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported checkpoint format_version {header.get('format_version')}"
            )
        payload = raw[start + header_len :]
        state = {}
        for entry in header["tensors"]:
            begin = entry["offset"]
            end = begin + entry["numel"] * 4
            if end > len(payload):
                raise DataError(f"{path}: truncated tensor payload for {entry['name']!r}")
            arr = np.frombuffer(payload[begin:end], dtype="<f4").reshape(entry["shape"]).copy()
            state[entry["name"]] = arr
        return cls(
            spec=NetworkSpec.from_dict(header["spec"]),
            model_kind=header["model_kind"],
            state=state,
            training_meta=header.get("training_meta", {}),
        )


def params_digest(state: dict) -> str:
    """Stable content hash of a checkpoint state (order-independent)."""
    import hashlib

    h = hashlib.sha256()
    for name in sorted(state):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(state[name], dtype="<f4").tobytes())
    return h.hexdigest()
