"""Portable encoder weight container.

Binary layout (all integers little-endian):

====== ======= ==============================================================
offset size    field
====== ======= ==============================================================
0      6       magic ``b"VAEIW\\0"``
6      2       format version, u16 (current: 1)
8      4       manifest byte length, u32
12     n       manifest, UTF-8 JSON (schema below)
--     8 + k   per tensor, in manifest order: blob byte length as u64,
               then C-order float32 data
end    4       CRC32 of the whole blob section (length prefixes included)
====== ======= ==============================================================

Manifest schema::

    {
      "input_size": [H, W],             # expected grayscale input
      "latent_spec": [H, W, C],         # output probability/mean map
      "model_kind": "bernoulli" | "gaussian",
      "feature_layout": "row_major_hwc",
      "threshold_default": 0.9,
      "layers": [
        {"kind": "conv", "in_channels": i, "out_channels": o,
         "kernel": [kh, kw], "stride": s, "padding": p,
         "weight": name, "bias": name},
        {"kind": "batchnorm", "channels": c, "epsilon": 1e-5,
         "gamma": name, "beta": name, "mean": name, "var": name},
        {"kind": "leaky_relu", "slope": 0.01},
        {"kind": "dropout", "p": 0.2},        # identity at inference
        {"kind": "residual_begin"},           # save activation
        {"kind": "residual_end"},             # add saved activation
        {"kind": "sigmoid"}
      ],
      "tensors": [{"name": n, "shape": [...]}, ...]   # blob order
    }

Conv kernels are stored (out_channels, in_channels, kernel_h, kernel_w).
Loading validates the magic, version and CRC, scans tensors for non-finite
values, and propagates shapes from ``input_size`` through every layer so a
malformed file fails eagerly.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["EncoderWeights", "WeightFormatError", "load_weights", "save_weights"]

MAGIC = b"VAEIW\x00"
FORMAT_VERSION = 1

_INFERENCE_KINDS = {
    "conv",
    "batchnorm",
    "leaky_relu",
    "dropout",
    "residual_begin",
    "residual_end",
    "sigmoid",
}


class WeightFormatError(ValueError):
    """Raised for malformed, corrupt or inconsistent weight files."""


@dataclass(frozen=True)
class EncoderWeights:
    """Validated, immutable encoder description ready for inference."""

    input_size: tuple[int, int]
    latent_spec: tuple[int, int, int]
    model_kind: str
    threshold_default: float
    layers: tuple[dict, ...]
    tensors: dict[str, np.ndarray]

    @property
    def feature_count(self) -> int:
        h, w, c = self.latent_spec
        return h * w * c


def _propagate_shapes(
    layers: tuple[dict, ...],
    tensors: dict[str, np.ndarray],
    input_size: tuple[int, int],
) -> tuple[int, int, int]:
    """Walk the layer stack symbolically; returns the output (C, H, W)."""
    shape = (1, input_size[0], input_size[1])
    stack: list[tuple[int, int, int]] = []
    for i, layer in enumerate(layers):
        kind = layer["kind"]
        where = f"layer {i} ({kind})"
        if kind == "conv":
            w = tensors[layer["weight"]]
            b = tensors[layer["bias"]]
            kh, kw = layer["kernel"]
            expect = (layer["out_channels"], layer["in_channels"], kh, kw)
            if w.shape != expect:
                raise WeightFormatError(
                    f"{where}: weight shape {w.shape} != declared {expect}"
                )
            if b.shape != (layer["out_channels"],):
                raise WeightFormatError(f"{where}: bias shape {b.shape}")
            if shape[0] != layer["in_channels"]:
                raise WeightFormatError(
                    f"{where}: input has {shape[0]} channels, "
                    f"layer declares {layer['in_channels']}"
                )
            s, p = layer["stride"], layer["padding"]
            oh = (shape[1] + 2 * p - kh) // s + 1
            ow = (shape[2] + 2 * p - kw) // s + 1
            if oh < 1 or ow < 1:
                raise WeightFormatError(f"{where}: output collapses to {oh}x{ow}")
            shape = (layer["out_channels"], oh, ow)
        elif kind == "batchnorm":
            if shape[0] != layer["channels"]:
                raise WeightFormatError(
                    f"{where}: input has {shape[0]} channels, "
                    f"layer declares {layer['channels']}"
                )
            for key in ("gamma", "beta", "mean", "var"):
                t = tensors[layer[key]]
                if t.shape != (layer["channels"],):
                    raise WeightFormatError(f"{where}: {key} shape {t.shape}")
        elif kind == "residual_begin":
            stack.append(shape)
        elif kind == "residual_end":
            if not stack:
                raise WeightFormatError(f"{where}: no matching residual_begin")
            saved = stack.pop()
            if saved != shape:
                raise WeightFormatError(
                    f"{where}: residual shapes differ, {saved} vs {shape}"
                )
        elif kind in ("leaky_relu", "dropout", "sigmoid"):
            pass
        else:
            raise WeightFormatError(f"{where}: unsupported kind for inference")
    if stack:
        raise WeightFormatError("unclosed residual block")
    return shape


def _validate(
    manifest: dict, tensors: dict[str, np.ndarray]
) -> EncoderWeights:
    try:
        input_size = tuple(int(v) for v in manifest["input_size"])
        latent = tuple(int(v) for v in manifest["latent_spec"])
        model_kind = manifest["model_kind"]
        layers = tuple(manifest["layers"])
    except KeyError as exc:
        raise WeightFormatError(f"manifest missing field {exc}") from None
    if len(input_size) != 2 or len(latent) != 3:
        raise WeightFormatError("input_size must be [H, W], latent_spec [H, W, C]")
    if model_kind not in ("bernoulli", "gaussian"):
        raise WeightFormatError(f"unknown model_kind {model_kind!r}")
    if manifest.get("feature_layout", "row_major_hwc") != "row_major_hwc":
        raise WeightFormatError("unsupported feature layout")
    for layer in layers:
        if layer.get("kind") not in _INFERENCE_KINDS:
            raise WeightFormatError(
                f"layer kind {layer.get('kind')!r} not usable for encoder inference"
            )
        for key in ("weight", "bias", "gamma", "beta", "mean", "var"):
            if key in layer and layer[key] not in tensors:
                raise WeightFormatError(f"layer references unknown tensor {layer[key]!r}")
    for name, arr in tensors.items():
        if not np.isfinite(arr).all():
            raise WeightFormatError(f"tensor {name!r} contains non-finite values")
    out = _propagate_shapes(layers, tensors, input_size)  # type: ignore[arg-type]
    if out != (latent[2], latent[0], latent[1]):
        raise WeightFormatError(
            f"network output {out} (C, H, W) does not match latent_spec {latent}"
        )
    return EncoderWeights(
        input_size=input_size,  # type: ignore[arg-type]
        latent_spec=latent,  # type: ignore[arg-type]
        model_kind=model_kind,
        threshold_default=float(manifest.get("threshold_default", 0.9)),
        layers=layers,
        tensors=tensors,
    )


def load_weights(path: str | Path) -> EncoderWeights:
    """Read and fully validate a weight file."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:6] != MAGIC:
        raise WeightFormatError("bad magic: not a weight file")
    (version,) = struct.unpack_from("<H", raw, 6)
    if version != FORMAT_VERSION:
        raise WeightFormatError(f"unsupported format version {version}")
    (mlen,) = struct.unpack_from("<I", raw, 8)
    if 12 + mlen + 4 > len(raw):
        raise WeightFormatError("truncated manifest")
    try:
        manifest = json.loads(raw[12 : 12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"manifest is not valid JSON: {exc}") from None
    blob = raw[12 + mlen : -4]
    (crc_stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(blob) != crc_stored:
        raise WeightFormatError("blob CRC mismatch: file corrupt")
    tensors: dict[str, np.ndarray] = {}
    pos = 0
    for spec in manifest.get("tensors", ()):
        if pos + 8 > len(blob):
            raise WeightFormatError("truncated tensor section")
        (nbytes,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        if pos + nbytes > len(blob):
            raise WeightFormatError("truncated tensor data")
        shape = tuple(int(v) for v in spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        if nbytes != 4 * count:
            raise WeightFormatError(
                f"tensor {spec['name']!r}: {nbytes} bytes != shape {shape}"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(shape)
        tensors[spec["name"]] = np.ascontiguousarray(arr, dtype=np.float32)
        pos += nbytes
    if pos != len(blob):
        raise WeightFormatError("trailing bytes in blob section")
    return _validate(manifest, tensors)


def save_weights(
    path: str | Path,
    layers: list[dict],
    tensors: dict[str, np.ndarray],
    input_size: tuple[int, int],
    latent_spec: tuple[int, int, int],
    model_kind: str = "bernoulli",
    threshold_default: float = 0.9,
) -> None:
    """Write a weight file; validates the description before writing."""
    names: list[str] = []
    for layer in layers:
        for key in ("weight", "bias", "gamma", "beta", "mean", "var"):
            if key in layer and layer[key] not in names:
                names.append(layer[key])
    for name in tensors:
        if name not in names:
            names.append(name)
    arrays = {n: np.ascontiguousarray(tensors[n], dtype=np.float32) for n in names}
    manifest = {
        "input_size": list(input_size),
        "latent_spec": list(latent_spec),
        "model_kind": model_kind,
        "feature_layout": "row_major_hwc",
        "threshold_default": threshold_default,
        "layers": layers,
        "tensors": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    _validate(manifest, dict(arrays))
    mbytes = json.dumps(manifest).encode("utf-8")
    blob = bytearray()
    for n in names:
        data = arrays[n].tobytes()
        blob += struct.pack("<Q", len(data))
        blob += data
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<I", len(mbytes))
    out += mbytes
    out += blob
    out += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(out))
