"""Encoder export in the portable weight-file format.

Layout (little-endian): magic ``VAEIW\\0``, format version u16, u32-length-
prefixed UTF-8 JSON manifest, then one u64-length-prefixed C-order float32
blob per tensor in manifest order, closed by a CRC32 of the whole blob
section (length prefixes included).  The manifest declares input size,
latent spec, model kind, the inference layer stack, and the tensor table.

Only the encoder is exported: convolutions (Gaussian heads keep just their
mean channels), batchnorm running statistics with their epsilon, leaky-ReLU
slopes, dropout markers (identity at inference) and residual-block
boundaries, plus a final sigmoid for Bernoulli models.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .model import DROPOUT_P, LEAKY_SLOPE, ConvVae, ResidualBlock

__all__ = ["export_weights", "encoder_manifest"]

MAGIC = b"VAEIW\x00"
FORMAT_VERSION = 1


class _Collector:
    def __init__(self):
        self.layers: list[dict] = []
        self.tensors: dict[str, np.ndarray] = {}
        self._n = 0

    def _name(self, suffix: str) -> str:
        name = f"t{self._n:03d}_{suffix}"
        self._n += 1
        return name

    def add_tensor(self, suffix: str, value: torch.Tensor) -> str:
        name = self._name(suffix)
        self.tensors[name] = value.detach().cpu().numpy().astype(np.float32)
        return name

    def conv(self, module: nn.Conv2d, slice_out: int | None = None) -> None:
        weight = module.weight
        bias = module.bias
        out_ch = module.out_channels
        if slice_out is not None:
            weight = weight[:slice_out]
            bias = bias[:slice_out]
            out_ch = slice_out
        self.layers.append(
            {
                "kind": "conv",
                "in_channels": module.in_channels,
                "out_channels": out_ch,
                "kernel": list(module.kernel_size),
                "stride": module.stride[0],
                "padding": module.padding[0],
                "weight": self.add_tensor("conv_w", weight),
                "bias": self.add_tensor("conv_b", bias),
            }
        )

    def batchnorm(self, module: nn.BatchNorm2d) -> None:
        self.layers.append(
            {
                "kind": "batchnorm",
                "channels": module.num_features,
                "epsilon": module.eps,
                "gamma": self.add_tensor("bn_g", module.weight),
                "beta": self.add_tensor("bn_b", module.bias),
                "mean": self.add_tensor("bn_m", module.running_mean),
                "var": self.add_tensor("bn_v", module.running_var),
            }
        )

    def simple(self, kind: str, **params) -> None:
        self.layers.append({"kind": kind, **params})

    def residual(self, block: ResidualBlock) -> None:
        self.simple("residual_begin")
        self.batchnorm(block.bn1)
        self.simple("leaky_relu", slope=LEAKY_SLOPE)
        self.conv(block.conv1)
        self.simple("dropout", p=DROPOUT_P)
        self.batchnorm(block.bn2)
        self.simple("leaky_relu", slope=LEAKY_SLOPE)
        self.conv(block.conv2)
        self.simple("dropout", p=DROPOUT_P)
        self.simple("residual_end")
        self.simple("leaky_relu", slope=LEAKY_SLOPE)


def encoder_manifest(model: ConvVae, threshold_default: float = 0.9):
    """(manifest dict, tensor table) describing the model's inference path."""
    col = _Collector()
    modules = list(model.encoder)
    for i, module in enumerate(modules):
        final = i == len(modules) - 1
        if isinstance(module, nn.Conv2d):
            if final and model.kind == "gaussian":
                col.conv(module, slice_out=model.latent_channels)
            else:
                col.conv(module)
        elif isinstance(module, ResidualBlock):
            col.residual(module)
        elif isinstance(module, nn.LeakyReLU):
            col.simple("leaky_relu", slope=module.negative_slope)
        else:
            raise TypeError(f"cannot export encoder module {type(module).__name__}")
    if model.kind == "bernoulli":
        col.simple("sigmoid")
    h, w, c = model.latent_spec
    manifest = {
        "input_size": [model.input_size, model.input_size],
        "latent_spec": [h, w, c],
        "model_kind": model.kind,
        "feature_layout": "row_major_hwc",
        "threshold_default": threshold_default,
        "layers": col.layers,
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in col.tensors.items()
        ],
    }
    return manifest, col.tensors


def export_weights(
    model: ConvVae, path: str | Path, threshold_default: float = 0.9
) -> None:
    """Write the encoder to ``path`` in the portable container format."""
    manifest, tensors = encoder_manifest(model, threshold_default)
    mbytes = json.dumps(manifest).encode("utf-8")
    blob = bytearray()
    for spec in manifest["tensors"]:
        data = np.ascontiguousarray(tensors[spec["name"]], dtype="<f4").tobytes()
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
