"""Deterministic forward inference for exported encoders.

Runs the layer stack described by an :class:`~pixelplan.weights.EncoderWeights`
manifest on a grayscale image and turns the resulting per-latent map into
boolean features, either by thresholding Bernoulli probabilities or by
quantizing Gaussian posterior means into equiprobable bins.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import ndtr

from .features import Extractor, FeatureSet, FeatureSpace
from .frames import screen_to_frame
from .sim import Screen
from .weights import EncoderWeights

__all__ = [
    "conv2d",
    "encode_probs",
    "threshold_features",
    "quantize_features",
    "NeuralExtractor",
    "QuantizedNeuralExtractor",
]

LEAKY_SLOPE_DEFAULT = 0.01
BN_EPS_DEFAULT = 1e-5


def conv2d(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, padding: int = 0
) -> np.ndarray:
    """2-D convolution (cross-correlation) over a (C, H, W) activation.

    Kernels are (out_channels, in_channels, kh, kw); zero padding is applied
    symmetrically.  float32 throughout.
    """
    c_in, h, w_in = x.shape
    out_ch, c_k, kh, kw = w.shape
    if c_k != c_in:
        raise ValueError(f"kernel expects {c_k} channels, input has {c_in}")
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    if x.shape[1] < kh or x.shape[2] < kw:
        raise ValueError("kernel larger than padded input")
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    oh, ow = win.shape[1], win.shape[2]
    col = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c_in * kh * kw)
    out = col.astype(np.float32) @ w.reshape(out_ch, -1).T.astype(np.float32)
    out += b.astype(np.float32)
    return np.ascontiguousarray(out.reshape(oh, ow, out_ch).transpose(2, 0, 1))


def _batchnorm(x, gamma, beta, mean, var, eps):
    inv = 1.0 / np.sqrt(var + eps)
    scale = (gamma * inv).astype(np.float32)
    shift = (beta - mean * gamma * inv).astype(np.float32)
    return x * scale[:, None, None] + shift[:, None, None]


def _leaky_relu(x, slope):
    return np.where(x >= 0, x, np.float32(slope) * x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def encode_probs(weights: EncoderWeights, image: np.ndarray) -> np.ndarray:
    """Forward pass: grayscale (H_in, W_in) image -> latent (H, W, C) map.

    Deterministic: batchnorm uses stored running statistics, dropout is
    identity.  For ``bernoulli`` files the map holds posterior probabilities;
    for ``gaussian`` files it holds posterior means.
    """
    img = np.asarray(image, dtype=np.float32)
    if img.shape != weights.input_size:
        raise ValueError(
            f"image shape {img.shape} does not match declared input "
            f"{weights.input_size}"
        )
    x = img[None, :, :]
    stack: list[np.ndarray] = []
    for layer in weights.layers:
        kind = layer["kind"]
        if kind == "conv":
            x = conv2d(
                x,
                weights.tensors[layer["weight"]],
                weights.tensors[layer["bias"]],
                stride=layer["stride"],
                padding=layer["padding"],
            )
        elif kind == "batchnorm":
            x = _batchnorm(
                x,
                weights.tensors[layer["gamma"]],
                weights.tensors[layer["beta"]],
                weights.tensors[layer["mean"]],
                weights.tensors[layer["var"]],
                layer.get("epsilon", BN_EPS_DEFAULT),
            )
        elif kind == "leaky_relu":
            x = _leaky_relu(x, layer.get("slope", LEAKY_SLOPE_DEFAULT))
        elif kind == "sigmoid":
            x = _sigmoid(x)
        elif kind == "dropout":
            pass
        elif kind == "residual_begin":
            stack.append(x)
        elif kind == "residual_end":
            x = x + stack.pop()
        else:  # unreachable after load-time validation
            raise ValueError(f"unsupported layer kind {kind!r}")
        if not np.isfinite(x).all():
            raise ValueError(f"non-finite activation after {kind} layer")
    return np.ascontiguousarray(x.transpose(1, 2, 0))


def threshold_features(probs: np.ndarray, lam: float = 0.9) -> FeatureSet:
    """Feature ids (flat row-major H, W, C) where prob >= lam (inclusive)."""
    if not 0.0 < lam < 1.0:
        raise ValueError("threshold must lie strictly inside (0, 1)")
    ids = np.flatnonzero(probs.reshape(-1) >= lam)
    return FeatureSet.from_sorted_array(ids)


def quantize_features(means: np.ndarray, bits: int) -> FeatureSet:
    """Bit-code features from Gaussian posterior means.

    Each latent mean falls into one of 2**bits bins of equal probability
    under the standard normal prior; the bin number's bits (most significant
    first) become ``bits`` consecutive boolean features.  Feature count is
    latent_count * bits.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    flat = np.asarray(means, dtype=np.float64).reshape(-1)
    if not np.isfinite(flat).all():
        raise ValueError("non-finite posterior mean")
    levels = 1 << bits
    bins = np.minimum(levels - 1, np.floor(ndtr(flat) * levels).astype(np.int64))
    shifts = np.arange(bits - 1, -1, -1)
    bitmap = (bins[:, None] >> shifts[None, :]) & 1
    ids = np.flatnonzero(bitmap.reshape(-1))
    return FeatureSet.from_sorted_array(ids)


class NeuralExtractor(Extractor):
    """Threshold backend: encoder probabilities >= lambda become features.

    Screens are converted to grayscale frames at the encoder's declared
    input size.  Results are memoized per screen since tree search revisits
    states heavily.
    """

    def __init__(self, weights: EncoderWeights, lam: float | None = None, cache: bool = True):
        if weights.model_kind != "bernoulli":
            raise ValueError("threshold extraction requires a bernoulli encoder")
        self.weights = weights
        self.lam = weights.threshold_default if lam is None else lam
        if not 0.0 < self.lam < 1.0:
            raise ValueError("threshold must lie strictly inside (0, 1)")
        self.space = FeatureSpace(size=weights.feature_count, descriptor="neural")
        self._cache: dict[bytes, FeatureSet] | None = {} if cache else None

    def _features(self, screen: Screen) -> FeatureSet:
        probs = encode_probs(self.weights, screen_to_frame(screen, self.weights.input_size))
        return threshold_features(probs, self.lam)

    def extract(self, screen: Screen, ctx: Any = None) -> tuple[FeatureSet, Any]:
        if self._cache is None:
            return self._features(screen), None
        key = screen.tobytes()
        feats = self._cache.get(key)
        if feats is None:
            feats = self._features(screen)
            self._cache[key] = feats
        return feats, None


class QuantizedNeuralExtractor(Extractor):
    """Quantization backend for Gaussian encoders: bin codes become features."""

    def __init__(self, weights: EncoderWeights, bits: int = 4, cache: bool = True):
        if weights.model_kind != "gaussian":
            raise ValueError("quantized extraction requires a gaussian encoder")
        if bits not in (4, 6):
            raise ValueError("quantization supports 4 or 6 bits per latent")
        self.weights = weights
        self.bits = bits
        self.space = FeatureSpace(
            size=weights.feature_count * bits, descriptor="neural"
        )
        self._cache: dict[bytes, FeatureSet] | None = {} if cache else None

    def _features(self, screen: Screen) -> FeatureSet:
        means = encode_probs(self.weights, screen_to_frame(screen, self.weights.input_size))
        return quantize_features(means, self.bits)

    def extract(self, screen: Screen, ctx: Any = None) -> tuple[FeatureSet, Any]:
        if self._cache is None:
            return self._features(screen), None
        key = screen.tobytes()
        feats = self._cache.get(key)
        if feats is None:
            feats = self._features(screen)
            self._cache[key] = feats
        return feats, None
