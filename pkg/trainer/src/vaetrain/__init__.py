"""VAE trainer for frame datasets with portable encoder export."""

from pathlib import Path

from .model import ConvVae, ResidualBlock, build_vae
from .losses import (
    bernoulli_kl,
    elbo_terms,
    gaussian_kl,
    gumbel_softmax_sample,
    reparam_gaussian,
)
from .data import load_dataset, read_frame
from .train import TrainConfig, TrainResult, train
from .export import export_weights, encoder_manifest

__version__ = "0.1.0"


def train_and_export(
    dataset_path,
    out_path,
    arch: str = "desk",
    latent_channels: int = 20,
    kind: str = "bernoulli",
    beta: float = 1e-4,
    tau: float = 0.5,
    epochs: int = 20,
    seed: int = 0,
    threshold_default: float = 0.9,
) -> TrainResult:
    """Train on a collected dataset and export the encoder in one call."""
    cfg = TrainConfig(
        arch=arch,
        latent_channels=latent_channels,
        kind=kind,
        beta=beta,
        tau=tau,
        epochs=epochs,
        seed=seed,
    )
    result = train(dataset_path, cfg)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    export_weights(result.model, out_path, threshold_default=threshold_default)
    return result
