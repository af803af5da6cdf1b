"""Seeded training loop with per-epoch curves and best-checkpoint tracking."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.optim import Adam

from .data import load_dataset
from .losses import elbo_terms
from .model import ConvVae, build_vae

__all__ = ["TrainConfig", "TrainResult", "train"]


@dataclass
class TrainConfig:
    arch: str = "desk"
    latent_channels: int = 20
    kind: str = "bernoulli"
    batch_size: int = 64
    lr: float = 1e-4
    tau: float = 0.5
    beta: float = 1e-4
    epochs: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")


@dataclass
class TrainResult:
    model: ConvVae
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_kl: list[float] = field(default_factory=list)
    train_recon: list[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def curve(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "train_kl": self.train_kl,
            "train_recon": self.train_recon,
            "best_epoch": self.best_epoch,
        }


def _epoch_loss(model: ConvVae, data: torch.Tensor, cfg: TrainConfig, generator) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(data), cfg.batch_size):
            batch = data[start : start + cfg.batch_size]
            recon, kl = elbo_terms(model, batch, tau=cfg.tau, generator=generator)
            total += float(-(recon - cfg.beta * kl)) * len(batch)
    return total / len(data)


def train(dataset_path: str | Path, cfg: TrainConfig) -> TrainResult:
    """Maximize the beta-scaled bound by stochastic gradient ascent.

    Deterministic given the seed (single-process data order, seeded noise).
    Keeps the parameters of the best validation epoch.  Raises on a
    non-finite loss.
    """
    train_x, val_x, _ = load_dataset(dataset_path)
    if len(val_x) == 0:
        raise ValueError("dataset has no validation split")
    torch.manual_seed(cfg.seed)
    model = build_vae(cfg.arch, cfg.latent_channels, cfg.kind)
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    generator = torch.Generator().manual_seed(cfg.seed)
    result = TrainResult(model=model)
    best = float("inf")
    best_state = None
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(train_x), generator=generator)
        running = 0.0
        running_kl = 0.0
        running_recon = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = train_x[order[start : start + cfg.batch_size]]
            recon, kl = elbo_terms(model, batch, tau=cfg.tau, generator=generator)
            loss = -(recon - cfg.beta * kl)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            running += float(loss.detach()) * len(batch)
            running_kl += float(kl.detach()) * len(batch)
            running_recon += float(recon.detach()) * len(batch)
        result.train_loss.append(running / len(train_x))
        result.train_kl.append(running_kl / len(train_x))
        result.train_recon.append(running_recon / len(train_x))
        val = _epoch_loss(model, val_x, cfg, generator)
        result.val_loss.append(val)
        if val < best:
            best = val
            best_state = copy.deepcopy(model.state_dict())
            result.best_epoch = epoch
    if best_state is not None:
        model.load_state_dict(best_state)
    return result
