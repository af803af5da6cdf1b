"""Objective terms: relaxed sampling, closed-form KL, and the scaled bound.

The training objective maximizes the reconstruction term minus beta times
the KL to the prior; ``elbo_terms`` returns both pieces so callers can form
either the bound or the loss.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

__all__ = [
    "gumbel_softmax_sample",
    "reparam_gaussian",
    "bernoulli_kl",
    "gaussian_kl",
    "elbo_terms",
]

_EPS = 1e-7


def gumbel_softmax_sample(
    logits: torch.Tensor,
    tau: float,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Binary Gumbel-Softmax relaxation: sigmoid((logits + g1 - g0) / tau).

    ``noise`` is the Gumbel difference g1 - g0; pass it explicitly to freeze
    the randomness (finite-difference checks), otherwise it is drawn from
    two independent Gumbel(0, 1) variables.  As tau -> 0 the sample sharpens
    to the indicator of logits + noise > 0.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if noise is None:
        u = torch.rand(
            (2,) + tuple(logits.shape), generator=generator, dtype=logits.dtype
        ).clamp(_EPS, 1.0 - _EPS)
        g = -torch.log(-torch.log(u))
        noise = g[1] - g[0]
    return torch.sigmoid((logits + noise) / tau)


def reparam_gaussian(
    mean: torch.Tensor,
    std: torch.Tensor,
    eps: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Pathwise Gaussian sample: std * eps + mean with eps ~ N(0, 1)."""
    if eps is None:
        eps = torch.empty_like(mean).normal_(generator=generator)
    return std * eps + mean


def bernoulli_kl(q: torch.Tensor, prior_mu: float = 0.5) -> torch.Tensor:
    """Elementwise KL(Bernoulli(q) || Bernoulli(prior_mu)), closed form."""
    q = q.clamp(_EPS, 1.0 - _EPS)
    return q * torch.log(q / prior_mu) + (1.0 - q) * torch.log(
        (1.0 - q) / (1.0 - prior_mu)
    )


def gaussian_kl(mean: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Elementwise KL(N(mean, var) || N(0, 1)), closed form."""
    return 0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar)


def elbo_terms(
    model,
    batch: torch.Tensor,
    tau: float = 0.5,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Single-sample (recon_term, kl_term), each averaged over the batch.

    recon_term is the negative binary cross-entropy summed over pixels
    (zero for a perfect reconstruction of a binary image); kl_term is the
    closed-form KL summed over latents.  The training loss is
    ``-(recon_term - beta * kl_term)``.
    """
    if model.kind == "bernoulli":
        logits = model.encode(batch)
        q = torch.sigmoid(logits)
        z = gumbel_softmax_sample(logits, tau, noise=noise, generator=generator)
        kl = bernoulli_kl(q, model.prior_mu).sum(dim=(1, 2, 3))
    else:
        mean, logvar = model.encode(batch)
        std = torch.exp(0.5 * logvar)
        z = reparam_gaussian(mean, std, eps=noise, generator=generator)
        kl = gaussian_kl(mean, logvar).sum(dim=(1, 2, 3))
    recon = model.decode(z).clamp(_EPS, 1.0 - _EPS)
    bce = F.binary_cross_entropy(recon, batch, reduction="none").sum(dim=(1, 2, 3))
    if not torch.isfinite(bce).all() or not torch.isfinite(kl).all():
        raise FloatingPointError("non-finite objective term (training diverged)")
    return -bce.mean(), kl.mean()
