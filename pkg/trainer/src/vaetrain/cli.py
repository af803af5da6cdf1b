"""Command-line interface: train, export, eval-recon."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch
import torch.nn.functional as F

from .data import load_dataset
from .export import export_weights
from .model import build_vae
from .train import TrainConfig, train

ARCH_CHOICES = ["ref15", "ref4", "desk", "tiny"]


def cmd_train(args: argparse.Namespace) -> int:
    cfg = TrainConfig(
        arch=args.arch,
        latent_channels=args.latent_channels,
        kind=args.kind,
        beta=args.beta,
        tau=args.tau,
        epochs=args.epochs,
        seed=args.seed,
        batch_size=args.batch_size,
        lr=args.lr,
    )
    result = train(args.data, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state_dict": result.model.state_dict(),
            "arch": cfg.arch,
            "latent_channels": cfg.latent_channels,
            "kind": cfg.kind,
            "curve": result.curve,
        },
        out,
    )
    if args.export:
        export_weights(result.model, args.export, threshold_default=args.threshold)
        print(f"encoder exported to {args.export}")
    if args.curve_out:
        Path(args.curve_out).write_text(json.dumps(result.curve, indent=1))
    print(
        f"trained {cfg.arch} ({cfg.kind}) for {cfg.epochs} epochs; "
        f"best validation loss {min(result.val_loss):.3f} at epoch {result.best_epoch}; "
        f"checkpoint -> {out}"
    )
    return 0


def _load_checkpoint(path: str):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = build_vae(payload["arch"], payload["latent_channels"], payload["kind"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def cmd_export(args: argparse.Namespace) -> int:
    model = _load_checkpoint(args.checkpoint)
    export_weights(model, args.out, threshold_default=args.threshold)
    print(f"encoder exported to {args.out}")
    return 0


def cmd_eval_recon(args: argparse.Namespace) -> int:
    model = _load_checkpoint(args.weights)
    _, val, _ = load_dataset(args.data)
    frames = val if args.split == "val" else load_dataset(args.data)[0]
    model.eval()
    with torch.no_grad():
        for i in range(len(frames)):
            x = frames[i : i + 1]
            recon = model.decode(model.encode_probs(x) if model.kind == "bernoulli" else model.encode(x)[0])
            bce = F.binary_cross_entropy(
                recon.clamp(1e-7, 1 - 1e-7), x, reduction="sum"
            )
            print(f"frame {i}: bce {float(bce):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaetrain", description="Train and export frame autoencoders"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a VAE on a frame dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--arch", choices=ARCH_CHOICES, default="desk")
    p.add_argument("--latent-channels", type=int, default=20)
    p.add_argument("--kind", choices=["bernoulli", "gaussian"], default="bernoulli")
    p.add_argument("--beta", type=float, default=1e-4)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--out", required=True, help="torch checkpoint output path")
    p.add_argument("--export", help="also export encoder weights here")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--curve-out", help="write the loss curve JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="export a checkpoint's encoder weights")
    p.add_argument("checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval-recon", help="per-image reconstruction BCE")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True, help="torch checkpoint from `train`")
    p.add_argument("--split", choices=["train", "val"], default="val")
    p.set_defaults(func=cmd_eval_recon)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
