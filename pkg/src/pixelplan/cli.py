"""Command-line interface: collect, plan, report, inspect-weights.

Configuration comes from a declarative JSON file with ``environment``,
``backend``, ``planner`` and ``extractor`` sections; individual flags
override file values.  Reports are written as JSON plus a CSV mirror.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .frames import FrameDataset
from .harness import ScoreReport, collect_frames, make_extractor, run_benchmark
from .planner import PlannerConfig
from .weights import load_weights

DEFAULT_CONFIG = {
    "environment": {"name": "gridcollect"},
    "backend": "bprost",
    "planner": {},
    "extractor": {},
    "runs": 10,
    "seed": 0,
}


def _load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        with open(path) as fh:
            user = json.load(fh)
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    return cfg


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    if getattr(args, "env", None):
        cfg["environment"] = {"name": args.env}
    if getattr(args, "backend", None):
        cfg["backend"] = args.backend
    if getattr(args, "weights", None):
        cfg["extractor"]["weights"] = args.weights
    if getattr(args, "lam", None) is not None:
        cfg["extractor"]["lambda"] = args.lam
    if getattr(args, "quant_bits", None) is not None:
        cfg["extractor"]["quant_bits"] = args.quant_bits
    if getattr(args, "budget_ms", None) is not None:
        cfg["planner"]["budget_ms"] = args.budget_ms
        cfg["planner"].pop("node_budget", None)
    if getattr(args, "node_budget", None) is not None:
        cfg["planner"]["node_budget"] = args.node_budget
    if getattr(args, "alpha", None) is not None:
        cfg["planner"]["alpha"] = args.alpha
    if getattr(args, "gamma", None) is not None:
        cfg["planner"]["gamma"] = args.gamma
    if getattr(args, "frame_skip", None) is not None:
        cfg["planner"]["frame_skip"] = args.frame_skip
    if getattr(args, "action_cap", None) is not None:
        cfg["planner"]["action_cap"] = args.action_cap
    if getattr(args, "runs", None) is not None:
        cfg["runs"] = args.runs
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _planner_config(section: dict) -> PlannerConfig:
    kwargs = dict(section)
    budget_ms = kwargs.pop("budget_ms", None)
    if budget_ms is not None:
        kwargs["budget_s"] = budget_ms / 1000.0
    return PlannerConfig(**kwargs)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--env", help="environment name override")
    p.add_argument("--backend", choices=["bprost", "neural", "neural-quant", "random"])
    p.add_argument("--weights", help="encoder weight file (neural backends)")
    p.add_argument("--budget-ms", type=int, dest="budget_ms", help="wall-clock budget per step")
    p.add_argument("--node-budget", type=int, dest="node_budget", help="expansion budget per step")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="risk-aversion factor")
    p.add_argument("--gamma", type=float, help="discount")
    p.add_argument("--lambda", type=float, dest="lam", help="feature threshold")
    p.add_argument("--frame-skip", type=int, dest="frame_skip")
    p.add_argument("--action-cap", type=int, dest="action_cap")
    p.add_argument("--out", help="output path")


def cmd_collect(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    planner = _planner_config(cfg["planner"])
    out = args.out or "dataset"
    ds = collect_frames(
        cfg["environment"],
        planner,
        n_frames=args.frames,
        out_path=out,
        seed=cfg["seed"],
        tile=cfg["extractor"].get("tile", 4),
    )
    print(
        f"collected {ds.frame_count} frames from {ds.env_name} -> {out} "
        f"(train {ds.train_count} / val {ds.val_count})"
    )
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    planner = _planner_config(cfg["planner"])
    envs = {cfg["environment"]["name"]: cfg["environment"]}
    report = run_benchmark(
        envs,
        cfg["backend"],
        planner,
        runs=cfg["runs"],
        seed=cfg["seed"],
        weights_path=cfg["extractor"].get("weights"),
        lam=cfg["extractor"].get("lambda"),
        quant_bits=cfg["extractor"].get("quant_bits", 4),
        tile=cfg["extractor"].get("tile", 4),
    )
    out = Path(args.out or "report.json")
    out.write_text(report.to_json())
    out.with_suffix(".csv").write_text(report.to_csv())
    for label in report.episodes:
        print(f"{label}: mean score {report.mean_score(label):.3f} over {report.runs} runs")
    print(f"report written to {out} and {out.with_suffix('.csv')}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report = ScoreReport.from_json(Path(args.report).read_text())
    baselines = {}
    if args.baselines:
        baselines = json.loads(Path(args.baselines).read_text())
    print(f"backend: {report.backend}  runs: {report.runs}  seed: {report.master_seed}")
    for label, records in report.episodes.items():
        line = (
            f"{label:>16}: mean {report.mean_score(label):10.3f}  "
            f"scores {[round(r.score, 2) for r in records]}"
        )
        if label in baselines:
            ref = baselines[label]
            report.add_normalized(label, ref["random"], ref["human"])
            line += f"  normalized {report.normalized[label]:.1f}%"
        print(line)
    if args.out:
        Path(args.out).write_text(report.to_json())
    return 0


def cmd_inspect_weights(args: argparse.Namespace) -> int:
    w = load_weights(args.weights)
    h, wd, c = w.latent_spec
    print(f"file: {args.weights}")
    print(f"model kind: {w.model_kind}")
    print(f"input size: {w.input_size[0]}x{w.input_size[1]}")
    print(f"latent spec: {h}x{wd}x{c} = {w.feature_count} features")
    print(f"default threshold: {w.threshold_default}")
    kinds = {}
    for layer in w.layers:
        kinds[layer["kind"]] = kinds.get(layer["kind"], 0) + 1
    print("layers:", ", ".join(f"{k} x{v}" for k, v in sorted(kinds.items())))
    params = sum(t.size for t in w.tensors.values())
    print(f"tensors: {len(w.tensors)} ({params} parameters)")
    return 0


def cmd_inspect_dataset(args: argparse.Namespace) -> int:
    ds = FrameDataset.load(args.dataset)
    print(
        f"{ds.env_name}: {ds.frame_count} frames at "
        f"{ds.input_size[0]}x{ds.input_size[1]} "
        f"(train {ds.train_count} / val {ds.val_count}), "
        f"{len(ds.episode_starts)} episodes"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixelplan",
        description="Width-based planning over pixel screens",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect a frame dataset with the B-PROST planner")
    _add_common_flags(p)
    p.add_argument("--frames", type=int, default=1000, help="frames to collect")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("plan", help="run seeded planning episodes and report scores")
    _add_common_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("report", help="print a saved report, optionally normalized")
    p.add_argument("report", help="report JSON produced by `plan`")
    p.add_argument("--baselines", help="JSON {env: {random: r, human: h}}")
    p.add_argument("--out", help="write the (possibly normalized) report here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inspect-weights", help="summarize an encoder weight file")
    p.add_argument("weights")
    p.set_defaults(func=cmd_inspect_weights)

    p = sub.add_parser("inspect-dataset", help="summarize a frame dataset")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_inspect_dataset)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
