"""Orchestration: frame collection, seeded benchmarks, score reports.

Per-run seeds derive from the master seed by the documented splitting rule
``run_seed = master * 1_000_003 + run_index`` so parallel runs reproduce.
"""

from __future__ import annotations

import csv
import io
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .bprost import BprostConfig, BprostExtractor
from .features import Extractor
from .frames import FrameDataset, screen_to_frame, write_frame
from .neural import NeuralExtractor, QuantizedNeuralExtractor
from .planner import (
    EpisodeRecord,
    PlannerConfig,
    partial_cache_advance,
    rollout_iw_plan,
    run_episode,
)
from .sim import make_env, sim_reset, sim_step
from .weights import load_weights

__all__ = [
    "BACKENDS",
    "make_extractor",
    "collect_frames",
    "run_benchmark",
    "normalize_score",
    "ScoreReport",
    "derive_seed",
]

BACKENDS = ("bprost", "neural", "neural-quant", "random")


def derive_seed(master: int, run_index: int) -> int:
    return master * 1_000_003 + run_index


def make_extractor(
    backend: str,
    env_config: Mapping[str, Any],
    weights_path: str | Path | None = None,
    lam: float | None = None,
    quant_bits: int = 4,
    tile: int = 4,
) -> Extractor | None:
    """Build the feature backend for an environment (None = random actions)."""
    if backend == "random":
        return None
    if backend == "bprost":
        _, screen = sim_reset(env_config)
        return BprostExtractor(BprostConfig.for_screen(screen, tile, tile))
    if backend in ("neural", "neural-quant"):
        if weights_path is None:
            raise ValueError(f"backend {backend!r} requires a weight file")
        weights = load_weights(weights_path)
        if backend == "neural":
            return NeuralExtractor(weights, lam)
        return QuantizedNeuralExtractor(weights, bits=quant_bits)
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def collect_frames(
    env_config: Mapping[str, Any],
    cfg: PlannerConfig,
    n_frames: int,
    out_path: str | Path,
    seed: int = 0,
    input_size: tuple[int, int] | None = None,
    tile: int = 4,
    vary_env_seed: bool = False,
) -> FrameDataset:
    """Bootstrap a frame dataset by planning with the B-PROST backend.

    The preprocessed screen of every executed decision point is stored until
    ``n_frames`` are on disk; episodes restart (with fresh derived seeds) as
    needed.  With ``vary_env_seed`` each episode offsets the environment's
    own seed so level layouts vary across the dataset.  The index records
    the 95/5 train/validation split, episode boundaries, and the feature
    count the planner saw at each frame.
    """
    if n_frames < 2:
        raise ValueError("need at least 2 frames for a train/validation split")
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(env_config)
    _, screen0 = sim_reset(env)
    size = input_size if input_size is not None else (screen0.height, screen0.width)
    extractor = BprostExtractor(BprostConfig.for_screen(screen0, tile, tile))
    ds = FrameDataset(
        root=out,
        env_name=env.name,
        input_size=size,
        palette_size=screen0.palette_size,
    )
    episode = 0
    while ds.frame_count < n_frames:
        rng = random.Random(derive_seed(seed, episode))
        if vary_env_seed:
            varied = dict(env_config)
            varied["seed"] = int(env_config.get("seed", 0)) + episode
            env = make_env(varied)
        state, screen = sim_reset(env)
        ds.episode_starts.append(ds.frame_count)
        cached = None
        prev_ctx = None
        actions = 0
        while not state.terminal and actions < cfg.action_cap and ds.frame_count < n_frames:
            feats, _ = extractor.extract(screen, prev_ctx)
            name = f"frame_{ds.frame_count:05d}.bin"
            write_frame(out / name, screen_to_frame(screen, size))
            ds.frames.append(name)
            ds.feature_counts.append(len(feats))
            action, tree = rollout_iw_plan(
                state, extractor, cfg, cached_tree=cached, rng=rng, root_ctx=prev_ctx
            )
            prev_ctx = tree.ctx
            if cfg.cache_subtree and tree.children[action] is not None:
                cached = partial_cache_advance(tree, action)
            else:
                cached = None
            state, res = sim_step(state, action, cfg.skip_config)
            screen = res.screen
            actions += 1
        episode += 1
    ds.save_index()
    return ds


def normalize_score(score: float, random_score: float, human_score: float) -> float:
    """Percentage scale anchored at random play (0) and human play (100)."""
    denom = human_score - random_score
    if denom == 0:
        raise ZeroDivisionError("human and random reference scores are equal")
    return 100.0 * (score - random_score) / denom


@dataclass
class ScoreReport:
    """Per-environment episode records with aggregate scores."""

    backend: str
    runs: int
    master_seed: int
    episodes: dict[str, list[EpisodeRecord]] = field(default_factory=dict)
    normalized: dict[str, float] = field(default_factory=dict)

    def scores(self, env_label: str) -> list[float]:
        return [r.score for r in self.episodes[env_label]]

    def mean_score(self, env_label: str) -> float:
        scores = self.scores(env_label)
        return sum(scores) / len(scores)

    def add_normalized(self, env_label: str, random_score: float, human_score: float) -> None:
        self.normalized[env_label] = normalize_score(
            self.mean_score(env_label), random_score, human_score
        )

    def to_json(self) -> str:
        payload = {
            "backend": self.backend,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "envs": {
                label: {
                    "mean": self.mean_score(label),
                    "scores": self.scores(label),
                    "records": [
                        {
                            "env": r.env,
                            "backend": r.backend,
                            "seed": r.seed,
                            "score": r.score,
                            "actions": r.actions,
                            "expanded_per_step": r.expanded_per_step,
                            "depth_per_step": r.depth_per_step,
                            "wall_time": r.wall_time,
                        }
                        for r in records
                    ],
                }
                for label, records in self.episodes.items()
            },
            "normalized": self.normalized,
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ScoreReport":
        payload = json.loads(text)
        report = cls(
            backend=payload["backend"],
            runs=payload["runs"],
            master_seed=payload["master_seed"],
            normalized=dict(payload.get("normalized", {})),
        )
        for label, entry in payload["envs"].items():
            records = [
                EpisodeRecord(
                    env=r["env"],
                    backend=r["backend"],
                    seed=r["seed"],
                    score=r["score"],
                    actions=r["actions"],
                    expanded_per_step=list(r["expanded_per_step"]),
                    depth_per_step=list(r["depth_per_step"]),
                    wall_time=r["wall_time"],
                )
                for r in entry["records"]
            ]
            report.episodes[label] = records
        return report

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["env", "backend", "seed", "score", "actions", "mean_expanded", "mean_depth"]
        )
        for label, records in self.episodes.items():
            for r in records:
                writer.writerow(
                    [label, r.backend, r.seed, r.score, r.actions,
                     f"{r.mean_expanded:.3f}", f"{r.mean_depth:.3f}"]
                )
        return buf.getvalue()


def run_benchmark(
    env_configs: Mapping[str, Mapping[str, Any]],
    backend: str,
    cfg: PlannerConfig,
    runs: int = 10,
    seed: int = 0,
    weights_path: str | Path | None = None,
    lam: float | None = None,
    quant_bits: int = 4,
    tile: int = 4,
) -> ScoreReport:
    """R seeded episodes per environment; deterministic in node-budget mode."""
    report = ScoreReport(backend=backend, runs=runs, master_seed=seed)
    for label, env_config in env_configs.items():
        extractor = make_extractor(
            backend, env_config, weights_path=weights_path, lam=lam,
            quant_bits=quant_bits, tile=tile,
        )
        records = []
        for i in range(runs):
            records.append(
                run_episode(
                    env_config, extractor, cfg,
                    seed=derive_seed(seed, i), backend=backend,
                )
            )
        report.episodes[label] = records
    return report
