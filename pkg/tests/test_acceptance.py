"""Acceptance suite: one test per criterion, one PASS line each.

Every tolerance is pinned here.  The suite runs without the trainer package;
the final pipeline test exercises the trained-features path and skips with a
clear message when the trainer is not installed.
"""

import itertools
import math
import random
import time

import numpy as np
import pytest

from helpers import (
    naive_conv2d,
    oracle_iw1,
    sign_test_p,
    write_band_encoder,
)
from pixelplan.bprost import (
    BprostConfig,
    BprostExtractor,
    atari_config,
    bprost_count,
    extract_bprost,
)
from pixelplan.features import FeatureSet, FeatureSpace, RawExtractor
from pixelplan.harness import derive_seed, run_benchmark
from pixelplan.neural import NeuralExtractor, conv2d, quantize_features, threshold_features
from pixelplan.novelty import NoveltyTable
from pixelplan.planner import (
    PlannerConfig,
    backup,
    partial_cache_advance,
    plan_iw,
    rollout_iw_plan,
    run_episode,
)
from pixelplan.sim import Chain, GridCollect, Screen, sim_reset, sim_step, FrameSkipConfig
from pixelplan.weights import EncoderWeights, load_weights

from test_bprost import enumerate_tuples, oracle_extract, random_screen


def report(name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE PASS: {name}" + (f" ({detail})" if detail else ""))


class TestBprostCount:
    def test_atari_reference_total_exact(self):
        start = time.perf_counter()
        basic, pros, prot, total = bprost_count(atari_config())
        elapsed = time.perf_counter() - start
        assert total == 20_598_848  # zero tolerance
        assert (basic, pros, prot) == (28_672, 6_856_768, 13_713_408)
        assert elapsed < 0.001
        report("B-PROST count", f"total {total:,} in {elapsed*1e6:.0f} us")


class TestBprostEnumeration:
    def test_formula_and_extraction_match_oracles(self):
        start = time.perf_counter()
        # all tile grids up to 4x4 and palettes up to 4 colors
        for ty, tx, c in itertools.product(range(1, 5), range(1, 5), range(1, 5)):
            cfg = BprostConfig(tiles_x=tx, tiles_y=ty, tile_w=2, tile_h=2, palette_size=c)
            basic, pros, prot = enumerate_tuples(cfg)
            assert bprost_count(cfg) == (
                len(basic), len(pros), len(prot),
                len(basic) + len(pros) + len(prot),
            )
        # 100 random screens against the quadratic pairwise oracle
        rng = np.random.default_rng(0)
        configs = [
            BprostConfig(tiles_x=3, tiles_y=3, tile_w=3, tile_h=3, palette_size=3),
            BprostConfig(tiles_x=4, tiles_y=2, tile_w=2, tile_h=4, palette_size=4),
        ]
        screens = 0
        for cfg in configs:
            prev = prev_basic = None
            for _ in range(50):
                scr = random_screen(cfg, rng)
                full, basic = extract_bprost(scr, prev_basic, cfg)
                assert set(full.ids) == oracle_extract(scr, prev, cfg)
                prev, prev_basic = scr, basic
                screens += 1
        elapsed = time.perf_counter() - start
        assert screens == 100
        assert elapsed < 10.0
        report("B-PROST enumeration oracle", f"64 configs + {screens} screens in {elapsed:.1f}s")


class TestNoveltySemantics:
    def test_ten_thousand_sequences_against_log_replay(self):
        rng = random.Random(42)
        space = FeatureSpace(size=24, descriptor="raw")
        mismatches = 0
        for _ in range(10_000):
            table = NoveltyTable(space, k=1)
            log = []
            for _ in range(rng.randrange(1, 12)):
                feats = FeatureSet(rng.sample(range(24), rng.randrange(0, 5)))
                depth = rng.randrange(0, 8)
                if rng.random() < 0.6:
                    table.update(feats, depth)
                    log.append((feats, depth))
                else:
                    oracle = {}
                    for fs, d in log:
                        for f in fs:
                            oracle[f] = min(oracle.get(f, math.inf), d)
                    want_new = any(oracle.get(f, math.inf) > depth for f in feats)
                    want_cached = any(oracle.get(f, math.inf) >= depth for f in feats)
                    if table.check_new(feats, depth) != want_new:
                        mismatches += 1
                    if table.check_cached(feats, depth) != want_cached:
                        mismatches += 1
            oracle = {}
            for fs, d in log:
                for f in fs:
                    oracle[f] = min(oracle.get(f, math.inf), d)
            if table.depth_of != oracle:
                mismatches += 1
        assert mismatches == 0
        report("novelty semantics", "10,000 sequences, zero mismatches")


class TestIwOracleEquivalence:
    def test_fifty_seeded_instances(self):
        start = time.perf_counter()
        cfg = PlannerConfig(node_budget=10**7, frame_skip=1)
        for seed in range(50):
            size = 3 + seed % 2
            gems = 1 + seed % 3
            env = GridCollect(size=size, gems=gems, seed=seed, cell_px=1)
            scr = sim_reset(env)[1]
            extractor = RawExtractor(scr.width, scr.height, scr.palette_size)
            state, _ = sim_reset(env)
            stats = {}
            action = plan_iw(state, extractor, cfg, stats_out=stats)
            got_screens = sorted(n.sim.screen().tobytes() for n in stats["generated"])
            want_screens, want_action = oracle_iw1(env, cfg.gamma, cfg.alpha)
            assert got_screens == want_screens, f"instance {seed}: generated sets differ"
            assert action == want_action, f"instance {seed}: action differs"
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0
        report("IW(1) oracle equivalence", f"50 instances in {elapsed:.1f}s")


class TestRolloutIw:
    def test_behavior_suite(self):
        start = time.perf_counter()

        # (a) unique depth-3 reward in the chain, node budget 500
        hits = 0
        for seed in range(50):
            env = Chain(reward_depth=3, actions=3, seed=seed)
            scr = sim_reset(env)[1]
            extractor = BprostExtractor(BprostConfig.for_screen(scr))
            state, _ = sim_reset(env)
            cfg = PlannerConfig(node_budget=500, frame_skip=1)
            action, _ = rollout_iw_plan(state, extractor, cfg, rng=random.Random(seed))
            hits += action == env.secret[0]
        assert hits >= 49, f"chain reward found in only {hits}/50 runs"

        # (b) risk aversion direction on the coin-baited corridor
        wins = losses = 0
        mean_ra = mean_no = 0.0
        pairs = 25
        for i in range(pairs):
            env_cfg = {
                "name": "avoid", "width": 8, "height": 10, "seed": 100 + i,
                "spawn_prob": 0.15, "pattern": "tunnel", "tunnel_len": 14,
                "tunnel_period": 22, "tunnel_coins": 3, "tunnel_close": 5,
                "max_steps": 60,
            }
            score = {}
            for alpha in (50_000.0, 1.0):
                extractor = BprostExtractor(
                    BprostConfig.for_screen(sim_reset(env_cfg)[1])
                )
                cfg = PlannerConfig(
                    node_budget=80, frame_skip=1, alpha=alpha, action_cap=65
                )
                rec = run_episode(env_cfg, extractor, cfg, seed=derive_seed(0, i))
                score[alpha] = rec.score
            mean_ra += score[50_000.0] / pairs
            mean_no += score[1.0] / pairs
            if score[50_000.0] > score[1.0]:
                wins += 1
            elif score[50_000.0] < score[1.0]:
                losses += 1
        p = sign_test_p(wins, losses)
        assert mean_ra >= mean_no, f"mean RA {mean_ra:.2f} < mean no-RA {mean_no:.2f}"
        assert p < 0.05, f"sign test p = {p:.4f} over {wins}W/{losses}L"

        # (c) partial caching: zero-budget replanning returns the cached argmax
        env = GridCollect(size=4, gems=2, seed=7, cell_px=2)
        extractor = BprostExtractor(BprostConfig.for_screen(sim_reset(env)[1], 2, 2))
        state, _ = sim_reset(env)
        cfg = PlannerConfig(node_budget=400, frame_skip=1)
        action, tree = rollout_iw_plan(state, extractor, cfg, rng=random.Random(9))
        sub = partial_cache_advance(tree, action)
        backup(sub, cfg)
        present = [(a, c) for a, c in enumerate(sub.children) if c is not None]
        best = max(c.value for _, c in present)
        expected = {a for a, c in present if c.value == best}
        stats = {}
        got, _ = rollout_iw_plan(
            sub.sim, extractor, PlannerConfig(node_budget=0, frame_skip=1),
            cached_tree=sub, rng=random.Random(1), stats_out=stats,
        )
        assert stats["expansions"] == 0
        assert got in expected

        elapsed = time.perf_counter() - start
        assert elapsed < 120.0
        report(
            "RolloutIW behavior",
            f"chain {hits}/50; RA mean {mean_ra:.2f} vs {mean_no:.2f}, "
            f"{wins}W/{losses}L p={p:.2e}; cache replay ok; {elapsed:.0f}s",
        )


class TestNeuralExtractor:
    def test_kernels_thresholds_quantization(self):
        start = time.perf_counter()

        # convolution against the naive oracle, 100 random layer instances
        rng = np.random.default_rng(7)
        for _ in range(100):
            c_in = int(rng.integers(1, 4))
            out_ch = int(rng.integers(1, 5))
            kh, kw = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            stride = int(rng.integers(1, 4))
            padding = int(rng.integers(0, 3))
            h = int(rng.integers(kh, kh + 8))
            w = int(rng.integers(kw, kw + 8))
            x = rng.normal(size=(c_in, h, w)).astype(np.float32)
            wgt = rng.normal(size=(out_ch, c_in, kh, kw)).astype(np.float32)
            b = rng.normal(size=out_ch).astype(np.float32)
            got = conv2d(x, wgt, b, stride=stride, padding=padding)
            want = naive_conv2d(x, wgt, b, stride=stride, padding=padding)
            assert np.abs(got - want).max() <= 1e-5

        # thresholding monotone in lambda
        probs = rng.random((6, 6, 5))
        sets = [set(threshold_features(probs, lam).ids) for lam in (0.2, 0.5, 0.7, 0.9)]
        for smaller, larger in zip(sets[1:], sets[:-1]):
            assert smaller <= larger

        # quantization bins equiprobable under the prior, 3 sigma over 1e6
        from scipy.special import ndtr

        n = 1_000_000
        samples = rng.standard_normal(n)
        for bits in (4, 6):
            levels = 1 << bits
            bins = np.minimum(levels - 1, np.floor(ndtr(samples) * levels).astype(int))
            counts = np.bincount(bins, minlength=levels)
            p = 1.0 / levels
            sigma = math.sqrt(n * p * (1 - p))
            worst = np.abs(counts - n * p).max()
            assert worst <= 3 * sigma, f"{bits}-bit bins off by {worst:.0f} (3s = {3*sigma:.0f})"

        # reference feature-space sizes
        thresh = EncoderWeights(
            input_size=(128, 128), latent_spec=(15, 15, 20),
            model_kind="bernoulli", threshold_default=0.9, layers=(), tensors={},
        )
        assert NeuralExtractor(thresh).space.size == 4500
        gauss = np.zeros((15, 15, 5))
        assert quantize_features(gauss, bits=4).arr.size <= 15 * 15 * 5 * 4
        assert 15 * 15 * 5 * 4 == 4500
        assert 15 * 15 * 5 * 6 == 6750

        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        report("neural extractor", f"100 conv instances, bins, sizes in {elapsed:.0f}s")


class TestEndToEndWithoutTrainer:
    def test_fixture_encoder_beats_random(self, tmp_path):
        path = tmp_path / "band.vw"
        write_band_encoder(path, hw=(32, 32))
        weights = load_weights(path)
        assert weights.input_size == (32, 32)
        wins = losses = 0
        mean_n = mean_r = 0.0
        for i in range(20):
            env_cfg = {
                "name": "gridcollect", "size": 8, "gems": 3,
                "seed": 50 + i, "move_cap": 60,
            }
            cfg = PlannerConfig(node_budget=150, frame_skip=1, action_cap=40)
            rec_n = run_episode(env_cfg, NeuralExtractor(weights), cfg, seed=derive_seed(0, i))
            rec_r = run_episode(env_cfg, None, cfg, seed=derive_seed(0, i))
            mean_n += rec_n.score / 20
            mean_r += rec_r.score / 20
            if rec_n.score > rec_r.score:
                wins += 1
            elif rec_n.score < rec_r.score:
                losses += 1
        p = sign_test_p(wins, losses)
        assert mean_n > mean_r
        assert p < 0.05, f"sign test p = {p:.4f} over {wins}W/{losses}L"
        report(
            "end-to-end without trainer",
            f"neural fixture {mean_n:.2f} vs random {mean_r:.2f}, p={p:.2e}",
        )


class TestPipelineAtDeskScale:
    def test_collect_train_plan(self, tmp_path):
        trainer = pytest.importorskip(
            "vaetrain", reason="secondary trainer package not installed"
        )
        from pixelplan.harness import collect_frames

        # collect: 200 frames from GridCollect layouts with the B-PROST planner
        env_cfg = {"name": "gridcollect", "size": 8, "gems": 3, "seed": 0, "move_cap": 60}
        cfg = PlannerConfig(node_budget=60, frame_skip=1, action_cap=40)
        ds = collect_frames(
            env_cfg, cfg, 200, tmp_path / "ds", seed=0, vary_env_seed=True
        )
        assert (ds.train_count, ds.val_count) == (190, 10)

        # train: desk architecture, seeded, then export the encoder
        weights_path = tmp_path / "learned.vw"
        trainer.train_and_export(
            dataset_path=tmp_path / "ds",
            out_path=weights_path,
            arch="desk",
            beta=1e-4,
            epochs=80,
            seed=0,
        )
        weights = load_weights(weights_path)
        assert weights.latent_spec == (8, 8, 20)

        # plan: learned features vs the baselines under an equal node budget
        envs = {
            f"gridcollect-{s}": {
                "name": "gridcollect", "size": 8, "gems": 3, "seed": s, "move_cap": 60,
            }
            for s in range(10)
        }
        run_cfg = PlannerConfig(node_budget=80, frame_skip=1, action_cap=40)
        learned = run_benchmark(
            envs, "neural", run_cfg, runs=1, seed=1, weights_path=weights_path
        )
        bprost = run_benchmark(envs, "bprost", run_cfg, runs=1, seed=1)
        rand = run_benchmark(envs, "random", run_cfg, runs=1, seed=1)

        rows = []
        beats_random = beats_bprost = 0
        for label in envs:
            l, b, r = (
                learned.mean_score(label),
                bprost.mean_score(label),
                rand.mean_score(label),
            )
            beats_random += l >= r
            beats_bprost += l >= b
            rows.append(f"{label}: learned {l:.1f}  bprost {b:.1f}  random {r:.1f}")
        mean_l = sum(learned.mean_score(e) for e in envs) / len(envs)
        mean_b = sum(bprost.mean_score(e) for e in envs) / len(envs)
        mean_r = sum(rand.mean_score(e) for e in envs) / len(envs)
        print("\n".join(rows))

        # hard gate: learned features at least match random play
        assert mean_l >= mean_r, f"learned {mean_l:.2f} < random {mean_r:.2f}"
        assert beats_random >= 6, f"learned beats random in only {beats_random}/10 envs"
        # soft target (documented, not gated): learned vs B-PROST
        report(
            "pipeline at desk scale",
            f"learned {mean_l:.2f}, bprost {mean_b:.2f}, random {mean_r:.2f}; "
            f"learned >= bprost in {beats_bprost}/10 envs (soft target)",
        )
