"""Shared test fixtures: hand-built weight files and independent oracles."""

import numpy as np

from pixelplan.weights import save_weights


def naive_conv2d(x, w, b, stride=1, padding=0):
    """Direct-loop convolution oracle, float64 accumulation."""
    c_in, h, wd = x.shape
    out_ch, _, kh, kw = w.shape
    xp = np.pad(x.astype(np.float64), ((0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((out_ch, oh, ow))
    for oc in range(out_ch):
        for i in range(oh):
            for j in range(ow):
                acc = float(b[oc])
                for ic in range(c_in):
                    for di in range(kh):
                        for dj in range(kw):
                            acc += xp[ic, i * stride + di, j * stride + dj] * float(
                                w[oc, ic, di, dj]
                            )
                out[oc, i, j] = acc
    return out


def write_identity_encoder(path, hw=(6, 6)):
    """1x1 identity conv, no head: output echoes the input frame."""
    h, w = hw
    save_weights(
        path,
        layers=[
            {
                "kind": "conv",
                "in_channels": 1,
                "out_channels": 1,
                "kernel": [1, 1],
                "stride": 1,
                "padding": 0,
                "weight": "w0",
                "bias": "b0",
            }
        ],
        tensors={
            "w0": np.ones((1, 1, 1, 1), np.float32),
            "b0": np.zeros(1, np.float32),
        },
        input_size=hw,
        latent_spec=(h, w, 1),
    )


def write_zero_head_encoder(path, hw=(6, 6)):
    """Zero-weight, zero-bias conv into a sigmoid: every probability is 0.5."""
    h, w = hw
    save_weights(
        path,
        layers=[
            {
                "kind": "conv",
                "in_channels": 1,
                "out_channels": 2,
                "kernel": [1, 1],
                "stride": 1,
                "padding": 0,
                "weight": "w0",
                "bias": "b0",
            },
            {"kind": "sigmoid"},
        ],
        tensors={
            "w0": np.zeros((2, 1, 1, 1), np.float32),
            "b0": np.zeros(2, np.float32),
        },
        input_size=hw,
        latent_spec=(h, w, 2),
    )


def write_band_encoder(path, hw=(32, 32), thresholds=(0.15, 0.45, 0.8), gain=60.0):
    """Identity-style encoder: 2x2 stride-2 patch means against intensity bands.

    Channel o fires (prob ~ 1) where the patch mean intensity exceeds
    thresholds[o]; with a sharp gain the thresholded features localize every
    sprite on the screen.
    """
    h, w = hw
    bands = len(thresholds)
    weight = np.full((bands, 1, 2, 2), gain / 4.0, np.float32)
    bias = np.array([-gain * t for t in thresholds], np.float32)
    save_weights(
        path,
        layers=[
            {
                "kind": "conv",
                "in_channels": 1,
                "out_channels": bands,
                "kernel": [2, 2],
                "stride": 2,
                "padding": 0,
                "weight": "w0",
                "bias": "b0",
            },
            {"kind": "sigmoid"},
        ],
        tensors={"w0": weight, "b0": bias},
        input_size=hw,
        latent_spec=(h // 2, w // 2, bands),
    )


def oracle_iw1(env, gamma=0.99, alpha=50_000.0):
    """Independent exhaustive BFS-with-pruning oracle over raw pixel atoms.

    Mirrors the documented IW(1) conventions from scratch: root atoms seed
    the seen-set, children generate in action order, a state is kept iff it
    shows an unseen (pixel, color) atom, terminal states are never expanded.
    Returns (sorted generated screen bytes, chosen action).
    """
    from collections import deque

    from pixelplan.sim import FrameSkipConfig, sim_reset, sim_step

    skip = FrameSkipConfig(skip=1)

    def atoms(screen):
        return {(i, int(v)) for i, v in enumerate(screen.pixels.reshape(-1))}

    state0, screen0 = sim_reset(env)
    seen = atoms(screen0)
    root = {
        "state": state0,
        "screen": screen0,
        "reward": 0.0,
        "children": {},
        "terminal": False,
    }
    generated = [root]
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for action in range(env.action_count):
            st, res = sim_step(node["state"], action, skip)
            child = {
                "state": st,
                "screen": res.screen,
                "reward": res.reward,
                "children": {},
                "terminal": res.terminal,
            }
            node["children"][action] = child
            generated.append(child)
            child_atoms = atoms(res.screen)
            if child_atoms - seen:
                seen |= child_atoms
                if not res.terminal:
                    queue.append(child)

    import sys

    sys.setrecursionlimit(100_000)

    def value(n):
        v = alpha * n["reward"] if n["reward"] < 0 else n["reward"]
        if n["children"]:
            v += gamma * max(value(c) for c in n["children"].values())
        return v

    vals = {a: value(c) for a, c in root["children"].items()}
    best = max(vals.values())
    action = min(a for a, v in vals.items() if v == best)
    screens = sorted(n["screen"].tobytes() for n in generated)
    return screens, action


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided sign test: P(X >= wins) for X ~ Binomial(wins+losses, 1/2)."""
    from math import comb

    n = wins + losses
    if n == 0:
        return 1.0
    return sum(comb(n, k) for k in range(wins, n + 1)) / 2.0**n
