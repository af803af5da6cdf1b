"""Deterministic pixel environments with snapshot semantics for tree search.

Every environment renders palette-indexed screens and exposes an immutable
snapshot (`SimState`) that can be cloned and stepped without invalidating the
original.  All dynamics are fully deterministic given the environment config,
so replaying an action sequence from any snapshot reproduces bit-identical
screens, rewards and terminal flags.

Built-in environments
---------------------
- ``gridcollect``: an agent on an N x N board collects gems (+1 each); the
  episode ends when every gem is collected or a move cap is hit.  Rewards
  require multi-step plans.
- ``avoid``: a scrolling corridor of falling hazards; -1 and terminal on
  collision, +0.1 per survived step.  Produces negative rewards.
- ``chain``: a secret action sequence advances the agent along a strip; the
  single reward sits a fixed number of correct moves away.  Any wrong move is
  a terminal dead end.  Used to exercise deep, sparse lookahead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

__all__ = [
    "Screen",
    "SimState",
    "StepResult",
    "FrameSkipConfig",
    "Environment",
    "GridCollect",
    "AvoidGame",
    "Chain",
    "make_env",
    "sim_reset",
    "sim_step",
    "sim_clone",
    "ENV_REGISTRY",
]


@dataclass(frozen=True)
class Screen:
    """Rectangular grid of palette-indexed pixels.

    ``pixels`` is a read-only (height, width) uint8 array; every value is a
    color index below ``palette_size``.
    """

    width: int
    height: int
    palette_size: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.array(self.pixels, dtype=np.uint8)  # own a copy, then freeze
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {px.shape} != (height, width) = "
                f"({self.height}, {self.width})"
            )
        if self.palette_size < 1:
            raise ValueError("palette_size must be >= 1")
        if px.size and int(px.max()) >= self.palette_size:
            raise ValueError("pixel value outside palette")

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


@dataclass(frozen=True)
class StepResult:
    """Observation after one decision step: screen, summed reward, terminal."""

    screen: Screen
    reward: float
    terminal: bool


@dataclass(frozen=True)
class FrameSkipConfig:
    """Number of internal frames an executed action is repeated for."""

    skip: int = 15

    def __post_init__(self) -> None:
        if self.skip < 1:
            raise ValueError("frame skip must be >= 1")


@dataclass(frozen=True)
class SimState:
    """Immutable snapshot of a full environment state.

    The payload is environment-defined and hashable; stepping never mutates
    an existing snapshot.
    """

    env: "Environment"
    payload: Any
    terminal: bool
    episode_score: float

    def screen(self) -> Screen:
        return self.env.render(self.payload)

    @property
    def action_count(self) -> int:
        return self.env.action_count


class Environment:
    """Deterministic environment: payload transitions plus pixel rendering.

    Subclasses define an immutable payload type, single-frame dynamics and a
    rendering rule.  Instances hold only static configuration and are safe to
    share between snapshots.
    """

    name: str = "abstract"

    @property
    def action_count(self) -> int:
        raise NotImplementedError

    def initial_payload(self) -> Any:
        raise NotImplementedError

    def step_payload(self, payload: Any, action: int) -> tuple[Any, float, bool]:
        """Advance one internal frame; returns (payload, reward, terminal)."""
        raise NotImplementedError

    def render(self, payload: Any) -> Screen:
        raise NotImplementedError


def _fill_cell(px: np.ndarray, row: int, col: int, cell: int, color: int) -> None:
    px[row * cell : (row + 1) * cell, col * cell : (col + 1) * cell] = color


class GridCollect(Environment):
    """Agent on a ``size`` x ``size`` board collecting gems.

    Layout rule: the agent starts in the top-left cell; gem cells are drawn
    without replacement from the remaining cells by a seeded RNG.  Rendering
    paints each board cell as a ``cell_px`` square block: background color 0,
    agent color 1, gems color 2.  Actions: 0=up, 1=right, 2=down, 3=left,
    clamped at the walls.  Entering a gem cell yields +1 and removes the gem;
    the episode ends when no gems remain or after ``move_cap`` moves.
    """

    name = "gridcollect"
    PALETTE = 4
    BG, AGENT, GEM = 0, 1, 2

    def __init__(
        self,
        size: int = 8,
        gems: int = 3,
        seed: int = 0,
        move_cap: int = 200,
        cell_px: int = 4,
        layout: list[tuple[int, int]] | None = None,
    ) -> None:
        if size < 2:
            raise ValueError("grid size must be >= 2")
        if not 1 <= gems < size * size:
            raise ValueError("gem count must be in [1, size*size)")
        if cell_px < 1:
            raise ValueError("cell_px must be >= 1")
        self.size = size
        self.gems = gems
        self.seed = seed
        self.move_cap = move_cap
        self.cell_px = cell_px
        if layout is not None:
            cells = {tuple(c) for c in layout}
            if (0, 0) in cells or any(
                not (0 <= r < size and 0 <= c < size) for r, c in cells
            ):
                raise ValueError("gem layout must avoid the start cell and fit the board")
            self.gems = len(cells)
            self.gem_cells = frozenset(cells)
        else:
            rng = random.Random(seed)
            cells = [
                (r, c) for r in range(size) for c in range(size) if (r, c) != (0, 0)
            ]
            self.gem_cells = frozenset(rng.sample(cells, gems))

    @property
    def action_count(self) -> int:
        return 4

    def initial_payload(self):
        return ((0, 0), self.gem_cells, 0)

    def step_payload(self, payload, action):
        (r, c), gems, moves = payload
        if action == 0:
            r = max(0, r - 1)
        elif action == 1:
            c = min(self.size - 1, c + 1)
        elif action == 2:
            r = min(self.size - 1, r + 1)
        elif action == 3:
            c = max(0, c - 1)
        else:
            raise ValueError(f"action {action} out of range")
        moves += 1
        reward = 0.0
        if (r, c) in gems:
            gems = gems - {(r, c)}
            reward = 1.0
        terminal = not gems or moves >= self.move_cap
        return ((r, c), gems, moves), reward, terminal

    def render(self, payload) -> Screen:
        (r, c), gems, _ = payload
        n = self.size * self.cell_px
        px = np.zeros((n, n), dtype=np.uint8)
        for gr, gc in gems:
            _fill_cell(px, gr, gc, self.cell_px, self.GEM)
        _fill_cell(px, r, c, self.cell_px, self.AGENT)
        return Screen(width=n, height=n, palette_size=self.PALETTE, pixels=px)


class AvoidGame(Environment):
    """Scrolling corridor of falling hazards.

    The agent sits on the bottom row and shifts left/right (actions 0=left,
    1=stay, 2=right).  Each frame every falling object drops one row and each
    top-row cell spawns a new hazard with probability ``spawn_prob``; spawn
    patterns are pure functions of (seed, frame index), so snapshots replay
    exactly.  A hazard on the agent's cell costs -1 and ends the episode;
    surviving a frame pays +0.1.  With ``coin_prob`` > 0, coins also fall and
    pay +1 when caught --- they bait a risk-neutral planner into hazard lanes.
    The episode ends after ``max_steps`` frames.

    Two spawn patterns exist.  ``uniform`` draws hazards and coins per column
    independently.  ``tunnel`` periodically builds a coin-baited trap on the
    three leftmost columns: solid hazard walls on columns 0 and 2, a few
    coins falling down the gap column 1, and a closing hazard across the gap
    on the tunnel's last row, so riding the lane for its coins ends in an
    unavoidable collision.  The open field (columns 3+) keeps sparse uniform
    hazards and no coins.
    """

    name = "avoid"
    PALETTE = 4
    BG, AGENT, COIN, HAZARD = 0, 1, 2, 3

    def __init__(
        self,
        width: int = 8,
        height: int = 12,
        seed: int = 0,
        spawn_prob: float = 0.3,
        coin_prob: float = 0.0,
        max_steps: int = 200,
        cell_px: int = 4,
        pattern: str = "uniform",
        tunnel_len: int = 14,
        tunnel_period: int = 22,
        tunnel_coins: int = 3,
        tunnel_close: int | None = None,
    ) -> None:
        if width < 2 or height < 2:
            raise ValueError("corridor must be at least 2x2 cells")
        if not 0.0 <= spawn_prob <= 1.0:
            raise ValueError("spawn_prob must be in [0, 1]")
        if not 0.0 <= coin_prob <= 1.0:
            raise ValueError("coin_prob must be in [0, 1]")
        if pattern not in ("uniform", "tunnel"):
            raise ValueError(f"unknown spawn pattern {pattern!r}")
        if tunnel_close is None:
            tunnel_close = tunnel_len - 1
        if pattern == "tunnel":
            if width < 5:
                raise ValueError("tunnel pattern needs width >= 5")
            if not 1 <= tunnel_coins <= tunnel_close:
                raise ValueError("tunnel_coins must precede the closure")
            if not tunnel_close < tunnel_len:
                raise ValueError("closure must spawn while the walls persist")
            if tunnel_period <= tunnel_len:
                raise ValueError("tunnel_period must exceed tunnel_len")
        self.width = width
        self.height = height
        self.seed = seed
        self.spawn_prob = spawn_prob
        self.coin_prob = coin_prob
        self.max_steps = max_steps
        self.cell_px = cell_px
        self.pattern = pattern
        self.tunnel_len = tunnel_len
        self.tunnel_period = tunnel_period
        self.tunnel_coins = tunnel_coins
        self.tunnel_close = tunnel_close

    @property
    def action_count(self) -> int:
        return 3

    def _spawned_cols(self, t: int) -> tuple[list[int], list[int]]:
        """(hazard, coin) columns spawned at frame t; pure in (seed, t)."""
        rng = random.Random(self.seed * 1_000_003 + t)
        if self.pattern == "uniform":
            hazards = [c for c in range(self.width) if rng.random() < self.spawn_prob]
            coins = [
                c
                for c in range(self.width)
                if rng.random() < self.coin_prob and c not in hazards
            ]
            return hazards, coins
        # tunnel: sparse field on columns 3+, scheduled trap on columns 0-2
        hazards = [c for c in range(3, self.width) if rng.random() < self.spawn_prob]
        coins: list[int] = []
        phase = t % self.tunnel_period
        if phase < self.tunnel_len:
            hazards += [0, 2]
            if phase == self.tunnel_close:
                hazards.append(1)  # closure: a full wall row crosses the lane
            elif phase < self.tunnel_coins:
                coins.append(1)
        return hazards, coins

    def initial_payload(self):
        return (self.width // 2, frozenset(), frozenset(), 0)

    def step_payload(self, payload, action):
        col, hazards, coins, t = payload
        if action == 0:
            col = max(0, col - 1)
        elif action == 1:
            pass
        elif action == 2:
            col = min(self.width - 1, col + 1)
        else:
            raise ValueError(f"action {action} out of range")
        fallen = {(r + 1, c) for r, c in hazards if r + 1 < self.height}
        coins_f = {(r + 1, c) for r, c in coins if r + 1 < self.height}
        new_h, new_c = self._spawned_cols(t)
        fallen.update((0, c) for c in new_h)
        coins_f.update((0, c) for c in new_c)
        t += 1
        agent_cell = (self.height - 1, col)
        if agent_cell in fallen:
            return (col, frozenset(fallen), frozenset(coins_f), t), -1.0, True
        reward = 0.1
        if agent_cell in coins_f:
            coins_f.discard(agent_cell)
            reward += 1.0
        state = (col, frozenset(fallen), frozenset(coins_f), t)
        return state, reward, t >= self.max_steps

    def render(self, payload) -> Screen:
        col, hazards, coins, _ = payload
        w = self.width * self.cell_px
        h = self.height * self.cell_px
        px = np.zeros((h, w), dtype=np.uint8)
        for cr, cc in coins:
            _fill_cell(px, cr, cc, self.cell_px, self.COIN)
        for hr, hc in hazards:
            _fill_cell(px, hr, hc, self.cell_px, self.HAZARD)
        _fill_cell(px, self.height - 1, col, self.cell_px, self.AGENT)
        return Screen(width=w, height=h, palette_size=self.PALETTE, pixels=px)


class Chain(Environment):
    """Secret-sequence strip with a single reward ``reward_depth`` moves in.

    At position p, playing the seeded secret action advances to p+1; any
    other action is a terminal dead end with no reward.  Reaching position
    ``reward_depth`` pays +1 and ends the episode.  Rendered as a strip of
    ``cell_px`` blocks with the agent marker at its position; dead ends
    render as a fully hazard-colored screen.
    """

    name = "chain"
    PALETTE = 4
    BG, AGENT, DEAD = 0, 1, 3

    def __init__(
        self,
        reward_depth: int = 3,
        actions: int = 3,
        seed: int = 0,
        cell_px: int = 4,
    ) -> None:
        if reward_depth < 1:
            raise ValueError("reward_depth must be >= 1")
        if actions < 1:
            raise ValueError("need at least one action")
        self.reward_depth = reward_depth
        self.n_actions = actions
        self.seed = seed
        self.cell_px = cell_px
        rng = random.Random(seed)
        self.secret = tuple(rng.randrange(actions) for _ in range(reward_depth))

    @property
    def action_count(self) -> int:
        return self.n_actions

    def initial_payload(self):
        return (0, False)

    def step_payload(self, payload, action):
        pos, dead = payload
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        if action != self.secret[pos]:
            return (pos, True), 0.0, True
        pos += 1
        if pos == self.reward_depth:
            return (pos, False), 1.0, True
        return (pos, False), 0.0, False

    def render(self, payload) -> Screen:
        pos, dead = payload
        cells = self.reward_depth + 1
        w = cells * self.cell_px
        h = self.cell_px
        px = np.zeros((h, w), dtype=np.uint8)
        if dead:
            px[:] = self.DEAD
        else:
            _fill_cell(px, 0, pos, self.cell_px, self.AGENT)
        return Screen(width=w, height=h, palette_size=self.PALETTE, pixels=px)


ENV_REGISTRY: dict[str, type[Environment]] = {
    GridCollect.name: GridCollect,
    AvoidGame.name: AvoidGame,
    Chain.name: Chain,
}


def make_env(env_config: Mapping[str, Any]) -> Environment:
    """Instantiate a registered environment from a config mapping.

    The mapping holds ``name`` plus the environment's constructor keywords.
    """
    cfg = dict(env_config)
    try:
        name = cfg.pop("name")
    except KeyError:
        raise ValueError("env config missing 'name'") from None
    try:
        cls = ENV_REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; known: {sorted(ENV_REGISTRY)}"
        ) from None
    return cls(**cfg)


def sim_reset(env_config: Mapping[str, Any] | Environment) -> tuple[SimState, Screen]:
    """Create the initial snapshot and its rendered screen."""
    env = env_config if isinstance(env_config, Environment) else make_env(env_config)
    payload = env.initial_payload()
    state = SimState(env=env, payload=payload, terminal=False, episode_score=0.0)
    return state, env.render(payload)


def sim_step(
    state: SimState, action: int, cfg: FrameSkipConfig = FrameSkipConfig()
) -> tuple[SimState, StepResult]:
    """Apply ``action`` for ``cfg.skip`` internal frames; rewards are summed.

    The input snapshot stays valid and reusable.  Stepping stops early if a
    frame terminates the episode.
    """
    if state.terminal:
        raise ValueError("cannot step a terminal state")
    if not 0 <= action < state.env.action_count:
        raise ValueError(f"action {action} out of range [0, {state.env.action_count})")
    payload = state.payload
    total = 0.0
    terminal = False
    for _ in range(cfg.skip):
        payload, reward, terminal = state.env.step_payload(payload, action)
        total += reward
        if terminal:
            break
    new_state = SimState(
        env=state.env,
        payload=payload,
        terminal=terminal,
        episode_score=state.episode_score + total,
    )
    screen = state.env.render(payload)
    return new_state, StepResult(screen=screen, reward=total, terminal=terminal)


def sim_clone(state: SimState) -> SimState:
    """Independent snapshot of ``state``; the two never affect each other."""
    return replace(state)
