"""Width-based planners over cloneable simulator snapshots.

Two planners share the node/backup machinery:

- :func:`plan_iw` is the breadth-first variant: children are generated in
  action order and a state is pruned the moment it carries no unseen width-k
  feature tuple.
- :func:`rollout_iw_plan` is the anytime variant: it repeatedly runs random
  rollouts from the root, pruning at depth-aware novelty failures, marking
  exhausted or pruned nodes as solved, and stops when the budget runs out or
  the root is solved.

Backed-up values are discounted maxima over children with negative rewards
scaled by a risk-aversion factor.  The subtree under the executed action can
be carried into the next planning step (partial caching); the retained
nodes' features are re-registered into the fresh novelty table before any
new rollout.
"""

from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping

from .features import Extractor, FeatureSet
from .novelty import NoveltyTable, iw_novel, iw_register
from .sim import FrameSkipConfig, SimState, make_env, sim_reset, sim_step

__all__ = [
    "PlannerConfig",
    "SearchNode",
    "EpisodeRecord",
    "plan_iw",
    "rollout_iw_plan",
    "backup",
    "partial_cache_advance",
    "run_episode",
]


@dataclass(frozen=True)
class PlannerConfig:
    """Planning-step budget and backup parameters.

    Exactly one budget mode applies: ``node_budget`` (max simulator
    expansions, deterministic) when set, otherwise ``budget_s`` wall-clock
    seconds.  ``alpha`` scales negative rewards during backup (1 disables
    risk aversion).
    """

    k: int = 1
    budget_s: float = 0.5
    node_budget: int | None = None
    gamma: float = 0.99
    alpha: float = 50_000.0
    action_cap: int = 15_000
    cache_subtree: bool = True
    frame_skip: int = 15

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if self.budget_s <= 0.0:
            raise ValueError("time budget must be positive")
        if self.node_budget is not None and self.node_budget < 0:
            raise ValueError("node budget must be >= 0")
        if self.action_cap < 1:
            raise ValueError("action cap must be >= 1")
        if self.frame_skip < 1:
            raise ValueError("frame skip must be >= 1")

    @property
    def skip_config(self) -> FrameSkipConfig:
        return FrameSkipConfig(skip=self.frame_skip)


class SearchNode:
    """Rollout-tree node: snapshot handle, features, and backup state."""

    __slots__ = (
        "sim",
        "feats",
        "ctx",
        "depth",
        "reward_in",
        "terminal",
        "value",
        "children",
        "solved",
        "visited_cached",
        "parent",
        "action",
    )

    def __init__(
        self,
        sim: SimState | None,
        feats: FeatureSet,
        ctx: Any,
        depth: int,
        reward_in: float,
        action_count: int,
        terminal: bool = False,
        parent: "SearchNode | None" = None,
        action: int | None = None,
    ):
        self.sim = sim
        self.feats = feats
        self.ctx = ctx
        self.depth = depth
        self.reward_in = reward_in
        self.terminal = terminal
        self.value = 0.0
        self.children: list[SearchNode | None] = [None] * action_count
        self.solved = terminal
        self.visited_cached = False
        self.parent = parent
        self.action = action

    def present_children(self) -> list["SearchNode"]:
        return [c for c in self.children if c is not None]

    def iter_breadth_first(self):
        queue = deque([self])
        while queue:
            node = queue.popleft()
            yield node
            queue.extend(node.present_children())


class _Budget:
    """Expansion gate: node-count mode when set, else wall clock."""

    def __init__(self, cfg: PlannerConfig):
        self.limit = cfg.node_budget
        self.deadline = (
            None if cfg.node_budget is not None else time.perf_counter() + cfg.budget_s
        )
        self.used = 0

    def can_expand(self) -> bool:
        if self.limit is not None:
            return self.used < self.limit
        return time.perf_counter() < self.deadline

    def note_expansion(self) -> None:
        self.used += 1


def _adjust(reward: float, alpha: float) -> float:
    return alpha * reward if reward < 0 else reward


def backup(node: SearchNode, cfg: PlannerConfig) -> float:
    """Bottom-up discounted max backup with risk-adjusted rewards.

    value(n) = adj(reward_in) + gamma * max(value(child)) over present
    children; leaves take adj(reward_in) alone.  Pure in the tree's rewards
    and (gamma, alpha); idempotent.
    """
    post: list[SearchNode] = []
    stack = [node]
    while stack:
        n = stack.pop()
        post.append(n)
        stack.extend(n.present_children())
    for n in reversed(post):
        kids = n.present_children()
        n.value = _adjust(n.reward_in, cfg.alpha)
        if kids:
            n.value += cfg.gamma * max(c.value for c in kids)
    return node.value


def _mark_solved_upward(node: SearchNode | None) -> None:
    while node is not None:
        if any(c is None or not c.solved for c in node.children):
            return
        node.solved = True
        node = node.parent


def _rollout(
    root: SearchNode,
    extractor: Extractor,
    table: NoveltyTable,
    budget: _Budget,
    cfg: PlannerConfig,
    rng: random.Random,
    stats: dict,
) -> None:
    """One random descent; ends at an expansion failure, prune, or terminal."""
    node = root
    while True:
        stats["max_depth"] = max(stats["max_depth"], node.depth)
        candidates = [
            a for a, c in enumerate(node.children) if c is None or not c.solved
        ]
        if not candidates:
            node.solved = True
            _mark_solved_upward(node.parent)
            return
        action = rng.choice(candidates)
        child = node.children[action]
        if child is None:
            if not budget.can_expand():
                return
            sim2, res = sim_step(node.sim, action, cfg.skip_config)
            budget.note_expansion()
            feats, ctx = extractor.extract(res.screen, node.ctx)
            child = SearchNode(
                sim=sim2,
                feats=feats,
                ctx=ctx,
                depth=node.depth + 1,
                reward_in=res.reward,
                action_count=node.sim.action_count,
                terminal=res.terminal,
                parent=node,
                action=action,
            )
            node.children[action] = child
            stats["expansions"] += 1
            stats["max_depth"] = max(stats["max_depth"], child.depth)
            novel = table.check_new(feats, child.depth)
            if novel:
                table.update(feats, child.depth)
                stats["accepted"] += 1
            if res.terminal or not novel:
                child.solved = True
                _mark_solved_upward(node)
                return
            node = child
        else:
            child.visited_cached = True
            if table.check_cached(child.feats, child.depth):
                table.update(child.feats, child.depth)
                node = child
            else:
                child.solved = True
                _mark_solved_upward(node)
                return


def rollout_iw_plan(
    root: SimState,
    extractor: Extractor,
    cfg: PlannerConfig,
    cached_tree: SearchNode | None = None,
    rng: random.Random | None = None,
    root_ctx: Any = None,
    stats_out: dict | None = None,
) -> tuple[int, SearchNode]:
    """Anytime rollout planning step; returns (action, search tree root).

    If ``cached_tree`` is given it becomes the root as-is (no re-extraction);
    every retained node's features are re-registered into the fresh novelty
    table at its current depth, in breadth-first order, before any rollout.
    Root action ties are broken uniformly at random.
    """
    if root.terminal:
        raise ValueError("cannot plan from a terminal state")
    rng = rng if rng is not None else random.Random()
    table = NoveltyTable(extractor.space, k=cfg.k)
    if cached_tree is not None:
        tree = cached_tree
        for node in tree.iter_breadth_first():
            table.update(node.feats, node.depth)
    else:
        feats, ctx = extractor.extract(root.screen(), root_ctx)
        tree = SearchNode(
            sim=root,
            feats=feats,
            ctx=ctx,
            depth=0,
            reward_in=0.0,
            action_count=root.action_count,
        )
        table.update(feats, 0)
    budget = _Budget(cfg)
    stats = {"expansions": 0, "max_depth": 0, "accepted": 0}
    while not tree.solved and budget.can_expand():
        _rollout(tree, extractor, table, budget, cfg, rng, stats)
    backup(tree, cfg)
    if stats_out is not None:
        stats_out.update(stats)
    present = [(a, c) for a, c in enumerate(tree.children) if c is not None]
    if not present:
        # nothing explored (zero budget, fresh root): anytime contract still
        # requires an action
        return rng.randrange(root.action_count), tree
    best = max(c.value for _, c in present)
    ties = [a for a, c in present if c.value == best]
    return rng.choice(ties), tree


def partial_cache_advance(tree: SearchNode, chosen: int) -> SearchNode:
    """Detach and return the chosen child subtree for the next planning step.

    Depths drop by one across the subtree; siblings are discarded; solved
    flags reset (terminal nodes stay solved) so novelty is re-established
    against the fresh table.
    """
    if not 0 <= chosen < len(tree.children) or tree.children[chosen] is None:
        raise ValueError(f"chosen action {chosen} has no cached child")
    new_root = tree.children[chosen]
    tree.children[chosen] = None
    new_root.parent = None
    new_root.action = None
    new_root.reward_in = 0.0  # the entering edge was just executed
    for node in new_root.iter_breadth_first():
        node.depth -= 1
        node.solved = node.terminal
        node.visited_cached = False
    return new_root


def plan_iw(
    root: SimState,
    extractor: Extractor,
    cfg: PlannerConfig,
    root_ctx: Any = None,
    stats_out: dict | None = None,
) -> int:
    """Breadth-first IW(k) planning step; returns the chosen action.

    States are generated in FIFO order with children in action order; a
    generated state is kept (enqueued) only if it carries an unseen width-k
    feature tuple.  Terminal and pruned states stay in the tree as leaves
    for the reward backup.  Ties at the root resolve to the lowest action
    id.
    """
    if root.terminal:
        raise ValueError("cannot plan from a terminal state")
    feats, ctx = extractor.extract(root.screen(), root_ctx)
    tree = SearchNode(
        sim=root,
        feats=feats,
        ctx=ctx,
        depth=0,
        reward_in=0.0,
        action_count=root.action_count,
    )
    seen: set[tuple[int, ...]] = set()
    iw_register(seen, feats, cfg.k)
    budget = _Budget(cfg)
    stats = {"expansions": 0, "max_depth": 0, "accepted": 0, "generated": [tree]}
    queue = deque([tree])
    exhausted = False
    while queue and not exhausted:
        node = queue.popleft()
        for action in range(len(node.children)):
            if not budget.can_expand():
                exhausted = True
                break
            sim2, res = sim_step(node.sim, action, cfg.skip_config)
            budget.note_expansion()
            cfeats, cctx = extractor.extract(res.screen, node.ctx)
            child = SearchNode(
                sim=sim2,
                feats=cfeats,
                ctx=cctx,
                depth=node.depth + 1,
                reward_in=res.reward,
                action_count=node.sim.action_count,
                terminal=res.terminal,
                parent=node,
                action=action,
            )
            node.children[action] = child
            stats["expansions"] += 1
            stats["max_depth"] = max(stats["max_depth"], child.depth)
            stats["generated"].append(child)
            if iw_novel(seen, cfeats, cfg.k):
                iw_register(seen, cfeats, cfg.k)
                stats["accepted"] += 1
                if not res.terminal:
                    queue.append(child)
    backup(tree, cfg)
    if stats_out is not None:
        stats_out.update(stats)
    present = [(a, c) for a, c in enumerate(tree.children) if c is not None]
    if not present:
        return 0
    best = max(c.value for _, c in present)
    return min(a for a, c in present if c.value == best)


@dataclass
class EpisodeRecord:
    """Outcome and per-step search statistics of one planned episode."""

    env: str
    backend: str
    seed: int
    score: float
    actions: int
    expanded_per_step: list[int] = field(default_factory=list)
    depth_per_step: list[int] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def mean_expanded(self) -> float:
        return sum(self.expanded_per_step) / len(self.expanded_per_step) if self.expanded_per_step else 0.0

    @property
    def mean_depth(self) -> float:
        return sum(self.depth_per_step) / len(self.depth_per_step) if self.depth_per_step else 0.0


def run_episode(
    env_config: Mapping[str, Any],
    extractor: Extractor | None,
    cfg: PlannerConfig,
    seed: int = 0,
    backend: str | None = None,
) -> EpisodeRecord:
    """Plan -> execute -> cache-advance until terminal or the action cap.

    With ``extractor=None`` actions are drawn uniformly at random (the
    baseline backend used for score normalization).
    """
    env = make_env(env_config) if not hasattr(env_config, "render") else env_config
    rng = random.Random(seed)
    state, _ = sim_reset(env)
    tag = backend if backend is not None else (
        "random" if extractor is None else extractor.space.descriptor
    )
    record = EpisodeRecord(env=env.name, backend=tag, seed=seed, score=0.0, actions=0)
    cached: SearchNode | None = None
    prev_ctx: Any = None
    start = time.perf_counter()
    while not state.terminal and record.actions < cfg.action_cap:
        if extractor is None:
            action = rng.randrange(env.action_count)
        else:
            stats: dict = {}
            action, tree = rollout_iw_plan(
                state,
                extractor,
                cfg,
                cached_tree=cached,
                rng=rng,
                root_ctx=prev_ctx,
                stats_out=stats,
            )
            record.expanded_per_step.append(stats["expansions"])
            record.depth_per_step.append(stats["max_depth"])
            prev_ctx = tree.ctx
            if cfg.cache_subtree and tree.children[action] is not None:
                cached = partial_cache_advance(tree, action)
            else:
                cached = None
        state, res = sim_step(state, action, cfg.skip_config)
        record.actions += 1
        record.score += res.reward
    record.wall_time = time.perf_counter() - start
    return record
