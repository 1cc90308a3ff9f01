"""Chain orchestration: initialization, MH stepping, snapshots, tempering.

A chain's state bundles the spanning forest with incrementally maintained
per-district caches (population, area, perimeter, and log tree counts when
the measure needs them); only the two districts touched by an accepted move
are recomputed.  ``check_invariants`` recomputes everything from scratch at
each snapshot and compares - used by the validation suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import StateError
from .forest import PopWindow, SpanningForest, root_tree, split_tree
from .graph import Graph, induced_subgraph, partition_weights
from .measure import MeasureParams, ScoreBreakdown, breakdown_from_parts, \
    district_geometry, log_acceptance
from .proposal import PairMethod, propose
from .rng import RngStream
from .treecount import log_tree_count
from .wilson import wilson_ust

DEFAULT_INIT_RETRIES = 64
DEFAULT_INIT_RESTARTS = 1000


@dataclass
class ChainConfig:
    n: int
    params: MeasureParams
    method: PairMethod
    steps: int
    seed: int
    snapshot_every: int = 1
    init_retries: int = DEFAULT_INIT_RETRIES
    init_restarts: int = DEFAULT_INIT_RESTARTS
    chain_id: int = 0
    graph_path: str = None
    check_invariants: bool = False

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.n < 2:
            raise ValueError("need at least two partitions")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass
class LadderConfig:
    rungs: tuple  # sequence of (gamma, w_c), ordered
    swap_every: int
    base: ChainConfig

    def __post_init__(self):
        if len(self.rungs) < 2:
            raise ValueError("a ladder needs at least two rungs")
        if self.swap_every < 1:
            raise ValueError("swap_every must be >= 1")

    def rung_params(self, k: int) -> MeasureParams:
        gamma, w_c = self.rungs[k]
        return replace(self.base.params, gamma=gamma, w_c=w_c)


@dataclass
class ChainStats:
    proposals: int = 0
    accepts: int = 0
    self_loops: int = 0
    swap_attempts: int = 0
    swap_accepts: int = 0

    @property
    def rejections(self) -> int:
        return self.proposals - self.accepts - self.self_loops

    @property
    def acceptance_rate(self) -> float:
        return self.accepts / self.proposals if self.proposals else 0.0

    def to_dict(self) -> dict:
        return {
            "proposals": self.proposals,
            "accepts": self.accepts,
            "rejections": self.rejections,
            "self_loops": self.self_loops,
            "acceptance_rate": self.acceptance_rate,
            "swap_attempts": self.swap_attempts,
            "swap_accepts": self.swap_accepts,
        }


@dataclass
class ChainState:
    """Forest plus per-district caches kept coherent across accepted moves."""

    forest: SpanningForest
    pops: list
    areas: list
    perims: list

    @classmethod
    def from_forest(cls, g: Graph, forest: SpanningForest, params: MeasureParams) -> "ChainState":
        labels = forest.assignment.labels
        n = forest.assignment.n
        if params.needs_tree_counts and forest.log_tau is None:
            log_tau = [log_tree_count(induced_subgraph(g, t.vertices)) for t in forest.trees]
            forest = SpanningForest(forest.trees, forest.assignment, log_tau)
        areas, perims = district_geometry(g, labels, n)
        return cls(forest=forest, pops=partition_weights(g, labels, n),
                   areas=areas, perims=perims)

    def breakdown(self, params: MeasureParams) -> ScoreBreakdown:
        return breakdown_from_parts(self.pops, self.areas, self.perims, params)

    def j_compact(self) -> float:
        if any(a <= 0 for a in self.areas):
            return 0.0
        return sum(p * p / a for p, a in zip(self.perims, self.areas))

    def total_log_tau(self) -> float:
        if self.forest.log_tau is None:
            raise StateError("log tree-count cache missing")
        return sum(self.forest.log_tau)

    def verify_caches(self, g: Graph, params: MeasureParams, tol: float = 1e-9) -> None:
        """Compare incrementally maintained caches against a fresh recomputation."""
        labels = self.forest.assignment.labels
        n = self.forest.assignment.n
        if self.pops != partition_weights(g, labels, n):
            raise StateError("population cache diverged from recomputation")
        areas, perims = district_geometry(g, labels, n)
        for got, want in zip(self.areas + self.perims, areas + perims):
            if abs(got - want) > tol:
                raise StateError("geometry cache diverged from recomputation")
        if self.forest.log_tau is not None:
            for k, t in enumerate(self.forest.trees):
                want = log_tree_count(induced_subgraph(g, t.vertices))
                if abs(self.forest.log_tau[k] - want) > tol:
                    raise StateError(f"log tree-count cache diverged for partition {k}")
        for k, t in enumerate(self.forest.trees):
            if not params.pop_window.contains(t.total_pop):
                raise StateError(f"partition {k} population left the window")


def initial_forest(g: Graph, n: int, window: PopWindow, rng: RngStream,
                   retries: int = DEFAULT_INIT_RETRIES,
                   restarts: int = DEFAULT_INIT_RESTARTS) -> SpanningForest:
    """Recursive splitting: draw a tree on the whole graph, carve off one
    balanced district, redraw on the remainder, repeat.

    A level that fails to find a feasible split redraws its tree up to
    ``retries`` times before the whole construction starts over.
    """
    if not window.lo * n <= g.total_pop <= window.hi * n:
        raise ValueError("population window cannot accommodate n balanced districts")
    if n == 1:
        sub = induced_subgraph(g, range(g.num_nodes))
        tree = root_tree(sub.nodes, wilson_ust(sub, rng), g, 0)
        return SpanningForest.from_trees(g, [tree])

    for _ in range(restarts):
        remaining = frozenset(range(g.num_nodes))
        trees = []
        level = n
        failed = False
        while level > 1:
            for _ in range(retries):
                sub = induced_subgraph(g, remaining)
                tree = root_tree(remaining, wilson_ust(sub, rng), g, min(remaining))
                lo_rest = window.lo * (level - 1)
                hi_rest = window.hi * (level - 1)
                candidates = sorted(
                    e for e, below in tree.subtree_pop.items()
                    if window.contains(below)
                    and lo_rest <= tree.total_pop - below <= hi_rest
                )
                if not candidates:
                    continue
                cut = candidates[rng.randint(len(candidates))]
                first, second = split_tree(tree, cut, g)
                # the split-off district is the side below the cut edge
                er = g.edges[cut]
                child = er.u if tree.parent.get(er.u, (None, None))[1] == cut else er.v
                piece, rest = (first, second) if child in first.vertices else (second, first)
                trees.append(piece)
                remaining = rest.vertices
                level -= 1
                if level == 1:
                    trees.append(rest)
                break
            else:
                failed = True
                break
        if not failed:
            return SpanningForest.from_trees(g, trees)
    raise StateError(
        f"no balanced initial forest found after {restarts} restarts; "
        "the window may be too tight for this graph"
    )


def mh_step(state: ChainState, params: MeasureParams, method: PairMethod,
            g: Graph, rng: RngStream, stats: ChainStats):
    """One Metropolis-Hastings step; returns (state, accepted)."""
    stats.proposals += 1
    prop = propose(state.forest, method, params.pop_window, g, rng)
    if prop.self_loop:
        stats.self_loops += 1
        return state, False

    new_log_tau = None
    if params.needs_tree_counts or state.forest.log_tau is not None:
        # the cache is also kept warm at gamma = 0 when a ladder may swap
        # this state onto a rung that needs it
        new_log_tau = (
            log_tree_count(induced_subgraph(g, prop.new_trees[0].vertices)),
            log_tree_count(induced_subgraph(g, prop.new_trees[1].vertices)),
        )
    log_a = log_acceptance(state.forest, prop, params, g, new_log_tau=new_log_tau)
    u = rng.random()
    if (math.log(u) if u > 0.0 else -math.inf) >= log_a:
        return state, False

    stats.accepts += 1
    i, j = prop.pair
    tree_i, tree_j = prop.new_trees
    pair_tau = new_log_tau if state.forest.log_tau is not None else None
    forest = state.forest.replace_pair(g, i, j, tree_i, tree_j, pair_tau)
    pops = list(state.pops)
    pops[i] = tree_i.total_pop
    pops[j] = tree_j.total_pop
    areas, perims = district_geometry(g, forest.assignment.labels,
                                      forest.assignment.n, only=(i, j))
    new_areas = list(state.areas)
    new_perims = list(state.perims)
    new_areas[i], new_areas[j] = areas[i], areas[j]
    new_perims[i], new_perims[j] = perims[i], perims[j]
    return ChainState(forest=forest, pops=pops, areas=new_areas, perims=new_perims), True


def snapshot_record(chain_id: int, step: int, state: ChainState,
                    params: MeasureParams, accepted: bool) -> dict:
    s = state.breakdown(params)
    record = {
        "chain": chain_id,
        "step": step,
        "labels": list(state.forest.assignment.labels),
        "j_pop": 0 if s.j_pop == 0 else "inf",
        "j_compact": s.j_compact,
        "accepted": accepted,
    }
    if state.forest.log_tau is not None:
        record["log_tau"] = list(state.forest.log_tau)
    return record


def run_chain(g: Graph, cfg: ChainConfig, sink) -> ChainStats:
    """Run one chain; ``sink`` is called with one record per snapshot."""
    rng = RngStream(cfg.seed, "chain", cfg.chain_id)
    forest = initial_forest(g, cfg.n, cfg.params.pop_window, rng.spawn("init"),
                            cfg.init_retries, cfg.init_restarts)
    state = ChainState.from_forest(g, forest, cfg.params)
    steps_rng = rng.spawn("steps")
    stats = ChainStats()

    sink(snapshot_record(cfg.chain_id, 0, state, cfg.params, False))
    for step in range(1, cfg.steps + 1):
        state, accepted = mh_step(state, cfg.params, cfg.method, g, steps_rng, stats)
        if step % cfg.snapshot_every == 0:
            if cfg.check_invariants:
                state.verify_caches(g, cfg.params)
            sink(snapshot_record(cfg.chain_id, step, state, cfg.params, accepted))
    return stats


def ladder_swap(state_a: ChainState, state_b: ChainState,
                params_a: MeasureParams, params_b: MeasureParams,
                g: Graph, rng: RngStream):
    """Metropolized state exchange between two rungs.

    The swap ratio uses only the cached compactness scores and log tree
    counts; both states must additionally satisfy both rungs' hard
    constraints or the swap is rejected outright.  Rungs share the base
    inverse temperature, which scales the compactness term (at beta = 1 the
    ratio reduces to exp((w_a - w_b) * (Jc_a - Jc_b)) times the tree-count
    part).
    """
    if params_a.beta != params_b.beta:
        raise ValueError("ladder rungs must share the base inverse temperature")
    needs_tau = params_a.gamma != 0 or params_b.gamma != 0
    if needs_tau and (state_a.forest.log_tau is None or state_b.forest.log_tau is None):
        raise StateError("swap with gamma != 0 requires log tree-count caches")

    for st in (state_a, state_b):
        for params in (params_a, params_b):
            if st.breakdown(params).total == math.inf:
                return state_a, state_b, False

    log_ratio = params_a.beta * (params_a.w_c - params_b.w_c) * (
        state_a.j_compact() - state_b.j_compact()
    )
    if needs_tau:
        log_ratio += (params_a.gamma - params_b.gamma) * (
            state_a.total_log_tau() - state_b.total_log_tau()
        )
    u = rng.random()
    if (math.log(u) if u > 0.0 else -math.inf) < min(0.0, log_ratio):
        return state_b, state_a, True
    return state_a, state_b, False


def run_ladder(g: Graph, cfg: LadderConfig, sink) -> list:
    """Run one chain per rung in lockstep, attempting swaps every swap_every
    steps at a uniformly chosen adjacent rung pair.  Records are tagged with
    the rung index as their chain id."""
    base = cfg.base
    n_rungs = len(cfg.rungs)
    rung_params = [cfg.rung_params(k) for k in range(n_rungs)]
    needs_tau = any(p.needs_tree_counts for p in rung_params)

    states = []
    rngs = []
    stats = [ChainStats() for _ in range(n_rungs)]
    for k in range(n_rungs):
        rng = RngStream(base.seed, "ladder-rung", k)
        forest = initial_forest(g, base.n, base.params.pop_window, rng.spawn("init"),
                                base.init_retries, base.init_restarts)
        params_for_cache = rung_params[k] if not needs_tau else replace(rung_params[k], gamma=1.0)
        states.append(ChainState.from_forest(g, forest, params_for_cache))
        rngs.append(rng.spawn("steps"))
        sink(snapshot_record(k, 0, states[k], rung_params[k], False))

    swap_rng = RngStream(base.seed, "ladder-swap")
    for step in range(1, base.steps + 1):
        accepted_flags = []
        for k in range(n_rungs):
            states[k], acc = mh_step(states[k], rung_params[k], base.method,
                                     g, rngs[k], stats[k])
            accepted_flags.append(acc)
        if step % cfg.swap_every == 0:
            k = swap_rng.randint(n_rungs - 1)
            stats[k].swap_attempts += 1
            states[k], states[k + 1], swapped = ladder_swap(
                states[k], states[k + 1], rung_params[k], rung_params[k + 1], g, swap_rng
            )
            if swapped:
                stats[k].swap_accepts += 1
        if step % base.snapshot_every == 0:
            for k in range(n_rungs):
                if base.check_invariants:
                    states[k].verify_caches(g, rung_params[k])
                sink(snapshot_record(k, step, states[k], rung_params[k], accepted_flags[k]))
    return stats
