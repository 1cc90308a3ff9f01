"""Target distribution over spanning forests and the acceptance rule.

The unnormalized log target is -beta * J(partition) - gamma * sum(log tree
counts), where J adds a hard population window, an optional hard compactness
cap, and a soft compactness score w_c * sum(perimeter^2 / area).  All
probability arithmetic stays in log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import StateError
from .forest import PopWindow, SpanningForest
from .graph import Assignment, Graph, induced_subgraph, partition_weights
from .proposal import Proposal, log_proposal_ratio
from .treecount import log_tree_count

INF = math.inf


@dataclass(frozen=True)
class MeasureParams:
    """Everything defining the target measure.

    beta scales the score J, gamma tempers the spanning-tree-count bias
    (0 = uniform over forests, 1 = tree counts integrate out of the induced
    partition distribution).  compactness_cap, when set, is the maximum
    allowed perimeter^2/area per district (a value of 110 matches a
    Polsby-Popper floor of 4*pi/110 ~ 0.114); violations score infinity.
    """

    beta: float
    gamma: float
    w_c: float
    pop_window: PopWindow
    compactness_cap: float = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.beta > 1:
            warnings.warn("beta > 1 is outside the usual [0, 1] range", stacklevel=2)
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.w_c < 0:
            raise ValueError("w_c must be nonnegative")
        if self.pop_window.lo > self.pop_window.hi:
            raise ValueError("population window is empty")
        if self.compactness_cap is not None and self.compactness_cap <= 0:
            raise ValueError("compactness_cap must be positive")

    @property
    def needs_tree_counts(self) -> bool:
        return self.gamma != 0


@dataclass(frozen=True)
class ScoreBreakdown:
    j_pop: float      # 0 or inf
    j_compact: float  # sum of perimeter^2 / area over districts
    total: float      # j_pop + w_c * j_compact, or inf on a cap violation


def district_geometry(g: Graph, labels, n: int, only=None):
    """Per-district (area, perimeter) built from node and edge attributes.

    A district's perimeter is the border length of its crossing edges plus
    the external perimeter of its nodes.  With ``only`` given, entries
    outside that set are left at zero.
    """
    wanted = set(range(n)) if only is None else set(only)
    areas = [0.0] * n
    perims = [0.0] * n
    for v, lab in enumerate(labels):
        if lab in wanted:
            areas[lab] += g.nodes[v].area
            perims[lab] += g.nodes[v].external_perimeter
    for e in g.edges:
        li, lj = labels[e.u], labels[e.v]
        if li != lj:
            if li in wanted:
                perims[li] += e.border_length
            if lj in wanted:
                perims[lj] += e.border_length
    return areas, perims


def breakdown_from_parts(pops, areas, perims, params: MeasureParams) -> ScoreBreakdown:
    window = params.pop_window
    j_pop = 0.0 if all(window.contains(p) for p in pops) else INF

    geometry_needed = params.w_c > 0 or params.compactness_cap is not None
    j_compact = 0.0
    cap_violated = False
    if any(area <= 0 for area in areas):
        if geometry_needed:
            raise ValueError("district has zero area but compactness is being scored")
        # geometry absent and unused: report a zero compactness score
    else:
        for area, perim in zip(areas, perims):
            ratio = perim * perim / area
            j_compact += ratio
            if params.compactness_cap is not None and ratio > params.compactness_cap:
                cap_violated = True

    total = j_pop + params.w_c * j_compact
    if cap_violated:
        total = INF
    return ScoreBreakdown(j_pop=j_pop, j_compact=j_compact, total=total)


def score(g: Graph, a: Assignment, params: MeasureParams) -> ScoreBreakdown:
    pops = partition_weights(g, a.labels, a.n)
    areas, perims = district_geometry(g, a.labels, a.n)
    return breakdown_from_parts(pops, areas, perims, params)


def log_target(forest: SpanningForest, cached_log_tau, params: MeasureParams,
               g: Graph) -> float:
    """Unnormalized log probability of a forest state.

    Hard constraints (J = inf) force -inf at every temperature.  Any two
    forests inducing the same partition score identically: nothing here
    depends on the trees themselves.
    """
    s = score(g, forest.assignment, params)
    if s.total == INF:
        return -INF
    value = -params.beta * s.total
    if params.gamma != 0:
        if cached_log_tau is None:
            raise StateError("gamma != 0 requires per-partition log tree counts")
        value -= params.gamma * sum(cached_log_tau)
    return value


def log_acceptance(state: SpanningForest, prop: Proposal, params: MeasureParams,
                   g: Graph, new_log_tau=None) -> float:
    """log of the accept probability for a non-self-loop proposal.

    Only the two affected partitions' tree counts enter; they are taken from
    the state's cache on the current side and computed (or passed in) for
    the proposed side.  Never touches the merged subgraph's tree count.
    """
    if prop.self_loop:
        raise ValueError("self-loop proposals are not accepted or rejected")
    i, j = prop.pair
    new_i, new_j = prop.new_trees

    labels = list(state.assignment.labels)
    for v in new_i.vertices:
        labels[v] = i
    for v in new_j.vertices:
        labels[v] = j
    new_assignment = Assignment(g, labels, state.assignment.n)

    s_new = score(g, new_assignment, params)
    if s_new.total == INF:
        return -INF
    s_old = score(g, state.assignment, params)
    if s_old.total == INF:
        raise StateError("current state violates a hard constraint")

    value = -params.beta * (s_new.total - s_old.total) + log_proposal_ratio(prop)
    if params.gamma != 0:
        if state.log_tau is None:
            raise StateError("gamma != 0 requires the state's log tree-count cache")
        if new_log_tau is None:
            new_log_tau = (
                log_tree_count(induced_subgraph(g, new_i.vertices)),
                log_tree_count(induced_subgraph(g, new_j.vertices)),
            )
        old_sum = state.log_tau[i] + state.log_tau[j]
        value += params.gamma * (old_sum - new_log_tau[0] - new_log_tau[1])
    return min(0.0, value)
