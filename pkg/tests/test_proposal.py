import math
from collections import Counter

import pytest

from frcom.errors import StateError
from frcom.forest import PopWindow, SpanningForest, root_tree
from frcom.graph import Assignment
from frcom.oracle import exact_proposal_distribution, forest_key
from frcom.proposal import PairMethod, effective_boundary, log_proposal_ratio, \
    pair_probability, propose, sample_pair
from frcom.rng import RngStream


def p3_forest(g):
    t0 = root_tree({0}, set(), g, 0)
    t1 = root_tree({1, 2}, {1}, g, 1)
    return SpanningForest.from_trees(g, [t0, t1])


def chain3(p3):
    # three singleton partitions on a path: neighbor counts 1, 2, 1
    return Assignment(p3, [0, 1, 2], 3)


def test_pair_probability_uniform_neighbor(p3):
    a = chain3(p3)
    m = PairMethod.UNIFORM_NEIGHBOR
    assert pair_probability(m, p3, a, 0, 1) == pytest.approx((1 / 3) * (1 / 1 + 1 / 2))
    assert pair_probability(m, p3, a, 1, 2) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="not adjacent"):
        pair_probability(m, p3, a, 0, 2)


def test_pair_probability_boundary_weighted(p3):
    a = chain3(p3)
    m = PairMethod.BOUNDARY_WEIGHTED
    assert pair_probability(m, p3, a, 0, 1) == pytest.approx(0.5)
    assert pair_probability(m, p3, a, 2, 1) == pytest.approx(0.5)


def test_pair_probability_two_partitions(p3):
    a = Assignment(p3, [0, 1, 1], 2)
    for m in PairMethod:
        assert pair_probability(m, p3, a, 0, 1) == pytest.approx(1.0)


def test_pair_probability_sums_to_one(grid33):
    a = Assignment(grid33, [0, 0, 1, 0, 0, 1, 2, 2, 2], 3)
    from frcom.graph import partition_adjacency
    pairs = partition_adjacency(grid33, a)
    for m in PairMethod:
        total = sum(pair_probability(m, grid33, a, i, j) for i, j in pairs)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_sample_pair_frequencies(p3):
    a = chain3(p3)
    rng = RngStream(21, "pairs")
    trials = 40_000
    for m, expected in ((PairMethod.UNIFORM_NEIGHBOR, 0.5),
                        (PairMethod.BOUNDARY_WEIGHTED, 0.5)):
        counts = Counter(sample_pair(m, p3, a, rng) for _ in range(trials))
        assert set(counts) == {(0, 1), (1, 2)}
        se = math.sqrt(expected * (1 - expected) / trials)
        assert abs(counts[(0, 1)] / trials - expected) < 4 * se


def test_sample_pair_boundary_weighted_uneven(grid23):
    # 3-partition with boundary counts 1:2:1 across the pairs
    from frcom.graph import partition_adjacency
    a = Assignment(grid23, [0, 0, 1, 2, 2, 2], 3)
    counts = partition_adjacency(grid23, a)
    total = sum(counts.values())
    rng = RngStream(22, "uneven")
    trials = 40_000
    freq = Counter(sample_pair(PairMethod.BOUNDARY_WEIGHTED, grid23, a, rng)
                   for _ in range(trials))
    for pair, c in counts.items():
        expected = c / total
        se = math.sqrt(expected * (1 - expected) / trials)
        assert abs(freq[pair] / trials - expected) < 4 * se


def test_effective_boundary_p3(p3):
    f = p3_forest(p3)
    w = PopWindow(1, 2)
    assert effective_boundary(f.trees[0], f.trees[1], p3, w) == pytest.approx(0.5)


def test_effective_boundary_unique_cut_counts_edges(grid23):
    # window [3,3], top/bottom rows: every joined tree is cut only at the
    # edge that recreates the split, so the boundary equals the count of
    # connecting edges... only when each joined tree truly has one valid cut.
    t_top = root_tree({0, 1, 2}, {0, 2}, grid23, 0)
    t_bot = root_tree({3, 4, 5}, {5, 6}, grid23, 3)
    w = PopWindow(3, 3)
    value = effective_boundary(t_top, t_bot, grid23, w)
    connecting = [e.id for e in grid23.edges
                  if {e.u, e.v} in ({0, 3}, {1, 4}, {2, 5})]
    assert len(connecting) == 3
    # each term is 1/|E_c| of its joined tree, so the sum is at most 3
    assert 0 < value <= 3.0


def test_effective_boundary_window_violation_raises(p3):
    f = p3_forest(p3)
    with pytest.raises(StateError, match="violates the population window"):
        effective_boundary(f.trees[0], f.trees[1], p3, PopWindow(3, 3))


def test_propose_self_loop_when_no_cut(p3):
    # window [3,3]: no cut of the merged 3-path leaves both sides at pop 3
    f = p3_forest(p3)
    rng = RngStream(23, "selfloop")
    for _ in range(50):
        prop = propose(f, PairMethod.UNIFORM_NEIGHBOR, PopWindow(3, 3), p3, rng)
        assert prop.self_loop
        assert prop.pair == (0, 1)


def test_propose_respects_window(grid23):
    labels = [0, 0, 0, 1, 1, 1]
    trees = [root_tree({0, 1, 2}, {0, 2}, grid23, 0),
             root_tree({3, 4, 5}, {5, 6}, grid23, 3)]
    f = SpanningForest.from_trees(grid23, trees)
    rng = RngStream(24, "window")
    w = PopWindow(3, 3)
    moved = 0
    for _ in range(300):
        prop = propose(f, PairMethod.UNIFORM_NEIGHBOR, w, grid23, rng)
        if prop.self_loop:  # merged tree happened to have no balanced cut
            continue
        moved += 1
        assert prop.new_trees[0].total_pop == 3
        assert prop.new_trees[1].total_pop == 3
        # pieces partition the merged subgraph
        assert prop.new_trees[0].vertices | prop.new_trees[1].vertices == frozenset(range(6))
    assert moved > 100


def test_propose_matches_oracle_distribution_p3(p3):
    f = p3_forest(p3)
    w = PopWindow(1, 2)
    exact = exact_proposal_distribution(f, PairMethod.UNIFORM_NEIGHBOR, w, p3)
    assert sum(exact.values()) == pytest.approx(1.0, abs=1e-12)

    rng = RngStream(25, "freq")
    trials = 60_000
    counts = Counter()
    for _ in range(trials):
        prop = propose(f, PairMethod.UNIFORM_NEIGHBOR, w, p3, rng)
        if prop.self_loop:
            counts[forest_key(f)] += 1
        else:
            i, j = prop.pair
            nf = f.replace_pair(p3, i, j, *prop.new_trees)
            counts[forest_key(nf)] += 1
    assert set(counts) == set(exact)
    for key, p in exact.items():
        se = math.sqrt(p * (1 - p) / trials)
        assert abs(counts[key] / trials - p) < 4 * se


def test_log_proposal_ratio_symmetric_case(p3):
    f = p3_forest(p3)
    rng = RngStream(26, "ratio")
    w = PopWindow(1, 2)
    seen = set()
    for _ in range(50):
        prop = propose(f, PairMethod.UNIFORM_NEIGHBOR, w, p3, rng)
        assert not prop.self_loop
        # both states have one connecting edge, boundary 1/2, pair prob 1
        assert log_proposal_ratio(prop) == pytest.approx(0.0, abs=1e-12)
        seen.add(frozenset(prop.new_trees[0].vertices))
    assert seen == {frozenset({0}), frozenset({0, 1})}


def test_log_proposal_ratio_rejects_self_loop(p3):
    f = p3_forest(p3)
    rng = RngStream(27, "sl")
    prop = propose(f, PairMethod.UNIFORM_NEIGHBOR, PopWindow(1, 2), p3, rng)
    from frcom.proposal import Proposal
    with pytest.raises(ValueError):
        log_proposal_ratio(Proposal(pair=(0, 1), self_loop=True))


def test_reverse_reachability(grid44):
    # every accepted proposal leaves a strictly positive reverse boundary
    from frcom.engine import initial_forest
    w = PopWindow(8, 8)
    rng = RngStream(28, "reverse")
    f = initial_forest(grid44, 2, w, rng.spawn("init"))
    for _ in range(200):
        prop = propose(f, PairMethod.BOUNDARY_WEIGHTED, w, grid44, rng)
        if prop.self_loop:
            continue
        assert prop.log_bwd_boundary > -math.inf
        assert prop.log_fwd_boundary > -math.inf
        i, j = prop.pair
        f = f.replace_pair(grid44, i, j, *prop.new_trees)
