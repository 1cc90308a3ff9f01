import itertools

import numpy as np
import pytest

from frcom.errors import SizeGuardError
from frcom.fixtures import grid_graph, random_connected_graph
from frcom.forest import PopWindow
from frcom.graph import Assignment, induced_subgraph
from frcom.measure import MeasureParams
from frcom.oracle import all_spanning_trees, enumerate_partitions, \
    enumerate_partitions_label_filter, exact_distribution, exact_forest_distribution, \
    exact_transition, forest_key, forest_space
from frcom.proposal import PairMethod
from frcom.rng import RngStream
from frcom.treecount import brute_count_trees


def mp(beta=0.0, gamma=0.0, w_c=0.0, window=(1, 2), cap=None):
    return MeasureParams(beta=beta, gamma=gamma, w_c=w_c,
                         pop_window=PopWindow(*window), compactness_cap=cap)


def test_enumerate_p3(p3):
    cat = enumerate_partitions(p3, 2, PopWindow(1, 2))
    assert cat.partitions == ((0, 0, 1), (0, 1, 1))
    cat = enumerate_partitions(p3, 3, PopWindow(1, 1))
    assert cat.partitions == ((0, 1, 2),)


def test_enumerate_2x3_balanced(grid23):
    cat = enumerate_partitions(grid23, 2, PopWindow(3, 3))
    # brute force over all 2-colorings with connectivity check
    brute = enumerate_partitions_label_filter(grid23, 2, PopWindow(3, 3))
    assert cat.partitions == brute.partitions
    assert len(cat) == 3


def test_enumeration_strategies_agree(p3, c4, k4, grid23, grid33):
    cases = [(p3, 2, PopWindow(1, 2)), (c4, 2, PopWindow(1, 3)),
             (k4, 2, PopWindow(2, 2)), (grid23, 2, PopWindow(2, 4)),
             (grid23, 3, PopWindow(2, 2)), (grid33, 3, PopWindow(3, 3))]
    rng = RngStream(41, "enum")
    for _ in range(6):
        g = random_connected_graph(8, rng)
        cases.append((g, 2, PopWindow.from_deviation(g.total_pop, 2, 0.4)))
    for g, n, window in cases:
        a = enumerate_partitions(g, n, window)
        b = enumerate_partitions_label_filter(g, n, window)
        assert a.partitions == b.partitions


def test_enumerate_guard():
    g = grid_graph(5, 7)
    with pytest.raises(SizeGuardError):
        enumerate_partitions(g, 5, PopWindow(7, 7))


def test_catalog_entries_are_valid(grid23):
    window = PopWindow(2, 4)
    cat = enumerate_partitions(grid23, 2, window)
    for labels in cat.partitions:
        a = Assignment(grid23, labels, 2)  # validates connectivity + coverage
        from frcom.graph import partition_weights
        assert all(window.contains(p) for p in partition_weights(grid23, labels, 2))
        from frcom.graph import canonical_labels
        assert canonical_labels(labels) == labels


def test_exact_distribution_uniform_at_gamma1(grid23):
    cat = enumerate_partitions(grid23, 2, PopWindow(3, 3))
    probs = exact_distribution(cat, grid23, mp(gamma=1.0, window=(3, 3)))
    assert np.allclose(probs, 1.0 / len(cat))


def test_exact_distribution_tree_weighted_at_gamma0(grid23):
    cat = enumerate_partitions(grid23, 2, PopWindow(2, 4))
    probs = exact_distribution(cat, grid23, mp(window=(2, 4)))
    taus = []
    for labels in cat.partitions:
        tau = 1
        for k in range(2):
            members = [v for v, lab in enumerate(labels) if lab == k]
            tau *= brute_count_trees(induced_subgraph(grid23, members))
        taus.append(tau)
    assert np.allclose(probs, np.array(taus) / sum(taus), atol=1e-12)


def test_all_spanning_trees_counts(c4, grid23):
    assert len(all_spanning_trees(induced_subgraph(c4, range(4)))) == 4
    assert len(all_spanning_trees(induced_subgraph(grid23, range(6)))) == 15


def test_forest_space_size(grid23):
    # sum over partitions of the product of piece tree counts
    window = PopWindow(2, 4)
    cat = enumerate_partitions(grid23, 2, window)
    forests = forest_space(grid23, cat)
    expected = 0
    for labels in cat.partitions:
        tau = 1
        for k in range(2):
            members = [v for v, lab in enumerate(labels) if lab == k]
            tau *= brute_count_trees(induced_subgraph(grid23, members))
        expected += tau
    assert len(forests) == expected
    keys = {forest_key(f) for f in forests}
    assert len(keys) == len(forests)


def _kernel_and_pi(g, n, window, params, method):
    cat = enumerate_partitions(g, n, window)
    forests = forest_space(g, cat)
    pi = exact_forest_distribution(g, cat, params, forests)
    kernel = {}
    for f in forests:
        kernel[forest_key(f)] = exact_transition(f, method, window, g, params)
    return forests, pi, kernel


FIXTURE_CASES = [
    ("p3", 2, (1, 2)),
    ("c4", 2, (1, 3)),
    ("k4", 2, (2, 2)),
    ("grid23", 2, (3, 3)),
    ("grid23", 2, (2, 4)),
    ("grid23", 3, (2, 2)),
]


@pytest.mark.parametrize("fixture,n,window", FIXTURE_CASES)
def test_kernel_rows_sum_to_one(fixture, n, window, request):
    g = request.getfixturevalue(fixture)
    _, _, kernel = _kernel_and_pi(g, n, PopWindow(*window), mp(window=window),
                                  PairMethod.UNIFORM_NEIGHBOR)
    for row in kernel.values():
        assert abs(sum(row.values()) - 1.0) < 1e-12


@pytest.mark.parametrize("gamma", [0.0, 1.0])
@pytest.mark.parametrize("method", list(PairMethod))
def test_detailed_balance_2x3(grid23, gamma, method):
    window = (2, 4)
    params = mp(gamma=gamma, beta=1.0, w_c=0.45, window=window)
    forests, pi, kernel = _kernel_and_pi(grid23, 2, PopWindow(*window), params, method)
    keys = [forest_key(f) for f in forests]
    for ka, kb in itertools.combinations(keys, 2):
        lhs = pi[ka] * kernel[ka].get(kb, 0.0)
        rhs = pi[kb] * kernel[kb].get(ka, 0.0)
        assert abs(lhs - rhs) <= 1e-12 * max(lhs, rhs, 1e-300)


def test_stationary_vector(grid23):
    params = mp(gamma=0.0, window=(2, 4))
    forests, pi, kernel = _kernel_and_pi(grid23, 2, PopWindow(2, 4), params,
                                         PairMethod.UNIFORM_NEIGHBOR)
    keys = [forest_key(f) for f in forests]
    err = 0.0
    for kb in keys:
        flow = sum(pi[ka] * kernel[ka].get(kb, 0.0) for ka in keys)
        err += abs(flow - pi[kb])
    assert err <= 1e-10


def test_transition_matches_lemma_lift(grid23):
    # kernel restricted to a partition's forests is uniform across them in
    # the stationary distribution: equal pi for equal partitions
    params = mp(gamma=0.7, beta=0.3, window=(2, 4))
    cat = enumerate_partitions(grid23, 2, PopWindow(2, 4))
    forests = forest_space(grid23, cat)
    pi = exact_forest_distribution(grid23, cat, params, forests)
    by_partition = {}
    for f in forests:
        key = forest_key(f)
        by_partition.setdefault(key[0], []).append(pi[key])
    for values in by_partition.values():
        assert max(values) - min(values) < 1e-15


def test_frozen_window_all_mass_on_self_loop(p3):
    from frcom.forest import SpanningForest, root_tree
    t0 = root_tree({0}, set(), p3, 0)
    t1 = root_tree({1, 2}, {1}, p3, 1)
    f = SpanningForest.from_trees(p3, [t0, t1])
    row = exact_transition(f, PairMethod.UNIFORM_NEIGHBOR, PopWindow(3, 3), p3,
                           mp(window=(1, 2)))
    assert row == {forest_key(f): pytest.approx(1.0)}
