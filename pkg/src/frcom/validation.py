"""Runnable correctness suites: oracle equivalence, sampler uniformity,
detailed balance, stationarity, tempering, and reproducibility checks.

Each criterion is a function taking a shared context (a plain dict used to
reuse expensive chain runs) and returning a CheckResult with its pinned
tolerances baked in.  The CLI ``validate`` command and the acceptance test
module both run these.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass, field

from scipy import stats as sstats

from .engine import ChainState, ChainStats, initial_forest, ladder_swap, mh_step
from .fixtures import complete_graph, cycle_graph, grid_graph, path_graph, \
    random_connected_graph, with_unit_geometry
from .forest import PopWindow, SpanningForest, find_cut_edges, joined_cut_edges, root_tree
from .graph import canonical_labels, induced_subgraph
from .measure import MeasureParams
from .observables import decade_means, partition_tv, power_law_fit
from .oracle import all_spanning_trees, enumerate_partitions, exact_distribution, \
    exact_forest_distribution, exact_proposal_distribution, exact_transition, \
    forest_key, forest_space
from .proposal import PairMethod, effective_boundary, propose
from .rng import RngStream
from .treecount import brute_count_trees, log_tree_count

SEED = 20_2608


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extras = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"{status} {self.name} ({self.seconds:.1f}s) {extras}"


def _timed(name, fn):
    t0 = time.time()
    passed, details = fn()
    return CheckResult(name=name, passed=passed, seconds=time.time() - t0, details=details)


# -- 1. Kirchhoff correctness -------------------------------------------------

def check_kirchhoff(ctx) -> CheckResult:
    def run():
        fixtures = [
            (path_graph(3), 1), (cycle_graph(4), 4),
            (complete_graph(4), 16), (grid_graph(2, 3), 15),
        ]
        worst = 0.0
        for g, expected in fixtures:
            sub = induced_subgraph(g, range(g.num_nodes))
            assert brute_count_trees(sub) == expected
            worst = max(worst, abs(log_tree_count(sub) - math.log(expected)))
        rng = RngStream(SEED, "kirchhoff")
        for _ in range(1000):
            g = random_connected_graph(7, rng)
            sub = induced_subgraph(g, range(g.num_nodes))
            worst = max(worst, abs(log_tree_count(sub) - math.log(brute_count_trees(sub))))
        return worst <= 1e-9, {"graphs": 1004, "worst_abs_err": f"{worst:.2e}"}

    return _timed("kirchhoff", run)


# -- 2. Wilson uniformity ------------------------------------------------------

def check_wilson_uniformity(ctx) -> CheckResult:
    def run():
        details = {}
        ok = True
        for label, g, draws in (("c4", cycle_graph(4), 100_000),
                                ("grid2x3", grid_graph(2, 3), 100_000)):
            sub = induced_subgraph(g, range(g.num_nodes))
            trees = {t: k for k, t in enumerate(all_spanning_trees(sub))}
            rng = RngStream(SEED, "wilson", label)
            counts = Counter()
            from .wilson import wilson_ust
            for _ in range(draws):
                counts[trees[frozenset(wilson_ust(sub, rng))]] += 1
            observed = [counts[k] for k in range(len(trees))]
            _, p = sstats.chisquare(observed)
            details[f"{label}_p"] = f"{p:.4f}"
            details[f"{label}_trees"] = len(trees)
            ok = ok and p >= 0.001
        return ok, details

    return _timed("wilson-uniformity", run)


# -- 3. Cut-search equivalence -------------------------------------------------

def _cut_fixtures():
    return [("p3", path_graph(3)), ("c4", cycle_graph(4)),
            ("k4", complete_graph(4)), ("grid2x3", grid_graph(2, 3))]


def check_cut_search(ctx) -> CheckResult:
    def run():
        combos = 0
        mismatches = 0
        for _, g in _cut_fixtures():
            windows = [PopWindow(1, g.total_pop - 1),
                       PopWindow.from_deviation(g.total_pop, 2, 0.34),
                       PopWindow(g.total_pop, g.total_pop)]
            wide = PopWindow(1, g.total_pop - 1)
            cat = enumerate_partitions(g, 2, wide)
            for labels in cat.partitions:
                parts = [[v for v, lab in enumerate(labels) if lab == k] for k in range(2)]
                connecting = [e.id for e in g.edges if labels[e.u] != labels[e.v]]
                trees_i = all_spanning_trees(induced_subgraph(g, parts[0]))
                trees_j = all_spanning_trees(induced_subgraph(g, parts[1]))
                for ei, ej in itertools.product(trees_i, trees_j):
                    ti = root_tree(parts[0], ei, g, min(parts[0]))
                    tj = root_tree(parts[1], ej, g, min(parts[1]))
                    for e in connecting:
                        joined = root_tree(set(parts[0]) | set(parts[1]),
                                           set(ei) | set(ej) | {e}, g, min(parts[0]))
                        for window in windows:
                            fast = joined_cut_edges(ti, tj, e, g, window)
                            naive = find_cut_edges(joined, joined.total_pop, window)
                            combos += 1
                            if fast != naive:
                                mismatches += 1
        return mismatches == 0, {"combinations": combos, "mismatches": mismatches}

    return _timed("cut-search", run)


# -- 4. Proposal-probability exactness ------------------------------------------

def _two_district_forest(g, labels):
    parts = [[v for v, lab in enumerate(labels) if lab == k] for k in range(2)]
    trees = []
    rng = RngStream(SEED, "seed-trees", tuple(labels))
    from .wilson import wilson_ust
    for part in parts:
        sub = induced_subgraph(g, part)
        trees.append(root_tree(part, wilson_ust(sub, rng), g, min(part)))
    return SpanningForest.from_trees(g, trees)


def _analytic_proposal_distribution(forest, window, g, support):
    """Production-formula route: pair prob * 1/tau(merged) * effective boundary."""
    self_key = forest_key(forest)
    log_tau_merged = log_tree_count(induced_subgraph(g, range(g.num_nodes)))
    out = {}
    for key in support:
        if key == self_key:
            continue
        labels, edges = key
        parts = [[v for v, lab in enumerate(labels) if lab == k] for k in range(2)]
        trees = []
        for part in parts:
            members = set(part)
            own = {e for e in edges
                   if g.edges[e].u in members and g.edges[e].v in members}
            trees.append(root_tree(part, own, g, min(part)))
        bound = effective_boundary(trees[0], trees[1], g, window)
        out[key] = math.exp(-log_tau_merged) * bound
    out[self_key] = 1.0 - sum(out.values())
    return out


def check_proposal_exactness(ctx) -> CheckResult:
    def run():
        cases = [
            ("p3", path_graph(3), (0, 1, 1), PopWindow(1, 2), 1_000_000),
            ("grid2x3", grid_graph(2, 3), (0, 0, 0, 1, 1, 1), PopWindow(3, 3), 1_000_000),
        ]
        details = {}
        ok = True
        for label, g, labels, window, trials in cases:
            forest = _two_district_forest(g, labels)
            exact = exact_proposal_distribution(forest, PairMethod.UNIFORM_NEIGHBOR,
                                                window, g)
            analytic = _analytic_proposal_distribution(forest, window, g, exact.keys())
            worst_gap = max(abs(exact[k] - analytic[k]) for k in exact)
            details[f"{label}_analytic_gap"] = f"{worst_gap:.2e}"
            ok = ok and worst_gap <= 1e-9

            rng = RngStream(SEED, "prop-freq", label)
            counts = Counter()
            for _ in range(trials):
                prop = propose(forest, PairMethod.UNIFORM_NEIGHBOR, window, g, rng)
                if prop.self_loop:
                    counts[forest_key(forest)] += 1
                else:
                    i, j = prop.pair
                    counts[forest_key(forest.replace_pair(g, i, j, *prop.new_trees))] += 1
            if set(counts) - set(exact):
                ok = False
                details[f"{label}_unexpected_outcomes"] = len(set(counts) - set(exact))
            worst_sigma = 0.0
            for key, p in exact.items():
                se = math.sqrt(max(p * (1 - p), 1e-300) / trials)
                worst_sigma = max(worst_sigma, abs(counts[key] / trials - p) / se)
            details[f"{label}_max_sigma"] = f"{worst_sigma:.2f}"
            ok = ok and worst_sigma <= 3.0
        return ok, details

    return _timed("proposal-exactness", run)


# -- 5. Detailed balance ---------------------------------------------------------

def _balance_fixtures():
    return [
        ("p3", with_unit_geometry(path_graph(3)), 2, PopWindow(1, 2)),
        ("c4", with_unit_geometry(cycle_graph(4)), 2, PopWindow(1, 3)),
        ("k4", with_unit_geometry(complete_graph(4)), 2, PopWindow(2, 2)),
        ("grid2x3-tight", grid_graph(2, 3), 2, PopWindow(3, 3)),
        ("grid2x3-loose", grid_graph(2, 3), 2, PopWindow(2, 4)),
        ("grid2x3-n3", grid_graph(2, 3), 3, PopWindow(2, 2)),
    ]


def check_detailed_balance(ctx) -> CheckResult:
    def run():
        worst = 0.0
        rows = 0
        for label, g, n, window in _balance_fixtures():
            cat = enumerate_partitions(g, n, window)
            forests = forest_space(g, cat)
            keys = [forest_key(f) for f in forests]
            for gamma, beta, w_c in itertools.product((0.0, 1.0), (0.0, 1.0), (0.0, 0.45)):
                params = MeasureParams(beta=beta, gamma=gamma, w_c=w_c, pop_window=window)
                pi = exact_forest_distribution(g, cat, params, forests)
                kernel = {}
                for f, key in zip(forests, keys):
                    row = exact_transition(f, PairMethod.UNIFORM_NEIGHBOR, window, g, params)
                    if abs(sum(row.values()) - 1.0) > 1e-12:
                        return False, {"fixture": label, "error": "row does not sum to 1"}
                    kernel[key] = row
                    rows += 1
                for ka, kb in itertools.combinations(keys, 2):
                    lhs = pi[ka] * kernel[ka].get(kb, 0.0)
                    rhs = pi[kb] * kernel[kb].get(ka, 0.0)
                    gap = abs(lhs - rhs) / max(lhs, rhs, 1e-300)
                    worst = max(worst, gap if (lhs or rhs) else 0.0)
        return worst <= 1e-12, {"kernel_rows": rows, "worst_rel_gap": f"{worst:.2e}"}

    return _timed("detailed-balance", run)


# -- 6/7. Stationarity -----------------------------------------------------------

def _stationarity_run(ctx, label, g, n, window, gamma, steps, chains=4):
    """Empirical partition distribution from a batch of fixed-length chains.

    The ensemble is aggregated across the batch before comparing against the
    exact catalog distribution, mirroring the enumeration benchmarks this
    check descends from; a single chain of this length sits at the plug-in
    TV estimator's noise floor, which would make the tolerance meaningless.
    """
    key = ("stationarity", label, n, gamma, steps)
    if key in ctx:
        return ctx[key]
    params = MeasureParams(beta=0.0, gamma=gamma, w_c=0.0, pop_window=window)
    cat = enumerate_partitions(g, n, window)
    probs = exact_distribution(cat, g, params)
    burn_in = steps // 20
    counts = Counter()
    per_chain = []
    stats_total = ChainStats()
    for chain_id in range(chains):
        rng = RngStream(SEED, "stationarity", label, gamma, chain_id)
        state = ChainState.from_forest(
            g, initial_forest(g, n, window, rng.spawn("init")), params)
        step_rng = rng.spawn("steps")
        seen = []
        for step in range(1, steps + 1):
            state, _ = mh_step(state, params, PairMethod.UNIFORM_NEIGHBOR, g, step_rng,
                               stats_total)
            if step > burn_in:
                seen.append(canonical_labels(state.forest.assignment.labels))
        counts.update(seen)
        per_chain.append(seen)
    checkpoints = sorted({max(1, int(round((steps - burn_in) ** (k / 24))))
                          for k in range(8, 25)})
    series = []
    for point in checkpoints:
        prefix = Counter()
        for seen in per_chain:
            prefix.update(seen[:point])
        series.append((point * chains, partition_tv(prefix.elements(), cat, probs)))
    tv = partition_tv(counts.elements(), cat, probs)
    result = {"tv": tv, "series": series, "stats": stats_total,
              "catalog_size": len(cat), "chains": chains}
    ctx[key] = result
    return result


def _stationarity_check(ctx, gamma):
    details = {}
    ok = True
    for label, g, n, window, steps in (
        ("grid2x3", grid_graph(2, 3), 2, PopWindow(3, 3), 100_000),
        ("grid4x4", grid_graph(4, 4), 2, PopWindow.from_deviation(16, 2, 0.05), 100_000),
    ):
        res = _stationarity_run(ctx, label, g, n, window, gamma, steps)
        details[f"{label}_tv"] = f"{res['tv']:.4f}"
        details[f"{label}_catalog"] = res["catalog_size"]
        ok = ok and res["tv"] < 0.05
    return ok, details


def check_stationarity_gamma1(ctx) -> CheckResult:
    return _timed("stationarity-gamma1", lambda: _stationarity_check(ctx, 1.0))


def check_stationarity_gamma0(ctx) -> CheckResult:
    return _timed("stationarity-gamma0", lambda: _stationarity_check(ctx, 0.0))


# -- 8. Acceptance-vs-gamma trend -------------------------------------------------

def check_acceptance_trend(ctx) -> CheckResult:
    def run():
        g = grid_graph(4, 4)
        window = PopWindow.from_deviation(16, 2, 0.05)
        rates = []
        for gamma in (0.0, 0.5, 1.0):
            params = MeasureParams(beta=0.0, gamma=gamma, w_c=0.0, pop_window=window)
            rng = RngStream(SEED, "acceptance", gamma)
            state = ChainState.from_forest(
                g, initial_forest(g, 2, window, rng.spawn("init")), params)
            step_rng = rng.spawn("steps")
            chain_stats = ChainStats()
            for _ in range(20_000):
                state, _ = mh_step(state, params, PairMethod.UNIFORM_NEIGHBOR,
                                   g, step_rng, chain_stats)
            rates.append(chain_stats.acceptance_rate)
        monotone = rates[0] >= rates[1] >= rates[2]
        return monotone, {"rates": "/".join(f"{r:.3f}" for r in rates)}

    return _timed("acceptance-trend", run)


# -- 9. Tempering swap rule --------------------------------------------------------

def check_tempering_swap(ctx) -> CheckResult:
    def run():
        g = grid_graph(2, 3)
        window = PopWindow(2, 4)
        base = dict(beta=1.0, pop_window=window)
        params_a = MeasureParams(gamma=0.0, w_c=0.0, **base)
        params_b = MeasureParams(gamma=1.0, w_c=0.45, **base)

        # exact expectation of the swap acceptance under the product of the
        # two rungs' stationary partition distributions (brute-force counts)
        cat = enumerate_partitions(g, 2, window)
        taus, jcs = [], []
        from .measure import district_geometry
        for labels in cat.partitions:
            tau = 1
            for k in range(2):
                members = [v for v, lab in enumerate(labels) if lab == k]
                tau *= brute_count_trees(induced_subgraph(g, members))
            taus.append(tau)
            areas, perims = district_geometry(g, labels, 2)
            jcs.append(sum(p * p / a for p, a in zip(perims, areas)))

        def dist(params):
            w = [math.exp(-params.beta * params.w_c * jc) * tau ** (1.0 - params.gamma)
                 for tau, jc in zip(taus, jcs)]
            total = sum(w)
            return [x / total for x in w]

        pa, pb = dist(params_a), dist(params_b)
        expectation = 0.0
        for xa, wa in enumerate(pa):
            for xb, wb in enumerate(pb):
                log_ratio = (params_a.beta * (params_a.w_c - params_b.w_c)
                             * (jcs[xa] - jcs[xb]))
                log_ratio += ((params_a.gamma - params_b.gamma)
                              * (math.log(taus[xa]) - math.log(taus[xb])))
                expectation += wa * wb * min(1.0, math.exp(log_ratio))

        # empirical run: two chains in lockstep, swap attempt every few steps
        attempts_target = 100_000
        gap = 4
        burn_in = 2000
        rng_a = RngStream(SEED, "temper", "a")
        rng_b = RngStream(SEED, "temper", "b")
        swap_rng = RngStream(SEED, "temper", "swap")
        state_a = ChainState.from_forest(
            g, initial_forest(g, 2, window, rng_a.spawn("init")), params_b)
        state_b = ChainState.from_forest(
            g, initial_forest(g, 2, window, rng_b.spawn("init")), params_b)
        sa_rng, sb_rng = rng_a.spawn("steps"), rng_b.spawn("steps")
        st_a, st_b = ChainStats(), ChainStats()
        accepted = attempts = 0
        step = 0
        while attempts < attempts_target:
            step += 1
            state_a, _ = mh_step(state_a, params_a, PairMethod.UNIFORM_NEIGHBOR,
                                 g, sa_rng, st_a)
            state_b, _ = mh_step(state_b, params_b, PairMethod.UNIFORM_NEIGHBOR,
                                 g, sb_rng, st_b)
            if step > burn_in and step % gap == 0:
                state_a, state_b, swapped = ladder_swap(
                    state_a, state_b, params_a, params_b, g, swap_rng)
                attempts += 1
                accepted += swapped
        freq = accepted / attempts
        se = math.sqrt(expectation * (1 - expectation) / attempts)
        sigma = abs(freq - expectation) / se
        return sigma <= 3.0, {"expected": f"{expectation:.4f}", "observed": f"{freq:.4f}",
                              "sigma": f"{sigma:.2f}"}

    return _timed("tempering-swap", run)


# -- 10. Conditional forest uniformity (lemma) --------------------------------------

def check_forest_lemma(ctx) -> CheckResult:
    def run():
        g = grid_graph(2, 3)
        window = PopWindow(2, 4)  # pieces of size 2 and 4 allow multi-tree pieces
        params = MeasureParams(beta=0.0, gamma=0.0, w_c=0.0, pop_window=window)
        rng = RngStream(SEED, "lemma")
        state = ChainState.from_forest(
            g, initial_forest(g, 2, window, rng.spawn("init")), params)
        step_rng = rng.spawn("steps")
        chain_stats = ChainStats()
        by_partition = Counter()
        by_forest = Counter()
        thin = 5  # keep retained samples near-independent for the chi-square
        for step in range(1, 100_001):
            state, _ = mh_step(state, params, PairMethod.UNIFORM_NEIGHBOR, g,
                               step_rng, chain_stats)
            if step % thin == 0:
                key = forest_key(state.forest)
                by_partition[key[0]] += 1
                by_forest[key] += 1
        top_partition, visits = by_partition.most_common(1)[0]
        # ground truth: this partition's forest count from brute enumeration
        expected_forests = 1
        for k in range(2):
            members = [v for v, lab in enumerate(top_partition) if lab == k]
            expected_forests *= brute_count_trees(induced_subgraph(g, members))
        observed = [c for key, c in by_forest.items() if key[0] == top_partition]
        if len(observed) < expected_forests:
            observed += [0] * (expected_forests - len(observed))
        if len(observed) != expected_forests:
            return False, {"error": "chain visited more forests than the oracle count"}
        _, p = sstats.chisquare(observed)
        return p >= 0.001 and expected_forests > 1, {
            "partition_visits": visits, "forests": expected_forests, "p": f"{p:.4f}"}

    return _timed("forest-lemma", run)


# -- 11. Convergence diagnostics ------------------------------------------------------

def check_convergence_fit(ctx) -> CheckResult:
    def run():
        series = [(10 ** k, (10 ** k) ** -0.5) for k in range(1, 7)]
        exponent, prefactor = power_law_fit(series)
        exact_ok = abs(exponent - 0.5) <= 1e-6
        details = {"fit_exponent": f"{exponent:.8f}"}

        run6 = None
        for key, value in ctx.items():
            if isinstance(key, tuple) and key[:2] == ("stationarity", "grid4x4") \
                    and key[3] == 1.0:
                run6 = value
        if run6 is None:  # standalone invocation: use the cheaper fixture
            run6 = _stationarity_run(ctx, "grid2x3", grid_graph(2, 3), 2,
                                     PopWindow(3, 3), 1.0, 100_000)
        means = [m for _, m in decade_means(run6["series"])]
        monotone = all(a >= b - 1e-12 for a, b in zip(means, means[1:]))
        details["tv_decades"] = "/".join(f"{m:.3f}" for m in means)
        return exact_ok and monotone, details

    return _timed("convergence-fit", run)


# -- 12. Determinism --------------------------------------------------------------------

def check_determinism(ctx) -> CheckResult:
    def run():
        import tempfile
        from pathlib import Path

        from . import cli
        from .fixtures import write_json

        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            write_json(grid_graph(2, 3), tmp / "graph.json")
            config = {
                "graph": str(tmp / "graph.json"),
                "n": 2, "steps": 400, "seed": 12345, "snapshot_every": 10,
                "chains": 2, "method": "uniform_neighbor",
                "params": {"beta": 0.0, "gamma": 1.0, "w_c": 0.0,
                           "pop_deviation": 0.05},
            }
            cfg_path = tmp / "config.json"
            import json
            cfg_path.write_text(json.dumps(config))
            rc1 = cli.cmd_run(str(cfg_path), str(tmp / "out1"))
            rc2 = cli.cmd_run(str(cfg_path), str(tmp / "out2"))
            if rc1 != 0 or rc2 != 0:
                return False, {"error": "run command failed"}
            names = sorted(p.name for p in (tmp / "out1").iterdir())
            if names != sorted(p.name for p in (tmp / "out2").iterdir()):
                return False, {"error": "output file sets differ"}
            for name in names:
                if (tmp / "out1" / name).read_bytes() != (tmp / "out2" / name).read_bytes():
                    return False, {"error": f"{name} differs between runs"}
        return True, {"files": len(names)}

    return _timed("determinism", run)


CRITERIA = (
    ("kirchhoff", check_kirchhoff),
    ("wilson-uniformity", check_wilson_uniformity),
    ("cut-search", check_cut_search),
    ("proposal-exactness", check_proposal_exactness),
    ("detailed-balance", check_detailed_balance),
    ("stationarity-gamma1", check_stationarity_gamma1),
    ("stationarity-gamma0", check_stationarity_gamma0),
    ("acceptance-trend", check_acceptance_trend),
    ("tempering-swap", check_tempering_swap),
    ("forest-lemma", check_forest_lemma),
    ("convergence-fit", check_convergence_fit),
    ("determinism", check_determinism),
)


def run_validation(selector: str = None, ctx: dict = None) -> list:
    """Run all criteria (or those whose name contains ``selector``)."""
    ctx = ctx if ctx is not None else {}
    results = []
    for name, fn in CRITERIA:
        if selector and selector not in name:
            continue
        results.append(fn(ctx))
    if not results:
        raise ValueError(f"no validation suite matches {selector!r}")
    return results
