"""Command-line surface: run chains or ladders, enumerate oracles, analyze
ensembles, and run the validation suites.

All randomness flows from the config seed through named substreams, so
reruns are byte-identical and adding chains never perturbs existing ones.
Output files are written to a temp name and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .engine import ChainConfig, LadderConfig, run_chain, run_ladder
from .errors import GraphFormatError, SizeGuardError
from .forest import PopWindow
from .graph import Assignment, Graph, load_graph
from .measure import MeasureParams
from .observables import Histogram, forest_count_histogram, ordered_marginals, \
    partition_tv, power_law_fit, seats, total_variation
from .proposal import PairMethod
from .validation import run_validation


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _load_graph_file(path: str) -> Graph:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"graph not found: {path}")
    with open(p, "rb") as fh:
        return load_graph(fh)


def _window_from_config(doc: dict, g: Graph, n: int) -> PopWindow:
    if "pop_window" in doc:
        lo, hi = doc["pop_window"]
        return PopWindow.from_bounds(lo, hi)
    if "pop_deviation" in doc:
        return PopWindow.from_deviation(g.total_pop, n, doc["pop_deviation"])
    raise ValueError("params must set either pop_window or pop_deviation")


def _params_from_config(doc: dict, g: Graph, n: int) -> MeasureParams:
    return MeasureParams(
        beta=float(doc.get("beta", 0.0)),
        gamma=float(doc.get("gamma", 0.0)),
        w_c=float(doc.get("w_c", 0.0)),
        pop_window=_window_from_config(doc, g, n),
        compactness_cap=doc.get("compactness_cap"),
    )


def _chain_config(doc: dict, g: Graph, chain_id: int = 0) -> ChainConfig:
    n = int(doc["n"])
    return ChainConfig(
        n=n,
        params=_params_from_config(doc["params"], g, n),
        method=PairMethod(doc.get("method", "uniform_neighbor")),
        steps=int(doc["steps"]),
        seed=int(doc["seed"]),
        snapshot_every=int(doc.get("snapshot_every", 1)),
        init_retries=int(doc.get("init_retries", 64)),
        init_restarts=int(doc.get("init_restarts", 1000)),
        chain_id=chain_id,
        graph_path=doc.get("graph"),
    )


def _config_digest(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _manifest(doc: dict, extra: dict = None) -> str:
    manifest = {
        "version": __version__,
        "seed": doc["seed"],
        "config_sha256": _config_digest(doc),
        "graph": doc.get("graph"),
    }
    manifest.update(extra or {})
    return json.dumps(manifest, sort_keys=True, indent=2) + "\n"


class _JsonlCollector:
    def __init__(self):
        self.lines = []

    def __call__(self, record: dict) -> None:
        self.lines.append(json.dumps(record, sort_keys=True))

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")


def _run_one_chain(args):
    doc, graph_path, chain_id, out_path = args
    g = _load_graph_file(graph_path)
    sink = _JsonlCollector()
    stats = run_chain(g, _chain_config(doc, g, chain_id=chain_id), sink)
    _atomic_write(Path(out_path), sink.text())
    return chain_id, stats.to_dict()


def _worker_count(jobs: int) -> int:
    env = os.environ.get("FRCOM_THREADS")
    if env:
        return max(1, min(int(env), jobs))
    return 1


def cmd_run(config_path: str, out_dir: str) -> int:
    try:
        doc = json.loads(Path(config_path).read_text())
        g = _load_graph_file(doc["graph"])
        _chain_config(doc, g)  # validate early, before spawning workers
        chains = int(doc.get("chains", 1))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        jobs = [(doc, doc["graph"], k, str(out / f"chain{k:02d}.jsonl"))
                for k in range(chains)]
        workers = _worker_count(len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_one_chain, jobs))
        else:
            results = [_run_one_chain(job) for job in jobs]

        stats = {f"chain{k:02d}": s for k, s in sorted(results)}
        _atomic_write(out / "stats.json", json.dumps(stats, sort_keys=True, indent=2) + "\n")
        _atomic_write(out / "manifest.json", _manifest(doc, {"chains": chains}))
        return 0
    except (OSError, KeyError, ValueError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_ladder(config_path: str, out_dir: str) -> int:
    try:
        doc = json.loads(Path(config_path).read_text())
        g = _load_graph_file(doc["graph"])
        base = _chain_config(doc, g)
        lcfg = LadderConfig(
            rungs=tuple((float(r[0]), float(r[1])) for r in doc["rungs"]),
            swap_every=int(doc["swap_every"]),
            base=base,
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sinks = [_JsonlCollector() for _ in lcfg.rungs]
        all_stats = run_ladder(g, lcfg, lambda rec: sinks[rec["chain"]](rec))
        for k, sink in enumerate(sinks):
            _atomic_write(out / f"rung{k:02d}.jsonl", sink.text())
        stats = {f"rung{k:02d}": s.to_dict() for k, s in enumerate(all_stats)}
        _atomic_write(out / "stats.json", json.dumps(stats, sort_keys=True, indent=2) + "\n")
        _atomic_write(out / "manifest.json",
                      _manifest(doc, {"rungs": len(lcfg.rungs),
                                      "target_rung": len(lcfg.rungs) - 1}))
        return 0
    except (OSError, KeyError, ValueError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_enumerate(graph_path: str, n: int, window_frac: float, out_dir: str,
                  beta: float = 0.0, gamma: float = 0.0, w_c: float = 0.0,
                  cap: float = None) -> int:
    from .oracle import enumerate_partitions, exact_distribution

    try:
        g = _load_graph_file(graph_path)
        window = PopWindow.from_deviation(g.total_pop, n, window_frac)
        params = MeasureParams(beta=beta, gamma=gamma, w_c=w_c,
                               pop_window=window, compactness_cap=cap)
        cat = enumerate_partitions(g, n, window)
        probs = exact_distribution(cat, g, params)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [
            json.dumps({"labels": list(labels), "log_weight": lw}, sort_keys=True)
            for labels, lw in zip(cat.partitions, cat.log_weights)
        ]
        _atomic_write(out / "catalog.jsonl", "\n".join(lines) + ("\n" if lines else ""))
        rows = ["index,probability"]
        rows += [f"{k},{p!r}" for k, p in enumerate(probs)]
        _atomic_write(out / "distribution.csv", "\n".join(rows) + "\n")
        print(f"{len(cat)} partitions (window [{window.lo}, {window.hi}])")
        return 0
    except SizeGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _load_samples(paths):
    chains = []
    for path in paths:
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        if not records:
            raise ValueError(f"{path} holds no snapshots")
        chains.append(records)
    cadences = [[r["step"] for r in c] for c in chains]
    if len({tuple(c) for c in cadences}) != 1:
        raise ValueError("incompatible snapshot cadences across sample files")
    return chains


def _load_catalog(path):
    labels = []
    log_weights = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                doc = json.loads(line)
                labels.append(tuple(doc["labels"]))
                log_weights.append(float(doc["log_weight"]))
    shift = max(log_weights)
    w = [math.exp(x - shift) for x in log_weights]
    total = sum(w)
    return labels, [x / total for x in w]


class _CatalogView:
    def __init__(self, partitions):
        self.partitions = partitions


def _checkpoints(count: int, points: int = 18):
    ks = sorted({max(1, int(round(count ** (i / points)))) for i in range(1, points + 1)})
    if ks[-1] != count:
        ks.append(count)
    return ks


def _write_csv(path: Path, header, rows):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def cmd_analyze(sample_paths, out_dir: str, catalog_path: str = None,
                election: str = None, graph_path: str = None,
                tv_reduce: str = None) -> int:
    try:
        chains = _load_samples(sample_paths)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        steps_axis = [r["step"] for r in chains[0]]
        fits = {}

        g = _load_graph_file(graph_path) if graph_path else None
        n_parts = max(chains[0][0]["labels"]) + 1

        if catalog_path:
            cat_labels, cat_probs = _load_catalog(catalog_path)
            view = _CatalogView(cat_labels)
            rows = []
            for k in _checkpoints(len(chains[0])):
                step = steps_axis[k - 1]
                if step == 0 and len(chains[0]) > 1:
                    continue
                tvs = [partition_tv((r["labels"] for r in chain[:k]), view, cat_probs)
                       for chain in chains]
                rows.append((step, sum(tvs) / len(tvs)))
            _write_csv(out / "tv_catalog.csv", ["steps", "tv"], rows)
            fits["tv_catalog"] = _try_fit(rows)

        if election:
            if g is None:
                raise ValueError("--election needs --graph to resolve the vote data")
            seat_hists = []
            margin_hists = []
            for chain in chains:
                assigns = [Assignment(g, r["labels"], n_parts) for r in chain]
                seat_hists.append([seats(g, a, election).a for a in assigns])
                margin_hists.append(ordered_marginals(assigns, g, election))
            all_seats = [s for chain in seat_hists for s in chain]
            seat_counts = [all_seats.count(k) for k in range(n_parts + 1)]
            _write_csv(out / f"seats_{election}.csv", ["seats", "count"],
                       list(enumerate(seat_counts)))
            for rank in range(n_parts):
                merged = margin_hists[0][rank]
                for other in margin_hists[1:]:
                    merged = merged.merge(other[rank])
                _write_csv(out / f"marginal_{election}_rank{rank + 1}.csv",
                           ["bin_left", "bin_right", "count"],
                           [(merged.edges[i], merged.edges[i + 1], int(c))
                            for i, c in enumerate(merged.counts)])

            if len(chains) >= 2:
                if tv_reduce not in ("max", "avg"):
                    raise ValueError(
                        "pairwise TV needs an explicit --tv-reduce choice (max or avg)")
                rows = []
                for k in _checkpoints(len(chains[0])):
                    step = steps_axis[k - 1]
                    if step == 0 and len(chains[0]) > 1:
                        continue
                    hists = [Histogram.from_values(ch[:k], 1.0, -0.5, n_parts + 0.5)
                             for ch in seat_hists]
                    tvs = [total_variation(a, b)
                           for i, a in enumerate(hists) for b in hists[i + 1:]]
                    value = max(tvs) if tv_reduce == "max" else sum(tvs) / len(tvs)
                    rows.append((step, value))
                _write_csv(out / f"tv_pairwise_{election}.csv", ["steps", "tv"], rows)
                fits["tv_pairwise"] = _try_fit(rows)
            elif not catalog_path:
                raise ValueError("pairwise analysis needs at least two sample files")

        if not catalog_path and not election:
            raise ValueError("nothing to analyze: give --catalog and/or --election")

        log_tau_values = [sum(r["log_tau"]) for chain in chains for r in chain
                          if "log_tau" in r]
        if log_tau_values:
            h = forest_count_histogram(log_tau_values)
            _write_csv(out / "forest_counts.csv", ["bin_left", "bin_right", "count"],
                       [(h.edges[i], h.edges[i + 1], int(c))
                        for i, c in enumerate(h.counts)])

        _atomic_write(out / "fit.json", json.dumps(fits, sort_keys=True, indent=2) + "\n")
        return 0
    except (OSError, KeyError, ValueError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _try_fit(rows):
    try:
        exponent, prefactor = power_law_fit(rows)
        return {"exponent": exponent, "prefactor": prefactor}
    except ValueError:
        return None


def cmd_validate(suite: str = None, report_path: str = None) -> int:
    try:
        results = run_validation(suite)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for res in results:
        print(res.line())
    if report_path:
        report = [{"name": r.name, "passed": r.passed, "seconds": r.seconds,
                   "details": {k: str(v) for k, v in r.details.items()}}
                  for r in results]
        _atomic_write(Path(report_path), json.dumps(report, indent=2) + "\n")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frcom",
        description="Reversible balanced-partition sampling via spanning-forest "
                    "recombination",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a batch of chains")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("-o", "--out", required=True)

    p_ladder = sub.add_parser("ladder", help="run a parallel-tempering ladder")
    p_ladder.add_argument("-c", "--config", required=True)
    p_ladder.add_argument("-o", "--out", required=True)

    p_enum = sub.add_parser("enumerate", help="enumerate balanced partitions exactly")
    p_enum.add_argument("-g", "--graph", required=True)
    p_enum.add_argument("-n", type=int, required=True)
    p_enum.add_argument("--window", type=float, required=True,
                        help="population deviation fraction around ideal")
    p_enum.add_argument("--beta", type=float, default=0.0)
    p_enum.add_argument("--gamma", type=float, default=0.0)
    p_enum.add_argument("--w-c", type=float, default=0.0)
    p_enum.add_argument("--cap", type=float, default=None)
    p_enum.add_argument("-o", "--out", required=True)

    p_an = sub.add_parser("analyze", help="summarize sampled ensembles")
    p_an.add_argument("-s", "--samples", nargs="+", required=True)
    p_an.add_argument("--catalog")
    p_an.add_argument("--election")
    p_an.add_argument("-g", "--graph")
    p_an.add_argument("--tv-reduce", choices=("max", "avg"), default=None,
                      help="pairwise TV reduction across chain pairs (required "
                           "for pairwise analysis)")
    p_an.add_argument("-o", "--out", required=True)

    p_val = sub.add_parser("validate", help="run the correctness suites")
    p_val.add_argument("--suite", default=None)
    p_val.add_argument("--report", default=None)

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "ladder":
        return cmd_ladder(args.config, args.out)
    if args.command == "enumerate":
        return cmd_enumerate(args.graph, args.n, args.window, args.out,
                             beta=args.beta, gamma=args.gamma, w_c=args.w_c,
                             cap=args.cap)
    if args.command == "analyze":
        return cmd_analyze(args.samples, args.out, catalog_path=args.catalog,
                           election=args.election, graph_path=args.graph,
                           tv_reduce=args.tv_reduce)
    return cmd_validate(args.suite, args.report)


if __name__ == "__main__":
    sys.exit(main())
