"""Ensemble observables and convergence diagnostics.

Histograms use fixed, explicit bin grids so total-variation comparisons are
well defined; comparisons against an enumerated catalog skip binning and work
on the catalog's discrete support directly.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import Assignment, Graph, canonical_labels
from .measure import district_geometry


@dataclass
class Histogram:
    edges: np.ndarray   # strictly increasing bin edges, len = bins + 1
    counts: np.ndarray  # nonnegative integers, len = bins
    total: int

    @classmethod
    def from_values(cls, values, bin_width: float, lo: float = 0.0, hi: float = 1.0):
        nbins = int(round((hi - lo) / bin_width))
        edges = lo + bin_width * np.arange(nbins + 1)
        counts, _ = np.histogram(np.asarray(list(values), dtype=float), bins=edges)
        return cls(edges=edges, counts=counts.astype(int), total=int(counts.sum()))

    def probs(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / self.total

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("histograms have different bin edges")
        counts = self.counts + other.counts
        return Histogram(edges=self.edges, counts=counts, total=int(counts.sum()))


class SeatCounts(NamedTuple):
    a: int
    b: int
    ties: int


def seats(g: Graph, a: Assignment, election: str) -> SeatCounts:
    """Districts won by each party under fixed votes; exact ties counted apart."""
    won_a = won_b = ties = 0
    for i in range(a.n):
        va = vb = 0
        for v in a.part_nodes(i):
            votes = g.nodes[v].votes
            if election not in votes:
                raise ValueError(f"node {v} has no votes for election {election!r}")
            va += votes[election][0]
            vb += votes[election][1]
        if va > vb:
            won_a += 1
        elif vb > va:
            won_b += 1
        else:
            ties += 1
    return SeatCounts(a=won_a, b=won_b, ties=ties)


def vote_shares(g: Graph, a: Assignment, election: str) -> list:
    """Party-A vote share per district."""
    shares = []
    for i in range(a.n):
        va = vb = 0
        for v in a.part_nodes(i):
            votes = g.nodes[v].votes
            if election not in votes:
                raise ValueError(f"node {v} has no votes for election {election!r}")
            va += votes[election][0]
            vb += votes[election][1]
        if va + vb == 0:
            raise ValueError(f"district {i} has no votes cast")
        shares.append(va / (va + vb))
    return shares


MARGINAL_BIN_WIDTH = 0.002


def ordered_marginals(samples, g: Graph, election: str,
                      bin_width: float = MARGINAL_BIN_WIDTH) -> list:
    """Rank-sorted vote-share histograms: one histogram per rank, ascending.

    Sorting each sample's district shares removes the labels, so any
    relabeling of the input assignments leaves the result unchanged.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    n = samples[0].n
    per_rank = [[] for _ in range(n)]
    for a in samples:
        for r, share in enumerate(sorted(vote_shares(g, a, election))):
            per_rank[r].append(share)
    return [Histogram.from_values(vals, bin_width, 0.0, 1.0) for vals in per_rank]


def total_variation(h1: Histogram, h2: Histogram) -> float:
    """TV distance between two histograms on the same bin grid."""
    if not np.array_equal(h1.edges, h2.edges):
        raise ValueError("histograms have different bin edges")
    return 0.5 * float(np.abs(h1.probs() - h2.probs()).sum())


def tv_discrete(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def partition_tv(sample_labels, catalog, exact_probs) -> float:
    """TV between an empirical label-vector ensemble and exact catalog
    probabilities, over the catalog's discrete support (no binning)."""
    counts = Counter(canonical_labels(labels) for labels in sample_labels)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no samples")
    acc = 0.0
    seen = 0
    for labels, p in zip(catalog.partitions, exact_probs):
        emp = counts.get(labels, 0) / total
        seen += counts.get(labels, 0)
        acc += abs(emp - p)
    acc += (total - seen) / total  # sampled mass outside the catalog
    return 0.5 * acc


def power_law_fit(series) -> tuple:
    """Least-squares fit tv ~ prefactor * steps^(-exponent) on log-log axes."""
    pts = [(s, t) for s, t in series]
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if any(s <= 0 or t <= 0 for s, t in pts):
        raise ValueError("power-law fit needs positive values")
    x = np.log([s for s, _ in pts])
    y = np.log([t for _, t in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return -float(slope), float(math.exp(intercept))


def polsby_popper(g: Graph, a: Assignment) -> list:
    """4*pi*area/perimeter^2 per district, in (0, 1] for sane geometry."""
    areas, perims = district_geometry(g, a.labels, a.n)
    out = []
    for i, (area, perim) in enumerate(zip(areas, perims)):
        if perim <= 0:
            raise ValueError(f"district {i} has zero perimeter")
        out.append(4.0 * math.pi * area / (perim * perim))
    return out


def forest_count_histogram(log_tau_values, bin_width: float = 0.5) -> Histogram:
    """Histogram over total log spanning-forest counts of sampled states."""
    values = list(log_tau_values)
    if not values:
        raise ValueError("no values")
    lo = math.floor(min(values) / bin_width) * bin_width
    hi = math.ceil(max(values) / bin_width) * bin_width
    if hi <= lo:
        hi = lo + bin_width
    return Histogram.from_values(values, bin_width, lo, hi)


def decade_means(series) -> list:
    """Mean of the second coordinate within each decade of the first."""
    buckets = {}
    for s, t in series:
        if s <= 0:
            continue
        d = int(math.floor(math.log10(s)))
        buckets.setdefault(d, []).append(t)
    return [(d, float(np.mean(v))) for d, v in sorted(buckets.items())]


@dataclass
class EnsembleSummary:
    """Aggregated observables for one sampled ensemble.

    ``seat_hist[election]`` counts party-A seats per sample; marginal
    histograms are rank-ordered vote shares; the compactness and log
    forest-count series follow the sample order.
    """

    seat_hist: dict          # election -> Histogram over 0..n seats
    marginals: dict          # election -> list of per-rank Histograms
    compactness: list        # per-sample sum of perimeter^2/area
    log_tau: list            # per-sample total log forest count (may be empty)
    samples: int


def summarize_ensemble(assignments, g: Graph, elections=(), log_tau_series=None,
                       bin_width: float = MARGINAL_BIN_WIDTH) -> EnsembleSummary:
    assignments = list(assignments)
    if not assignments:
        raise ValueError("need at least one sample")
    n = assignments[0].n
    seat_hist = {}
    marginals = {}
    for election in elections:
        counts = [seats(g, a, election).a for a in assignments]
        seat_hist[election] = Histogram.from_values(counts, 1.0, -0.5, n + 0.5)
        marginals[election] = ordered_marginals(assignments, g, election, bin_width)
    compactness = []
    for a in assignments:
        areas, perims = district_geometry(g, a.labels, a.n)
        if all(x > 0 for x in areas):
            compactness.append(sum(p * p / x for p, x in zip(perims, areas)))
    return EnsembleSummary(
        seat_hist=seat_hist,
        marginals=marginals,
        compactness=compactness,
        log_tau=list(log_tau_series) if log_tau_series is not None else [],
        samples=len(assignments),
    )
