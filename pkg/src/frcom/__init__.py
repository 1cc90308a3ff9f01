"""Reversible MCMC sampling of balanced graph partitions via spanning-forest
recombination, with an exact small-graph oracle and convergence diagnostics."""

__version__ = "0.1.0"

from .engine import (ChainConfig, ChainStats, LadderConfig, initial_forest, ladder_swap,
                     mh_step, run_chain, run_ladder)
from .errors import GraphFormatError, SizeGuardError, StateError
from .forest import PopWindow, SpanningForest, Tree, find_cut_edges, joined_cut_edges, \
    root_tree, split_tree
from .graph import Assignment, EdgeRecord, Graph, NodeRecord, Subgraph, canonical_labels, \
    graph_to_json, induced_subgraph, load_graph, merged_subgraph, partition_adjacency, \
    partition_weight
from .measure import MeasureParams, ScoreBreakdown, log_acceptance, log_target, score
from .observables import EnsembleSummary, Histogram, SeatCounts, ordered_marginals, \
    polsby_popper, power_law_fit, seats, summarize_ensemble, total_variation
from .oracle import PartitionCatalog, enumerate_partitions, exact_distribution, \
    exact_proposal_distribution, exact_transition
from .proposal import PairMethod, Proposal, effective_boundary, log_proposal_ratio, \
    pair_probability, propose, sample_pair
from .rng import RngStream
from .treecount import brute_count_trees, log_forest_count, log_tree_count
from .wilson import loop_erased_walk, wilson_ust
