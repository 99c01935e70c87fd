"""Training-free condensation of heterogeneous graphs by data selection."""
from ._numba import backend
from .auxiliary import (
    TypeHierarchy, classify_hierarchy, condense_other_types, ppr_influence,
    select_father, synthesize_leaf,
)
from .errors import (
    CondenseError, ContractError, GraphLoadError, GraphValidationError,
    HierarchyError, PPRConvergenceError,
)
from .hetgraph import (
    HeteroGraph, HyperNode, Relation, induce_subgraph, load_graph, save_graph, validate,
)
from .metapath import ComposedAdjacency, MetaPath, compose, enumerate_metapaths, reachable_set
from .pipeline import CondenseConfig, run, run_random_baseline
from .target import (
    SelectionBudget, class_budgets, greedy_coverage, metapath_jaccard, unified_select,
)

__version__ = "0.1.0"
