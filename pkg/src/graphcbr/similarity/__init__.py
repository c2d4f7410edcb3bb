"""Graph similarity measures: largest common subgraph, edit distance, integrated."""

from .config import MEASURES, SimilarityConfig
from .edit import EditResult, edit_distance, max_edit_cost, sim_edit
from .integrated import PartitionResult, integrated_sim, integrated_value
from .lcs import CommonSubgraph, lcs, lcs_size, sim_lcs
from .local import attribute_sim, list_sim, node_sim
from .matrix import (case_sim, get_parallelism, graph_sim, set_parallelism, similarity_matrix,
                     unique_graphs)

__all__ = [
    "MEASURES",
    "SimilarityConfig",
    "EditResult",
    "edit_distance",
    "max_edit_cost",
    "sim_edit",
    "PartitionResult",
    "integrated_sim",
    "integrated_value",
    "CommonSubgraph",
    "lcs",
    "lcs_size",
    "sim_lcs",
    "attribute_sim",
    "list_sim",
    "node_sim",
    "case_sim",
    "graph_sim",
    "similarity_matrix",
    "unique_graphs",
    "set_parallelism",
    "get_parallelism",
]
