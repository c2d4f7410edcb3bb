"""Case-based answer validation over attributed semantic graphs."""

__version__ = "0.1.0"

from .casebase import Case, CaseBase, CaseTable, IngestReport, Match, RetrievalMode
from .errors import (CaseRecordError, CBRError, ConfigError, DegenerateDatasetError, EmptyCaseBaseError,
                     GraphIntegrityError, GraphParseError)
from .graph import (AttributedGraph, ConceptNode, RelationEdge, canonical_form, graph_size, parse_graph,
                    serialize_graph, validate)
from .similarity import SimilarityConfig, case_sim, integrated_sim, lcs, sim_edit, sim_lcs, edit_distance

__all__ = [
    "__version__",
    "AttributedGraph",
    "ConceptNode",
    "RelationEdge",
    "canonical_form",
    "graph_size",
    "parse_graph",
    "serialize_graph",
    "validate",
    "SimilarityConfig",
    "case_sim",
    "integrated_sim",
    "lcs",
    "sim_lcs",
    "edit_distance",
    "sim_edit",
    "Case",
    "CaseBase",
    "CaseTable",
    "IngestReport",
    "Match",
    "RetrievalMode",
    "CBRError",
    "CaseRecordError",
    "ConfigError",
    "DegenerateDatasetError",
    "EmptyCaseBaseError",
    "GraphIntegrityError",
    "GraphParseError",
]
