from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping

from ..errors import ConfigError

MEASURES = ("integrated", "lcs", "edit")


@dataclass(frozen=True)
class SimilarityConfig:
    """Parameters of the graph similarity measures.

    ``node_threshold``/``edge_threshold`` decide Gem membership, the weights
    scale Gem/Diff sums, ``concept_weight`` splits node similarity between
    the concept label and the attribute list (attributes get the rest), and
    ``case_blend`` weighs question against answer similarity.
    """

    node_threshold: float = 0.5
    edge_threshold: float = 0.5
    node_weight: float = 1.0
    edge_weight: float = 1.0
    concept_weight: float = 0.6
    node_ins_cost: float = 1.0
    node_del_cost: float = 1.0
    node_sub_cost: float = 1.0
    edge_ins_cost: float = 1.0
    edge_del_cost: float = 1.0
    edge_sub_cost: float = 1.0
    case_blend: float = 0.5
    exact_size_limit: int = 12
    time_budget: float = 2.0
    measure: str = "integrated"

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("node_threshold", "edge_threshold", "concept_weight", "case_blend"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                out.append(f"{name} must lie in [0, 1], got {v!r}")
        for name in ("node_weight", "edge_weight", "node_ins_cost", "node_del_cost", "node_sub_cost",
                     "edge_ins_cost", "edge_del_cost", "edge_sub_cost", "time_budget"):
            v = getattr(self, name)
            if not v > 0:
                out.append(f"{name} must be > 0, got {v!r}")
        if self.exact_size_limit < 0:
            out.append(f"exact_size_limit must be >= 0, got {self.exact_size_limit!r}")
        if self.measure not in MEASURES:
            out.append(f"measure must be one of {MEASURES}, got {self.measure!r}")
        return out

    @property
    def attribute_weight(self) -> float:
        return 1.0 - self.concept_weight

    def kernel_params(self) -> tuple[float, ...]:
        return (self.concept_weight, self.attribute_weight, self.node_threshold,
                self.edge_threshold, self.node_weight, self.edge_weight)

    def reversed_costs(self) -> "SimilarityConfig":
        """Config for the inverse edit direction (insertions become deletions)."""
        return replace(self, node_ins_cost=self.node_del_cost, node_del_cost=self.node_ins_cost,
                       edge_ins_cost=self.edge_del_cost, edge_del_cost=self.edge_ins_cost)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimilarityConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown similarity key(s): {', '.join(unknown)}")
        kwargs = {}
        for k, v in data.items():
            typ = known[k].type
            try:
                if typ == "int":
                    if isinstance(v, bool) or int(v) != v:
                        raise ValueError
                    v = int(v)
                elif typ == "float":
                    if isinstance(v, bool):
                        raise ValueError
                    v = float(v)
                elif not isinstance(v, str):
                    raise ValueError
            except (TypeError, ValueError):
                raise ConfigError(f"similarity key {k!r} has invalid value {v!r}") from None
            kwargs[k] = v
        return cls(**kwargs)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
