"""Run configuration: JSON file, optional ``MULTICOLOR_CONFIG`` fallback, flag overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

from .codeindex import Bm25Params
from .graph import GraphMode
from .sic import DEFAULT_K, HashingEmbedder, SicMode

CONFIG_ENV = "MULTICOLOR_CONFIG"


@dataclass(frozen=True)
class Config:
    repo_root: str = "."
    mode: str = "mixed"
    k: int = DEFAULT_K
    w_sic: float = 0.5
    w_bm25: float = 0.4
    w_graph: float = 0.1
    max_results: int = 5
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    bm25_top_units: int = 50
    frontier: int = 3
    richness_threshold: float = 0.5
    verbosity_scale: int = 50
    embedder: str = "hashed"
    embedding_dim: int = 256
    sic_mode: str = "embed"
    out: str = "out"
    component: Optional[str] = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if min(self.w_sic, self.w_bm25, self.w_graph) < 0:
            raise ValueError("weights must be non-negative")
        if self.max_results < 1 or self.bm25_top_units < 1 or self.frontier < 0:
            raise ValueError("max_results and bm25_top_units must be >= 1, frontier >= 0")
        if self.embedder != "hashed":
            raise ValueError(f"unknown embedder {self.embedder!r}")
        GraphMode.parse(self.mode)
        SicMode(self.sic_mode.upper())

    @property
    def graph_mode(self) -> GraphMode:
        return GraphMode.parse(self.mode)

    @property
    def sic(self) -> SicMode:
        return SicMode(self.sic_mode.upper())

    @property
    def bm25_params(self) -> Bm25Params:
        return Bm25Params(self.bm25_k1, self.bm25_b)

    def make_embedder(self) -> HashingEmbedder:
        return HashingEmbedder(self.embedding_dim)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **overrides: Any) -> "Config":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path: Optional[str | Path] = None, **overrides: Any) -> Config:
    """Read ``path`` (or ``$MULTICOLOR_CONFIG``) and apply non-None overrides."""
    path = path or os.environ.get(CONFIG_ENV)
    data: dict[str, Any] = {}
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(Config)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return Config(**data).with_overrides(**overrides)
