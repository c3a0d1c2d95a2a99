"""Validated experiment configuration (YAML or JSON text)."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .functionals.graphs import GraphSpec

SCHEMA_VERSION = 1

EXPERIMENTS = {
    "rate": "rate function curve phi_p(t) for one functional over a t or u grid",
    "free-energy": "exact free energy against the mean-field value and its error terms",
    "sandwich": "certified interval for log P(f(Y) >= tn) next to the exact tail",
    "net-audit": "spectral, Fourier and subgraph net certificates on random inputs",
    "triangles": "triangle upper-tail rates with planted-clique bounds (optional closed-form overlay)",
    "ap3": "3-AP upper-tail rates with planted-interval bounds",
    "ergm": "ERGM free energy: exact, mean field, error budget",
}

FunctionalKind = Literal["homdensity", "ap3", "curie-weiss", "chain", "linear", "ergm"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FunctionalConfig(_Strict):
    kind: FunctionalKind = "homdensity"
    graph: Union[str, list[tuple[int, int]]] = "triangle"
    N: int = Field(6, ge=2)
    n: int = Field(12, ge=1)
    beta: float = 1.0
    graphs: list[Union[str, list[tuple[int, int]]]] = Field(default_factory=lambda: ["edge", "triangle"])
    betas: list[float] = Field(default_factory=lambda: [0.0, 0.5])

    @field_validator("graph")
    @classmethod
    def _graph_ok(cls, v):
        to_graph(v)
        return v

    @model_validator(mode="after")
    def _ergm_lengths(self):
        if self.kind == "ergm":
            if len(self.graphs) != len(self.betas) or not self.graphs:
                raise ValueError("graphs and betas must be non-empty and of equal length")
            for g in self.graphs:
                to_graph(g)
        return self


class SolverConfig(_Strict):
    n_random: int = Field(16, ge=0)
    max_outer: int = Field(25, ge=1)
    max_inner: int = Field(400, ge=1)
    tol: float = Field(1e-9, gt=0)


class OutputConfig(_Strict):
    dir: Optional[str] = None
    csv: str = "results.csv"
    audit: str = "audit.json"


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: Literal["rate", "free-energy", "sandwich", "net-audit", "triangles", "ap3", "ergm"]
    functional: FunctionalConfig = Field(default_factory=FunctionalConfig)
    p: list[float] = Field(default_factory=lambda: [0.3])
    u: Optional[list[float]] = None
    t: Optional[list[float]] = None
    delta: float = Field(0.1, gt=0, description="sandwich shift, as a fraction of t")
    eps: float = Field(0.25, gt=0)
    mc_budget: int = Field(0, ge=0, description="extra Monte-Carlo samples per instance, 0 for none")
    lz_overlay: bool = False
    net_samples: int = Field(5, ge=1)
    net_sizes: list[int] = Field(default_factory=lambda: [16, 32])
    taus: list[float] = Field(default_factory=lambda: [0.8, 0.5])
    solver: SolverConfig = Field(default_factory=SolverConfig)
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    budget_states: int = Field(1 << 25, ge=2, le=1 << 30, description="largest state count enumerated exactly")
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("p")
    @classmethod
    def _open_interval(cls, v):
        if not v:
            raise ValueError("at least one p is required")
        for p in v:
            if not 0.0 < p < 1.0:
                raise ValueError(f"p = {p} must lie in the open interval (0, 1)")
        return v

    @field_validator("u")
    @classmethod
    def _ratios(cls, v):
        if v is not None and any(u <= 1 for u in v):
            raise ValueError("every ratio u must exceed 1")
        return v

    @model_validator(mode="after")
    def _grid(self):
        if self.u is not None and self.t is not None:
            raise ValueError("give either u or t, not both")
        if self.u is None and self.t is None and self.experiment in ("rate", "sandwich", "triangles", "ap3"):
            object.__setattr__(self, "u", [1.2, 1.5, 2.0])
        return self


def to_graph(spec) -> GraphSpec:
    if isinstance(spec, str):
        return GraphSpec.named(spec)
    edges = [tuple(int(v) for v in e) for e in spec]
    k = max(max(e) for e in edges) + 1 if edges else 0
    return GraphSpec(k, tuple(edges))


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data) -> ExperimentConfig:
    """Validate a mapping; every problem is reported with its field path."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def read_config_data(path) -> dict:
    """Raw mapping from a YAML (or JSON) file, not yet validated."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def load_config(path) -> ExperimentConfig:
    return parse_config(read_config_data(path))
