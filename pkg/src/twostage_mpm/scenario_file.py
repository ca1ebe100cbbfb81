"""Declarative scenario documents (YAML or JSON).

Example::

    generators:
      - {c: 1.0, eps: 0.0}
      - {c: 1.0}
    loads:
      - {d: 1.0}
    policy: DayAheadMPM
    behavior: PriceAnticipating
    solver: {damping: 0.5}          # optional
    experiment: {seed: 42}          # optional
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field

from .best_response import SolverConfig
from .core import Behavior, GeneratorParams, LoadParams, MarketScenario, Policy

_STRICT = ConfigDict(extra="forbid", allow_inf_nan=False)


class GeneratorEntry(BaseModel):
    model_config = _STRICT
    c: float = Field(gt=0)
    eps: float = Field(default=0.0, ge=0)


class LoadEntry(BaseModel):
    model_config = _STRICT
    d: float = Field(gt=0)


class SolverEntry(BaseModel):
    model_config = _STRICT
    max_outer_iters: int = Field(default=SolverConfig.max_outer_iters, ge=1)
    max_inner_iters: int = Field(default=SolverConfig.max_inner_iters, ge=1)
    damping: float = Field(default=SolverConfig.damping, gt=0, le=1)
    tol_fixed_point: float = Field(default=SolverConfig.tol_fixed_point, gt=0, le=1e-3)
    line_search_grid: int = Field(default=SolverConfig.line_search_grid, ge=3)
    probe_iters: int = Field(default=SolverConfig.probe_iters, ge=1)
    inner_tol: float = Field(default=SolverConfig.inner_tol, gt=0, le=1e-3)
    force_search: bool = False

    def to_config(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class ExperimentEntry(BaseModel):
    model_config = _STRICT
    seed: Optional[int] = None
    samples: Optional[int] = Field(default=None, ge=1)
    mean: Optional[float] = None
    variance: Optional[float] = Field(default=None, ge=0)
    variance_is_std: bool = False
    # ratio-grid axes
    G_min: int = Field(default=4, ge=1)
    G_max: int = Field(default=20, ge=1)
    c: float = Field(default=1.0, gt=0)
    eps_ratio: float = Field(default=0.1, ge=0)
    d: float = Field(default=1.0, gt=0)
    # load-size split fractions of total demand given to load 1
    fractions: Optional[List[float]] = None


class ScenarioFile(BaseModel):
    model_config = _STRICT
    generators: List[GeneratorEntry] = Field(min_length=1)
    loads: List[LoadEntry] = Field(min_length=1)
    policy: Policy = Policy.STANDARD
    behavior: Behavior = Behavior.PRICE_TAKING
    solver: Optional[SolverEntry] = None
    experiment: Optional[ExperimentEntry] = None

    def to_scenario(self, policy: Optional[Policy] = None,
                    behavior: Optional[Behavior] = None) -> MarketScenario:
        return MarketScenario(
            generators=tuple(GeneratorParams(g.c, g.eps) for g in self.generators),
            loads=tuple(LoadParams(l.d) for l in self.loads),
            policy=policy or self.policy,
            behavior=behavior or self.behavior,
        )

    def solver_config(self) -> SolverConfig:
        return (self.solver or SolverEntry()).to_config()

    @classmethod
    def from_scenario(cls, sc: MarketScenario, solver: Optional[SolverConfig] = None) -> "ScenarioFile":
        return cls(
            generators=[GeneratorEntry(c=g.c, eps=g.eps) for g in sc.generators],
            loads=[LoadEntry(d=l.d) for l in sc.loads],
            policy=sc.policy,
            behavior=sc.behavior,
            solver=None if solver is None else SolverEntry(**solver.__dict__),
        )

    def normalized(self) -> dict:
        """Fully expanded document: defaults filled in, enums as strings."""
        doc = self.model_dump(mode="json")
        if doc["solver"] is None:
            doc["solver"] = SolverEntry().model_dump(mode="json")
        return doc


def parse_text(text: str, suffix: str = ".yaml") -> ScenarioFile:
    data = json.loads(text) if suffix == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError("scenario document must be a mapping")
    return ScenarioFile.model_validate(data)


def load(path) -> ScenarioFile:
    path = Path(path)
    return parse_text(path.read_text(), path.suffix.lower())
