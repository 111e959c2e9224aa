from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np


class Status(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    TIMEOUT = "TIMEOUT"

    @property
    def decided(self) -> bool:
        return self is not Status.TIMEOUT


@dataclass
class SolverResult:
    status: Status
    witness: dict[int, int] | None = None
    runtime: float = 0.0
    solver_name: str = ""
    # station set of the (simplified) component proven infeasible, when known
    unsat_stations: frozenset[int] | None = None
    cache_hit: bool = False
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.status = Status(self.status)
        if self.status is Status.SAT and self.witness is None:
            raise ValueError("SAT result needs a witness")
        if self.status is not Status.SAT and self.witness is not None:
            raise ValueError(f"{self.status.value} result must not carry a witness")

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "witness": None if self.witness is None else {str(k): v for k, v in sorted(self.witness.items())},
            "runtime_ms": round(self.runtime * 1000.0, 3),
            "solver": self.solver_name,
            "unsat_stations": None if self.unsat_stations is None else sorted(self.unsat_stations),
            "cache_hit": self.cache_hit,
        }


class CancelToken:
    """Shared stop flag; the compiled kernels read ``flag`` without the GIL."""

    def __init__(self):
        self.flag = np.zeros(1, dtype=np.int32)

    def cancel(self) -> None:
        self.flag[0] = 1

    @property
    def cancelled(self) -> bool:
        return bool(self.flag[0])


HEURISTICS = {"most-constrained-station": 0, "max-degree": 1, "lexicographic": 2}
KINDS = ("complete", "local_search", "greedy")


@dataclass(frozen=True)
class SolverConfig:
    """One hand-specifiable solver configuration.

    ``restart_interval`` counts conflicts for the complete solver and flips
    for local search; 0 disables restarts. ``ring_radii`` lists the
    augmentation-ring radii tried (in order) before the full problem when a
    previous packing is available; together they get
    ``ring_budget_fraction`` of the cutoff.
    """

    name: str = "complete"
    kind: str = "complete"
    cutoff: float = 1.0
    seed: int = 0
    heuristic: str = "most-constrained-station"
    restart_interval: int = 0
    noise: float = 0.2
    warm_start: bool = False
    warm_start_restart_fraction: float = 0.0
    arc_consistency: bool = False
    unconstrained_removal: bool = False
    decomposition: bool = False
    ring_radii: tuple[int, ...] = ()
    ring_budget_fraction: float = 0.25
    at_most_one: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown solver kind {self.kind!r}; expected one of {KINDS}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"unknown heuristic {self.heuristic!r}; expected one of {sorted(HEURISTICS)}")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if not 0.0 <= self.warm_start_restart_fraction <= 1.0:
            raise ValueError("warm_start_restart_fraction must lie in [0, 1]")
        if not 0.0 < self.ring_budget_fraction <= 1.0:
            raise ValueError("ring_budget_fraction must lie in (0, 1]")
        if any(r < 1 for r in self.ring_radii):
            raise ValueError("ring radii must be >= 1")
        object.__setattr__(self, "ring_radii", tuple(int(r) for r in self.ring_radii))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SolverConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        if "cutoff_ms" in raw:
            raw["cutoff"] = float(raw.pop("cutoff_ms")) / 1000.0
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        if "ring_radii" in raw:
            raw["ring_radii"] = tuple(raw["ring_radii"])
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ring_radii"] = list(self.ring_radii)
        out["cutoff_ms"] = out.pop("cutoff") * 1000.0
        return out

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Portfolio:
    configs: tuple[SolverConfig, ...]

    def __post_init__(self):
        if not self.configs:
            raise ValueError("a portfolio needs at least one solver configuration")
        object.__setattr__(self, "configs", tuple(self.configs))
        names = [c.name for c in self.configs]
        if len(set(names)) != len(names):
            raise ValueError(f"portfolio member names must be unique, got {names}")

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)

    @classmethod
    def from_json(cls, raw) -> "Portfolio":
        if isinstance(raw, Mapping):
            raw = raw.get("solvers", raw.get("configs"))
        if not isinstance(raw, list):
            raise ValueError("portfolio file must hold a JSON list of solver configurations")
        return cls(tuple(SolverConfig.from_dict(r) for r in raw))

    @classmethod
    def load(cls, path) -> "Portfolio":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def dumps(self) -> str:
        return json.dumps([c.to_dict() for c in self.configs], indent=2)


def default_portfolio() -> Portfolio:
    """Complete search with and without preprocessing plus warm and cold local search."""
    from importlib.resources import files

    text = files("stationrepack").joinpath("data/default_portfolio.json").read_text(encoding="utf-8")
    return Portfolio.from_json(json.loads(text))
