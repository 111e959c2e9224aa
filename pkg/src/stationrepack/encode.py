"""Direct SAT encoding of repacking instances and model decoding."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import RepackingInstance


class CorruptModelError(ValueError):
    """A model leaves some station without a true channel variable."""


@dataclass(frozen=True, eq=False)
class CnfFormula:
    """Clauses over variables 1..n_vars (DIMACS sign convention).

    ``var_map[i]`` is the ``(station, channel)`` slot of variable ``i + 1``.
    Variables are numbered lexicographically by (station, channel).
    """

    n_vars: int
    clauses: list[list[int]]
    var_map: list[tuple[int, int]]
    n_at_least_one: int
    n_at_most_one: int
    n_interference: int

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        return {slot: i + 1 for i, slot in enumerate(self.var_map)}

    @cached_property
    def stations(self) -> list[int]:
        return sorted({s for s, _ in self.var_map})

    def station_layout(self) -> tuple[np.ndarray, np.ndarray]:
        """(station_start, var_station) arrays for the search kernels; 0-based vars."""
        starts = [0]
        var_station = np.empty(self.n_vars, dtype=np.int32)
        current = None
        k = -1
        for i, (s, _) in enumerate(self.var_map):
            if s != current:
                if current is not None:
                    starts.append(i)
                current = s
                k += 1
            var_station[i] = k
        starts.append(self.n_vars)
        if self.n_vars == 0:
            starts = [0]
        return np.asarray(starts, dtype=np.int32), var_station

    def flat_clauses(self) -> tuple[np.ndarray, np.ndarray]:
        """Literals as ``2*var + sign`` (0-based var, sign 1 for negation) plus CSR offsets."""
        lits = np.fromiter(
            ((abs(l) - 1) * 2 + (l < 0) for cl in self.clauses for l in cl),
            dtype=np.int32,
        )
        offsets = np.zeros(len(self.clauses) + 1, dtype=np.int32)
        np.cumsum([len(cl) for cl in self.clauses], out=offsets[1:])
        return lits, offsets

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n_vars} {len(self.clauses)}"]
        lines.extend(" ".join(map(str, cl)) + " 0" for cl in self.clauses)
        return "\n".join(lines) + "\n"

    def write_dimacs(self, path) -> None:
        """Write ``path`` in DIMACS CNF and ``path.varmap.json`` with the slot map."""
        path = Path(path)
        path.write_text(self.to_dimacs(), encoding="utf-8")
        sidecar = path.with_name(path.name + ".varmap.json")
        sidecar.write_text(json.dumps({str(i + 1): list(slot) for i, slot in enumerate(self.var_map)}),
                           encoding="utf-8")


def encode(instance: RepackingInstance, include_at_most_one: bool = False) -> CnfFormula:
    if instance.trivially_infeasible:
        raise ValueError("instance has an empty domain; nothing to encode")
    var_map = [(s, c) for s in instance.stations for c in sorted(instance.domains[s])]
    index = {slot: i + 1 for i, slot in enumerate(var_map)}
    clauses: list[list[int]] = []
    for s in instance.stations:
        clauses.append([index[(s, c)] for c in sorted(instance.domains[s])])
    n_alo = len(clauses)
    if include_at_most_one:
        for s in instance.stations:
            for c1, c2 in combinations(sorted(instance.domains[s]), 2):
                clauses.append([-index[(s, c1)], -index[(s, c2)]])
    n_amo = len(clauses) - n_alo
    for a, b in sorted(instance.pairs):
        clauses.append([-index[a], -index[b]])
    return CnfFormula(len(var_map), clauses, var_map, n_alo, n_amo, len(clauses) - n_alo - n_amo)


def decode(formula: CnfFormula, model: Mapping[int, bool] | Sequence[bool]) -> dict[int, int]:
    """Map each station to the lowest channel whose variable is true.

    ``model`` is either a sequence indexed by 0-based variable or a mapping
    from 1-based variable to truth value.
    """
    if isinstance(model, Mapping):
        truth = lambda v: bool(model.get(v, False))  # noqa: E731
    else:
        truth = lambda v: bool(model[v - 1])  # noqa: E731
    out: dict[int, int] = {}
    for i, (s, c) in enumerate(formula.var_map):
        if s not in out and truth(i + 1):
            out[s] = c
    missing = [s for s in formula.stations if s not in out]
    if missing:
        raise CorruptModelError(f"no true channel variable for stations {missing}")
    return out
