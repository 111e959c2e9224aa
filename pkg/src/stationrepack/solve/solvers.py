"""Single-lane feasibility checkers.

``brute_force`` is the exact test oracle and shares no code with the SAT
path. ``greedy_check`` only tries to slot the new station into the previous
packing. ``solve_complete`` and ``solve_local`` run a configuration's
preprocessing and then the DPLL or local-search kernel on what is left.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from .. import _kernels
from ..encode import decode, encode
from ..model import RepackingInstance, verify_assignment
from ..simplify import augmentation_ring, extend_ring_solution, simplify
from .types import HEURISTICS, CancelToken, SolverConfig, SolverResult, Status

BRUTE_FORCE_LIMIT = 10 ** 8


class OracleTooLarge(ValueError):
    pass


def brute_force(instance: RepackingInstance) -> SolverResult:
    """Exhaustive backtracking over station-channel assignments."""
    t0 = time.perf_counter()
    size = math.prod(len(instance.domains[s]) for s in instance.stations)
    if size > BRUTE_FORCE_LIMIT:
        raise OracleTooLarge(f"{size} assignments exceeds the oracle limit {BRUTE_FORCE_LIMIT}")
    order = list(instance.stations)
    domains = [sorted(instance.domains[s]) for s in order]
    conflicts = instance.conflicts
    gamma: dict[int, int] = {}

    def search(i: int) -> bool:
        if i == len(order):
            return True
        s = order[i]
        for c in domains[i]:
            if any(gamma.get(s2) == c2 for (s2, c2) in conflicts.get((s, c), ())):
                continue
            gamma[s] = c
            if search(i + 1):
                return True
            del gamma[s]
        return False

    found = search(0)
    runtime = time.perf_counter() - t0
    if found:
        return SolverResult(Status.SAT, dict(gamma), runtime, "brute_force")
    return SolverResult(Status.UNSAT, None, runtime, "brute_force", unsat_stations=instance.station_set)


def greedy_check(instance: RepackingInstance) -> SolverResult:
    """Try each channel of the target against the untouched previous packing.

    Incomplete: when no channel fits the result is TIMEOUT (undecided),
    never UNSAT.
    """
    if instance.previous is None or instance.target is None:
        raise ValueError("greedy check needs a previous assignment and a target station")
    t0 = time.perf_counter()
    prev = instance.previous
    others = [s for s in instance.stations if s != instance.target]
    if all(s in prev and prev[s] in instance.domains[s] for s in others):
        conflicts = instance.conflicts
        s = instance.target
        for c in sorted(instance.domains[s]):
            if not any(prev.get(s2) == c2 for (s2, c2) in conflicts.get((s, c), ())):
                gamma = {o: prev[o] for o in others}
                gamma[s] = c
                if verify_assignment(instance, gamma):
                    return SolverResult(Status.SAT, gamma, time.perf_counter() - t0, "greedy")
    return SolverResult(Status.TIMEOUT, None, time.perf_counter() - t0, "greedy")


# --------------------------------------------------------------------------
# kernel adapters


def _degrees(instance: RepackingInstance) -> np.ndarray:
    g = instance.graph
    return np.asarray([len(g[s]) for s in instance.stations], dtype=np.int32)


def _complete_core(instance: RepackingInstance, config: SolverConfig, seconds: float,
                   token: CancelToken, seed: int) -> tuple[Status | None, dict | None]:
    formula = encode(instance, include_at_most_one=config.at_most_one)
    lits, offsets = formula.flat_clauses()
    station_start, var_station = formula.station_layout()
    model = np.zeros(formula.n_vars, dtype=np.int8)
    status, decisions, conflicts = _kernels.dpll(
        lits, offsets, formula.n_vars, station_start, var_station, _degrees(instance),
        HEURISTICS[config.heuristic], config.restart_interval, seed, max(seconds, 0.0),
        token.flag, model,
    )
    if status == _kernels.SAT:
        return Status.SAT, decode(formula, model)
    if status == _kernels.UNSAT:
        return Status.UNSAT, None
    return (None if status == _kernels.CANCELLED else Status.TIMEOUT), None


def local_layout(instance: RepackingInstance) -> dict[str, np.ndarray | list]:
    """Flat arrays for the local-search kernel; variables numbered as in :func:`encode`."""
    var_map = [(s, c) for s in instance.stations for c in sorted(instance.domains[s])]
    index = {slot: i for i, slot in enumerate(var_map)}
    station_start = [0]
    for s in instance.stations:
        station_start.append(station_start[-1] + len(instance.domains[s]))
    var_station = np.repeat(np.arange(len(instance.stations), dtype=np.int32),
                            np.diff(station_start).astype(np.int64)) if var_map else np.zeros(0, np.int32)
    pairs = sorted(instance.pairs)
    pu = np.asarray([index[a] for a, _ in pairs], dtype=np.int32)
    pv = np.asarray([index[b] for _, b in pairs], dtype=np.int32)
    incident: list[list[tuple[int, int]]] = [[] for _ in var_map]
    for p, (a, b) in enumerate(zip(pu.tolist(), pv.tolist())):
        incident[a].append((b, p))
        incident[b].append((a, p))
    conf_start = np.zeros(len(var_map) + 1, dtype=np.int32)
    np.cumsum([len(x) for x in incident], out=conf_start[1:])
    conf_other = np.asarray([o for x in incident for o, _ in x], dtype=np.int32)
    conf_pair = np.asarray([p for x in incident for _, p in x], dtype=np.int32)
    return {
        "var_map": var_map,
        "index": index,
        "station_start": np.asarray(station_start, dtype=np.int32),
        "var_station": np.asarray(var_station, dtype=np.int32),
        "conf_start": conf_start,
        "conf_other": conf_other,
        "conf_pair": conf_pair,
        "pair_u": pu,
        "pair_v": pv,
    }


def warm_start_vector(instance: RepackingInstance, layout) -> np.ndarray:
    init = np.full(len(instance.stations), -1, dtype=np.int32)
    prev = instance.previous or {}
    for k, s in enumerate(instance.stations):
        if s == instance.target:
            continue
        c = prev.get(s)
        if c is not None and (s, c) in layout["index"]:
            init[k] = layout["index"][(s, c)]
    return init


def _local_core(instance: RepackingInstance, config: SolverConfig, seconds: float,
                token: CancelToken, seed: int, max_flips: int = -1) -> tuple[Status | None, dict | None]:
    layout = local_layout(instance)
    if config.warm_start:
        init = warm_start_vector(instance, layout)
    else:
        init = np.full(len(instance.stations), -1, dtype=np.int32)
    out = np.zeros(len(instance.stations), dtype=np.int32)
    status, flips = _kernels.walksat(
        layout["station_start"], layout["var_station"], layout["conf_start"], layout["conf_other"],
        layout["conf_pair"], layout["pair_u"], layout["pair_v"], init, config.noise,
        config.restart_interval, config.warm_start_restart_fraction, seed, max(seconds, 0.0),
        max_flips, token.flag, out,
    )
    if status == _kernels.SAT:
        return Status.SAT, {s: layout["var_map"][int(out[k])][1] for k, s in enumerate(instance.stations)}
    return (None if status == _kernels.CANCELLED else Status.TIMEOUT), None


Core = Callable[[RepackingInstance, SolverConfig, float, CancelToken, int], tuple]


def run_config(instance: RepackingInstance, config: SolverConfig, token: CancelToken | None = None,
               cutoff: float | None = None) -> SolverResult:
    """Run one configuration (preprocessing + kernel) within ``cutoff`` seconds."""
    t0 = time.perf_counter()
    token = token or CancelToken()
    cutoff = config.cutoff if cutoff is None else cutoff
    deadline = t0 + cutoff
    name = config.name

    def done(status, witness=None, unsat=None, **stats):
        if status is Status.UNSAT and config.kind == "local_search":
            # local search is incomplete; infeasibility proofs belong to complete members
            status, unsat, stats["unsat_by_preprocessing"] = Status.TIMEOUT, None, True
        return SolverResult(status, witness, time.perf_counter() - t0, name, unsat_stations=unsat, stats=stats)

    if config.kind == "greedy":
        if instance.previous is None or instance.target is None:
            return done(Status.TIMEOUT)
        res = greedy_check(instance)
        res.solver_name = name
        return res
    if instance.trivially_infeasible:
        return done(Status.UNSAT, unsat=frozenset(instance.empty_domain_stations()[:1]))
    core: Core = _complete_core if config.kind == "complete" else _local_core

    if config.ring_radii and instance.previous is not None and instance.target is not None:
        budget = cutoff * config.ring_budget_fraction / len(config.ring_radii)
        seen = None
        for radius in config.ring_radii:
            ring = augmentation_ring(instance, radius)
            if ring.station_set == seen or ring.station_set == instance.station_set:
                continue
            seen = ring.station_set
            seconds = min(budget, deadline - time.perf_counter())
            status, witness = core(ring, config, seconds, token, config.seed)
            if status is None:
                return done(Status.TIMEOUT, cancelled=True)
            if status is Status.SAT:
                gamma = extend_ring_solution(instance, ring, witness)
                if verify_assignment(instance, gamma):
                    return done(Status.SAT, gamma, ring_radius=radius)
            if time.perf_counter() >= deadline:
                return done(Status.TIMEOUT)

    for use_previous in (True, False):
        inst = instance if use_previous else _without_previous(instance)
        simp = simplify(inst, arc=config.arc_consistency, unconstrained=config.unconstrained_removal,
                        decomposition=config.decomposition)
        if simp.report.infeasible:
            return done(Status.UNSAT, unsat=simp.report.infeasible_component, stage="preprocessing")
        partial: dict[int, int] = {}
        for k, comp in enumerate(simp.to_solve):
            if token.cancelled:
                return done(Status.TIMEOUT, cancelled=True)
            sub = simp.instance.restrict(comp)
            status, witness = core(sub, config, deadline - time.perf_counter(), token, config.seed + k)
            if status is None:
                return done(Status.TIMEOUT, cancelled=True)
            if status is Status.UNSAT:
                return done(Status.UNSAT, unsat=comp)
            if status is Status.TIMEOUT:
                return done(Status.TIMEOUT)
            partial.update(witness)
        gamma = simp.complete(partial)
        if gamma is not None and verify_assignment(instance, gamma):
            return done(Status.SAT, gamma, components=len(simp.to_solve))
        if not use_previous or instance.previous is None:
            break
    raise RuntimeError(f"solver {name!r} produced a non-verifying assignment")


def _without_previous(instance: RepackingInstance) -> RepackingInstance:
    return RepackingInstance(instance.stations, instance.max_channel, instance.domains, instance.pairs,
                             None, None, instance.trivially_infeasible, instance.name)


def solve_complete(instance: RepackingInstance, config: SolverConfig | None = None,
                   token: CancelToken | None = None, cutoff: float | None = None) -> SolverResult:
    config = config or SolverConfig()
    if config.kind != "complete":
        raise ValueError("solve_complete needs a config of kind 'complete'")
    return run_config(instance, config, token, cutoff)


def solve_local(instance: RepackingInstance, config: SolverConfig | None = None,
                token: CancelToken | None = None, cutoff: float | None = None) -> SolverResult:
    config = config or SolverConfig(name="local_search", kind="local_search")
    if config.kind != "local_search":
        raise ValueError("solve_local needs a config of kind 'local_search'")
    return run_config(instance, config, token, cutoff)
