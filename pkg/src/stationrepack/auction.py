"""Descending-clock reverse auction simulator, VCG benchmark and economic metrics."""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .cache import ContainmentCache, Verdict
from .model import Band, InterferenceData, RepackingInstance, band, build_instance, verify_assignment
from .solve import (
    Portfolio,
    SolverConfig,
    SolverResult,
    Status,
    brute_force,
    default_portfolio,
    greedy_check,
    run_portfolio,
    solve_complete,
)

log = logging.getLogger(__name__)

VALUE_RATIO = {Band.UHF: 1.0, Band.HVHF: 2.0 / 3.0, Band.LVHF: 1.0 / 3.0, Band.OFF: 0.0}


class ClearingTargetInfeasible(RuntimeError):
    """The stations that must stay on air cannot be packed below the clearing target."""


@dataclass(frozen=True)
class Valuation:
    v_uhf: float

    def __post_init__(self):
        # zero is allowed so hand-traced profiles with worthless stations work
        if not self.v_uhf >= 0 or math.isinf(self.v_uhf):
            raise ValueError("UHF value must be finite and nonnegative")

    def value(self, b: Band) -> float:
        return self.v_uhf * VALUE_RATIO[b]

    @property
    def v_hvhf(self) -> float:
        return self.value(Band.HVHF)

    @property
    def v_lvhf(self) -> float:
        return self.value(Band.LVHF)


def sample_valuations(stations: Iterable[int], seed: int, location: float = math.log(1e6),
                      scale: float = 1.0) -> dict[int, Valuation]:
    """Log-normal UHF values, ``exp(location + scale * N(0, 1))``, in station order."""
    stations = sorted(stations)
    rng = np.random.default_rng(seed)
    draws = rng.lognormal(mean=location, sigma=scale, size=len(stations)) if scale > 0 else \
        np.full(len(stations), math.exp(location))
    return {s: Valuation(float(v)) for s, v in zip(stations, draws)}


def opening_prices(data: InterferenceData, stations: Iterable[int], base: float, factor: float = 3.0) -> dict[int, float]:
    """``factor * base * sqrt(1 + degree)``: more interference, higher opening offer."""
    stations = list(stations)
    keep = set(stations)
    return {s: factor * base * math.sqrt(1 + len(data.neighbours(s) & keep)) for s in stations}


def decide_participation(valuations: Mapping[int, Valuation], prices: Mapping[int, float]) -> set[int]:
    """Stations whose opening offer strictly exceeds their home-band value."""
    return {s for s, p in prices.items() if s in valuations and p > valuations[s].v_uhf}


class BidderStatus(str, enum.Enum):
    ACTIVE = "ACTIVE"
    EXITED = "EXITED"
    FROZEN = "FROZEN"


Checker = Callable[[RepackingInstance], SolverResult]


def make_checker(kind: str, cutoff: float = 1.0, portfolio: Portfolio | None = None,
                 cache: ContainmentCache | None = None) -> Checker:
    """Feasibility checker for the clock: ``greedy``, ``portfolio``, ``complete`` or ``oracle``."""
    if kind == "greedy":
        base = greedy_check
    elif kind == "portfolio":
        pf = portfolio or default_portfolio()
        base = lambda inst: run_portfolio(inst, pf, cutoff)  # noqa: E731
    elif kind == "complete":
        cfg = SolverConfig(name="complete", arc_consistency=True, unconstrained_removal=True,
                           decomposition=True, ring_radii=(1, 2))
        base = lambda inst: solve_complete(inst, cfg, cutoff=cutoff)  # noqa: E731
    elif kind == "oracle":
        base = brute_force
    else:
        raise ValueError(f"unknown checker {kind!r}")
    if cache is None:
        return base
    from .cache import cached_solve

    return lambda inst: cached_solve(inst, cache, base)


@dataclass
class AuctionConfig:
    max_channel: int
    opening_price: dict[int, float]
    decrement_rate: float = 0.05
    cutoff: float = 1.0
    checker: str | Checker = "portfolio"
    portfolio: Portfolio | None = None
    seed: int = 0
    zero_price: float = 0.01
    stations: list[int] | None = None
    record_instances: bool = True

    def __post_init__(self):
        if not 0.0 < self.decrement_rate < 1.0:
            raise ValueError("decrement_rate must lie in (0, 1)")
        if any(p < 0 for p in self.opening_price.values()):
            raise ValueError("opening prices must be nonnegative")


@dataclass
class CheckEvent:
    round: int
    station: int
    stations_checked: int
    result: str
    runtime: float
    solver: str
    price_before: float
    price_after: float
    decision: str
    instance: dict | None = None

    def to_json(self, timings: bool = True) -> dict:
        out = {
            "round": self.round,
            "station": self.station,
            "stations_checked": self.stations_checked,
            "result": self.result,
            "solver": self.solver,
            "price_before": self.price_before,
            "price_after": self.price_after,
            "decision": self.decision,
        }
        if timings:
            out["runtime_ms"] = round(self.runtime * 1000.0, 3)
        if self.instance is not None:
            out["instance"] = self.instance
        return out


@dataclass
class AuctionState:
    status: dict[int, BidderStatus]
    price: dict[int, float]
    exited_packing: dict[int, int]
    round: int = 0
    event_log: list[CheckEvent] = field(default_factory=list)
    price_history: dict[int, list[float]] = field(default_factory=dict)


@dataclass
class AuctionOutcome:
    stations: list[int]
    participants: set[int]
    winners: set[int]
    payments: dict[int, float]
    final_packing: dict[int, int]
    cost: float
    value_loss: float
    state: AuctionState | None = None
    mechanism: str = "clock"

    def to_json(self, include_events: bool = True, timings: bool = True) -> dict:
        out = {
            "mechanism": self.mechanism,
            "stations": self.stations,
            "participants": sorted(self.participants),
            "winners": sorted(self.winners),
            "payments": {str(s): self.payments[s] for s in sorted(self.payments)},
            "final_packing": {str(s): c for s, c in sorted(self.final_packing.items())},
            "cost": self.cost,
            "value_loss": self.value_loss,
        }
        if self.state is not None:
            out["rounds"] = self.state.round
            out["frozen_prices"] = {str(s): self.state.price[s] for s in sorted(self.winners)}
            if include_events:
                out["events"] = [e.to_json(timings) for e in self.state.event_log]
        return out


def value_loss(stations: Iterable[int], packing: Mapping[int, int], valuations: Mapping[int, Valuation]) -> float:
    """Sum of home-band (UHF) value minus value for the band held after the auction."""
    terms = []
    for s in stations:
        if s not in valuations:
            continue
        post = band(packing[s]) if s in packing else Band.OFF
        terms.append(valuations[s].value(Band.UHF) - valuations[s].value(post))
    return math.fsum(terms)


def pack_on_air(data: InterferenceData, stations: Iterable[int], max_channel: int, cutoff: float = 60.0) -> dict[int, int]:
    inst = build_instance(data, stations, max_channel)
    res = solve_complete(inst, SolverConfig(name="setup", arc_consistency=True, unconstrained_removal=True,
                                            decomposition=True), cutoff=cutoff)
    if res.status is not Status.SAT:
        raise ClearingTargetInfeasible(
            f"{len(inst.stations)} stations that must stay on air cannot be packed at max_channel "
            f"{max_channel} ({res.status.value})")
    return res.witness


def run_reverse_auction(data: InterferenceData, config: AuctionConfig,
                        valuations: Mapping[int, Valuation]) -> AuctionOutcome:
    """Simulate the descending clock with myopic bidders.

    Each round visits active bidders in ascending id. A bidder whose station
    can still be packed alongside everyone already on air gets a price
    ``(1 - decrement_rate)`` lower and exits once that price no longer beats
    its value; otherwise (UNSAT or undecided) it freezes at its current price
    and wins.
    """
    stations = sorted(config.stations if config.stations is not None else data.stations)
    prices = {s: config.opening_price[s] for s in stations if s in config.opening_price}
    participants = decide_participation({s: valuations[s] for s in stations if s in valuations}, prices)
    on_air = sorted(set(stations) - participants)
    packing = pack_on_air(data, on_air, config.max_channel, max(60.0, config.cutoff))

    if callable(config.checker):
        checker = config.checker
    else:
        checker = make_checker(config.checker, config.cutoff, config.portfolio)

    state = AuctionState(
        status={s: BidderStatus.ACTIVE for s in sorted(participants)},
        price={s: prices[s] for s in sorted(participants)},
        exited_packing=dict(packing),
    )
    state.price_history = {s: [prices[s]] for s in participants}
    exited = set(on_air)

    while any(st is BidderStatus.ACTIVE for st in state.status.values()):
        state.round += 1
        for i in sorted(participants):
            if state.status[i] is not BidderStatus.ACTIVE:
                continue
            inst = build_instance(data, exited | {i}, config.max_channel, previous=state.exited_packing,
                                  target=i, name=f"r{state.round}s{i}")
            res = checker(inst)
            before = state.price[i]
            if res.status is Status.SAT:
                new = before * (1.0 - config.decrement_rate)
                if new < config.zero_price:
                    new = 0.0
                state.price[i] = new
                if new <= valuations[i].v_uhf:
                    state.status[i] = BidderStatus.EXITED
                    exited.add(i)
                    if not verify_assignment(inst, res.witness):
                        raise RuntimeError(f"checker returned a non-verifying packing for station {i}")
                    state.exited_packing = dict(res.witness)
                    decision = "exit"
                else:
                    decision = "continue"
            else:
                state.status[i] = BidderStatus.FROZEN
                decision = "freeze"
            state.price_history[i].append(state.price[i])
            state.event_log.append(CheckEvent(
                state.round, i, len(inst.stations), res.status.value, res.runtime, res.solver_name,
                before, state.price[i], decision, inst.to_json() if config.record_instances else None,
            ))

    winners = {s for s, st in state.status.items() if st is BidderStatus.FROZEN}
    payments = {s: (state.price[s] if s in winners else 0.0) for s in sorted(participants)}
    return AuctionOutcome(
        stations=stations,
        participants=participants,
        winners=winners,
        payments=payments,
        final_packing=dict(state.exited_packing),
        cost=math.fsum(payments.values()),
        value_loss=value_loss(stations, state.exited_packing, valuations),
        state=state,
    )


# --------------------------------------------------------------------------
# VCG

VCG_MAX_BIDDERS = 22


class _Feasibility:
    """Exact packability of station sets, memoised in a containment cache."""

    def __init__(self, data: InterferenceData, max_channel: int, cutoff: float):
        self.data = data
        self.max_channel = max_channel
        self.cutoff = cutoff
        self.cache = ContainmentCache.for_data(data, max_channel)
        self.calls = 0

    def packing(self, stations: Iterable[int]) -> dict[int, int] | None:
        stations = sorted(stations)
        ans = self.cache.query(stations)
        if ans.verdict is Verdict.FEASIBLE:
            return ans.witness
        if ans.verdict is Verdict.INFEASIBLE:
            return None
        self.calls += 1
        inst = build_instance(self.data, stations, self.max_channel)
        res = solve_complete(inst, SolverConfig(name="vcg", arc_consistency=True, unconstrained_removal=True,
                                                decomposition=True), cutoff=self.cutoff)
        if res.status is Status.TIMEOUT:
            raise RuntimeError(f"VCG feasibility check on {len(stations)} stations timed out")
        self.cache.add(inst, res)
        return res.witness

    def __call__(self, stations) -> bool:
        return self.packing(stations) is not None


def _best_on_air(bidders: list[int], values: Mapping[int, float], fixed: frozenset[int],
                 forced: frozenset[int], feasible: _Feasibility) -> tuple[float, frozenset[int]] | None:
    """Branch and bound for the most valuable packable set of bidders.

    ``fixed`` (non-bidders) and ``forced`` bidders are always on air.
    Returns (value of on-air bidders, on-air bidder set), or None when the
    forced set itself cannot be packed.
    """
    base = fixed | forced
    if not feasible(base):
        return None
    free = sorted((b for b in bidders if b not in forced), key=lambda b: (-values[b], b))
    suffix = [0.0] * (len(free) + 1)
    for k in range(len(free) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + values[free[k]]
    forced_value = math.fsum(values[b] for b in forced)
    best = [forced_value, frozenset(forced)]

    def dfs(k: int, chosen: frozenset[int], val: float) -> None:
        if val + suffix[k] <= best[0]:
            return
        if k == len(free):
            best[0], best[1] = val, chosen
            return
        b = free[k]
        grown = chosen | {b}
        if feasible(base | grown):
            dfs(k + 1, grown, val + values[b])
        dfs(k + 1, chosen, val)

    dfs(0, frozenset(forced), forced_value)
    return best[0], best[1]


def vcg(data: InterferenceData, stations: Iterable[int], max_channel: int,
        valuations: Mapping[int, Valuation], participants: Iterable[int] | None = None,
        cutoff: float = 60.0) -> AuctionOutcome:
    """Welfare-optimal packing with VCG payments to the stations taken off air.

    Only ``participants`` (default: every valued station) may go off air.
    A winner is paid the others' value under the optimum minus the others'
    best value when it must stay on air. A winner that cannot be on air in
    any packing is paid its own value.
    """
    stations = sorted(stations)
    bidders = sorted(set(participants) if participants is not None else {s for s in stations if s in valuations})
    if len(bidders) > VCG_MAX_BIDDERS:
        raise ValueError(f"{len(bidders)} bidders exceeds the exact VCG limit of {VCG_MAX_BIDDERS}")
    values = {b: valuations[b].v_uhf for b in bidders}
    fixed = frozenset(set(stations) - set(bidders))
    feasible = _Feasibility(data, max_channel, cutoff)
    best = _best_on_air(bidders, values, fixed, frozenset(), feasible)
    if best is None:
        raise ClearingTargetInfeasible("stations that must stay on air cannot be packed")
    v_star, on_air = best
    packing = feasible.packing(fixed | on_air)
    winners = set(bidders) - on_air
    payments = {}
    for b in bidders:
        if b not in winners:
            payments[b] = 0.0
            continue
        alt = _best_on_air(bidders, values, fixed, frozenset([b]), feasible)
        if alt is None:
            payments[b] = values[b]
        else:
            # others' value under the optimum minus others' best value with b on air
            payments[b] = v_star - (alt[0] - values[b])
    return AuctionOutcome(
        stations=stations,
        participants=set(bidders),
        winners=winners,
        payments=payments,
        final_packing=dict(packing),
        cost=math.fsum(payments.values()),
        value_loss=value_loss(stations, packing, valuations),
        mechanism="vcg",
    )


def metrics(outcome: AuctionOutcome, valuations: Mapping[int, Valuation],
            optimal: AuctionOutcome | None = None) -> dict:
    loss = value_loss(outcome.stations, outcome.final_packing, valuations)
    report = {"cost": outcome.cost, "value_loss": loss, "winners": len(outcome.winners)}
    if optimal is not None:
        best = value_loss(optimal.stations, optimal.final_packing, valuations)
        report["optimal_value_loss"] = best
        report["value_loss_ratio"] = _ratio(loss, best)
        report["cost_ratio"] = _ratio(outcome.cost, optimal.cost)
    return report


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


# --------------------------------------------------------------------------
# simulation spec files


@dataclass
class Simulation:
    data: InterferenceData
    config: AuctionConfig
    valuations: dict[int, Valuation]
    stations: list[int]


def load_simulation(path) -> Simulation:
    """Resolve a simulation spec JSON (paths relative to the spec file)."""
    path = Path(path)
    spec = json.loads(path.read_text(encoding="utf-8"))
    return simulation_from_spec(spec, path.parent)


def simulation_from_spec(spec: Mapping, root: Path = Path(".")) -> Simulation:
    from .model import generate_synthetic, load_interference

    if "synthetic" in spec:
        syn = spec["synthetic"]
        data = generate_synthetic(int(syn["n_stations"]), tuple(syn["channels"]), float(syn["density"]),
                                  int(syn.get("seed", 0)))
    else:
        data = load_interference(root / spec["domains"], root / spec["constraints"])
    stations = sorted(spec.get("stations") or data.stations)
    seed = int(spec.get("seed", 0))
    pm = spec.get("price_model", {})
    location = float(pm.get("location", math.log(1e6)))
    scale = float(pm.get("scale", 1.0))
    valuations = sample_valuations(stations, seed, location, scale)
    if "opening_prices" in spec:
        prices = {int(k): float(v) for k, v in spec["opening_prices"].items()}
    else:
        prices = opening_prices(data, stations, math.exp(location), float(spec.get("opening_price_factor", 3.0)))
    portfolio = None
    if isinstance(spec.get("portfolio"), list):
        portfolio = Portfolio.from_json(spec["portfolio"])
    elif isinstance(spec.get("portfolio"), str):
        portfolio = Portfolio.load(root / spec["portfolio"])
    config = AuctionConfig(
        max_channel=int(spec["max_channel"]),
        opening_price=prices,
        decrement_rate=float(spec.get("decrement_rate", 0.05)),
        cutoff=float(spec.get("cutoff_ms", 1000.0)) / 1000.0,
        checker=spec.get("checker", "portfolio"),
        portfolio=portfolio,
        seed=seed,
        zero_price=float(spec.get("zero_price", 0.01)),
        stations=stations,
        record_instances=bool(spec.get("record_instances", True)),
    )
    return Simulation(data, config, valuations, stations)


def write_event_csv(outcome: AuctionOutcome, path) -> None:
    cols = ["round", "station", "stations_checked", "result", "runtime_ms", "solver",
            "price_before", "price_after", "decision"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for e in outcome.state.event_log if outcome.state else ():
            w.writerow(e.to_json())
