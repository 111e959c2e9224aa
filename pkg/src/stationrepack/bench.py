"""Benchmark harness: harvest hard instances from auction logs, time solvers, ECDF reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import (
    Band,
    InterferenceData,
    RepackingInstance,
    band,
    build_instance,
    load_instance_file,
    load_interference,
    write_instance_file,
    write_interference,
)
from .solve import Portfolio, SolverConfig, SolverResult, Status, greedy_check, run_config, run_portfolio

log = logging.getLogger(__name__)

RECORD_FIELDS = ["instance_id", "solver", "status", "runtime_ms", "seed", "cutoff_ms"]


@dataclass(frozen=True)
class BenchmarkRecord:
    instance_id: str
    solver: str
    status: Status
    runtime: float
    seed: int
    cutoff: float

    @property
    def solved(self) -> bool:
        return self.status.decided

    def row(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "solver": self.solver,
            "status": self.status.value,
            "runtime_ms": f"{self.runtime * 1000.0:.3f}",
            "seed": self.seed,
            "cutoff_ms": f"{self.cutoff * 1000.0:.0f}",
        }


def _is_uhf(instance: RepackingInstance) -> bool:
    return all(band(c) is Band.UHF for d in instance.domains.values() for c in d)


def harvest_nontrivial(data: InterferenceData, events: Iterable[Mapping], size: int | None = None,
                       seed: int = 0, prefix: str = "h") -> list[RepackingInstance]:
    """UHF checks from auction event logs that greedy augmentation cannot solve.

    ``events`` are event-log entries (dicts with an ``instance`` field as
    written by the auction). Duplicates are dropped; a seeded uniform
    subsample of ``size`` is returned when requested.
    """
    seen = set()
    out = []
    for ev in events:
        spec = ev.get("instance") if "instance" in ev else ev
        if not spec or spec.get("previous") is None or spec.get("target") is None:
            continue
        key = (tuple(spec["stations"]), spec["max_channel"], spec["target"],
               tuple(sorted(spec["previous"].items())))
        if key in seen:
            continue
        seen.add(key)
        inst = build_instance(data, spec["stations"], spec["max_channel"], previous=spec["previous"],
                              target=spec["target"], name=f"{prefix}{len(seen) - 1}")
        if not _is_uhf(inst):
            continue
        if greedy_check(inst).status is not Status.SAT:
            out.append(inst)
    if size is not None and size < len(out):
        rng = np.random.default_rng(seed)
        pick = sorted(rng.choice(len(out), size=size, replace=False).tolist())
        out = [out[i] for i in pick]
    return out


def nontrivial_fraction(data: InterferenceData, events: Sequence[Mapping]) -> tuple[int, int]:
    """(greedy-unsolved UHF checks, all UHF checks) over an event log."""
    total = hard = 0
    for ev in events:
        spec = ev.get("instance")
        if not spec or spec.get("target") is None:
            continue
        inst = build_instance(data, spec["stations"], spec["max_channel"], previous=spec["previous"],
                              target=spec["target"])
        if not _is_uhf(inst):
            continue
        total += 1
        hard += greedy_check(inst).status is not Status.SAT
    return hard, total


Solver = Callable[[RepackingInstance, float], SolverResult]


def solver_from_spec(spec: str | SolverConfig | Portfolio, seed: int = 0) -> tuple[str, Solver]:
    """Label and callable for ``greedy``, a SolverConfig or a Portfolio."""
    if isinstance(spec, str):
        if spec != "greedy":
            raise ValueError(f"unknown solver {spec!r}")
        return "greedy", lambda inst, cutoff: greedy_check(inst)
    if isinstance(spec, SolverConfig):
        cfg = spec.with_(seed=spec.seed + seed)
        return spec.name, lambda inst, cutoff: run_config(inst, cfg, None, cutoff)
    if isinstance(spec, Portfolio):
        pf = Portfolio(tuple(c.with_(seed=c.seed + seed) for c in spec.configs))
        return "portfolio", lambda inst, cutoff: run_portfolio(inst, pf, cutoff)
    raise TypeError(f"cannot benchmark {spec!r}")


def run_benchmark(corpus: Sequence[RepackingInstance], solvers: Sequence, cutoff: float,
                  seeds: Sequence[int] = (0,), records_path=None) -> list[BenchmarkRecord]:
    """Run every solver on every instance, one at a time, timing each call.

    With ``records_path`` each record is appended to the CSV as soon as it
    is measured, so an interrupted run keeps what it has.
    """
    records = []
    fh = writer = None
    if records_path is not None:
        fh = open(records_path, "w", encoding="utf-8", newline="")
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        writer.writeheader()
    try:
        for seed in seeds:
            labelled = [solver_from_spec(s, seed) for s in solvers]
            for k, inst in enumerate(corpus):
                iid = inst.name or f"i{k}"
                for label, solve in labelled:
                    t0 = time.perf_counter()
                    res = solve(inst, cutoff)
                    runtime = time.perf_counter() - t0
                    rec = BenchmarkRecord(iid, label, res.status, runtime, seed, cutoff)
                    records.append(rec)
                    if writer is not None:
                        writer.writerow(rec.row())
                        fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return records


def ecdf_report(records: Iterable[BenchmarkRecord]) -> dict[str, dict]:
    """Per-solver runtime ECDF over solved runs plus the solved fraction.

    ``points`` holds (runtime seconds, cumulative fraction of all runs solved
    by then); timeouts add to the denominator only.
    """
    by_solver: dict[str, list[BenchmarkRecord]] = {}
    for r in records:
        by_solver.setdefault(r.solver, []).append(r)
    out = {}
    for label in sorted(by_solver):
        recs = by_solver[label]
        total = len(recs)
        times = sorted(r.runtime for r in recs if r.solved)
        points = []
        for k, t in enumerate(times, 1):
            if points and points[-1][0] == t:
                points[-1] = (t, k / total)
            else:
                points.append((t, k / total))
        out[label] = {"total": total, "solved": len(times),
                      "solved_fraction": len(times) / total if total else 0.0, "points": points}
    return out


def ecdf_at(report_entry: Mapping, t: float) -> float:
    """Right-continuous step value of one solver's ECDF at time ``t``."""
    val = 0.0
    for x, y in report_entry["points"]:
        if x > t:
            break
        val = y
    return val


def write_records(records: Iterable[BenchmarkRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def read_records(path) -> list[BenchmarkRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [BenchmarkRecord(row["instance_id"], row["solver"], Status(row["status"]),
                                float(row["runtime_ms"]) / 1000.0, int(row["seed"]),
                                float(row["cutoff_ms"]) / 1000.0)
                for row in csv.DictReader(fh)]


def write_ecdf(report: Mapping[str, Mapping], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solver", "runtime_ms", "fraction_solved"])
        for label, entry in report.items():
            w.writerow([label, "0.000", "0.000000"])
            for t, y in entry["points"]:
                w.writerow([label, f"{t * 1000.0:.3f}", f"{y:.6f}"])


# corpus directories: domains.csv + constraints.csv + instances/*.json


def save_corpus(directory, data: InterferenceData, corpus: Iterable[RepackingInstance]) -> None:
    root = Path(directory)
    (root / "instances").mkdir(parents=True, exist_ok=True)
    write_interference(data, root / "domains.csv", root / "constraints.csv")
    for k, inst in enumerate(corpus):
        write_instance_file(inst, root / "instances" / f"{inst.name or f'i{k}'}.json")


def load_corpus(directory) -> tuple[InterferenceData, list[RepackingInstance]]:
    root = Path(directory)
    data = load_interference(root / "domains.csv", root / "constraints.csv")
    files = sorted((root / "instances").glob("*.json"))
    return data, [load_instance_file(f, data, name=f.stem) for f in files]


def load_events(path) -> list[dict]:
    """Event list from an auction outcome JSON file."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return list(raw.get("events", raw) if isinstance(raw, dict) else raw)
