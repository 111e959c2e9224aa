import json

import pytest

from stationrepack.bench import (
    BenchmarkRecord,
    ecdf_at,
    ecdf_report,
    harvest_nontrivial,
    load_corpus,
    load_events,
    nontrivial_fraction,
    read_records,
    run_benchmark,
    save_corpus,
    solver_from_spec,
    write_ecdf,
)
from stationrepack.model import InterferenceData, e1, e2, e3, e4, make_instance
from stationrepack.solve import SolverConfig, Status, default_portfolio


def rec(status, ms, solver="s", iid="x"):
    return BenchmarkRecord(iid, solver, Status(status), ms / 1000.0, 0, 1.0)


def path_data():
    """Three stations on a path; station 3 may only use channel 15."""
    doms = {1: frozenset({14, 15}), 2: frozenset({14, 15}), 3: frozenset({15})}
    pairs = [((1, 14), (2, 14)), ((1, 15), (2, 15)), ((2, 15), (3, 15))]
    return InterferenceData(doms, frozenset(pairs))


def event(stations, previous, target, max_channel=15):
    return {"instance": {"stations": stations, "max_channel": max_channel, "target": target,
                         "previous": {str(s): c for s, c in previous.items()}}}


def test_empty_corpus():
    assert run_benchmark([], ["greedy"], 1.0) == []
    assert ecdf_report([]) == {}


def test_canonical_statuses():
    corpus = [e1(), e2(), e3(), e4()]
    recs = run_benchmark(corpus, [SolverConfig(name="complete")], 5.0)
    assert [r.status for r in recs] == [Status.SAT, Status.UNSAT, Status.UNSAT, Status.SAT]
    assert all(r.runtime < 5.0 and r.solved for r in recs)


def test_ecdf_degenerate():
    rep = ecdf_report([rec("SAT", t) for t in (3, 1, 2)])["s"]
    assert rep["solved_fraction"] == 1.0 and rep["points"][-1][1] == 1.0
    rep = ecdf_report([rec("TIMEOUT", 1000) for _ in range(4)])["s"]
    assert rep["solved_fraction"] == 0.0 and rep["points"] == []
    assert ecdf_at(rep, 10.0) == 0.0


def test_ecdf_hand_fixture():
    statuses = ["SAT", "UNSAT", "TIMEOUT", "SAT", "SAT", "TIMEOUT", "UNSAT", "SAT", "SAT", "TIMEOUT"]
    times = [5, 1, 1000, 20, 5, 1000, 300, 40, 2, 1000]
    rep = ecdf_report([rec(s, t) for s, t in zip(statuses, times)])["s"]
    # solved runtimes sorted: 1, 2, 5, 5, 20, 40, 300 (ms) out of 10 runs
    assert rep["total"] == 10 and rep["solved"] == 7
    assert rep["points"] == [(0.001, 0.1), (0.002, 0.2), (0.005, 0.4), (0.02, 0.5), (0.04, 0.6), (0.3, 0.7)]
    assert ecdf_at(rep, 0.0049) == 0.2
    assert ecdf_at(rep, 0.005) == 0.4
    assert ecdf_at(rep, 1.0) == 0.7


def test_harvest_keeps_only_greedy_failures():
    data = path_data()
    events = [
        event([1, 2], {1: 14}, 2),             # greedy puts 2 on 15
        event([1, 2, 3], {1: 14, 2: 15}, 3),   # 3 needs 15, only a full repack helps
        event([1, 2, 3], {1: 14, 2: 15}, 3),   # duplicate
        {"instance": None},
    ]
    corpus = harvest_nontrivial(data, events)
    assert len(corpus) == 1 and corpus[0].target == 3 and corpus[0].name == "h1"
    assert nontrivial_fraction(data, events) == (2, 3)
    recs = run_benchmark(corpus, ["greedy", SolverConfig(name="complete")], 1.0)
    assert [r.status for r in recs] == [Status.TIMEOUT, Status.SAT]


def test_harvest_subsample_is_seeded():
    doms = {s: frozenset({14, 15}) for s in range(1, 7)}
    doms[6] = frozenset({15})
    pairs = [((a, c), (a + 1, c)) for a in range(1, 6) for c in (14, 15)]
    data = InterferenceData(doms, frozenset(p for p in pairs if p[1] != (6, 14)))
    events = []
    for prev_first in (14, 15):
        for k in (2, 3, 4, 5):
            chain = {s: (prev_first if s % 2 else 29 - prev_first) for s in range(7 - k, 6)}
            events.append(event(sorted(chain) + [6], chain, 6))
    full = harvest_nontrivial(data, events)
    assert len(full) >= 3
    a = harvest_nontrivial(data, events, size=2, seed=7)
    b = harvest_nontrivial(data, events, size=2, seed=7)
    assert [i.name for i in a] == [i.name for i in b] and len(a) == 2
    assert {i.name for i in a} <= {i.name for i in full}


def test_records_and_corpus_round_trip(tmp_path):
    data = path_data()
    inst = make_instance(dict(data.domains), data.forbidden_pairs, 15, previous={1: 14, 2: 15}, target=3,
                         name="h0")
    save_corpus(tmp_path / "c", data, [inst])
    data2, corpus = load_corpus(tmp_path / "c")
    assert data2 == data and corpus[0].name == "h0" and corpus[0].previous == inst.previous
    recs = run_benchmark(corpus * 2, ["greedy", default_portfolio()], 1.0, seeds=(0, 1),
                         records_path=tmp_path / "r.csv")
    assert len(recs) == 8
    back = read_records(tmp_path / "r.csv")
    assert [(r.instance_id, r.solver, r.status, r.seed) for r in back] == \
        [(r.instance_id, r.solver, r.status, r.seed) for r in recs]
    rep = ecdf_report(back)
    assert set(rep) == {"greedy", "portfolio"}
    write_ecdf(rep, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) > 2


def test_load_events_variants(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"events": [1, 2]}))
    (tmp_path / "b.json").write_text(json.dumps([3]))
    assert load_events(tmp_path / "a.json") == [1, 2]
    assert load_events(tmp_path / "b.json") == [3]


def test_unknown_solver():
    with pytest.raises(ValueError):
        solver_from_spec("magic")
    with pytest.raises(TypeError):
        solver_from_spec(42)
