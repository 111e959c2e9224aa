import itertools
import random

import numpy as np
import pytest

import oracles
from stationrepack.cache import (
    CacheError,
    ContainmentCache,
    ContextMismatch,
    Verdict,
    cache_add,
    cache_query,
    cached_solve,
    context_key,
    infeasible_core,
)
from stationrepack.model import InterferenceData, build_instance, e1, e3, generate_synthetic, make_instance
from stationrepack.solve import SolverConfig, SolverResult, Status, brute_force, solve_complete


def data_of(inst):
    return InterferenceData(dict(inst.domains), inst.pairs)


def e3_plus_isolated():
    base = e3()
    doms = dict(base.domains)
    doms.update({8: frozenset({14}), 9: frozenset({14, 15})})
    return make_instance(doms, base.pairs, max_channel=15)


def test_add_examples():
    inst = e1()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    cache_add(cache, inst, brute_force(inst))
    assert cache.n_feasible == 1
    assert cache_query(cache, [1]).verdict is Verdict.FEASIBLE

    inst = e3()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    cache_add(cache, inst, brute_force(inst))
    assert cache.n_infeasible == 1
    assert cache.stations_of(cache.infeasible[5][0]) == [1, 2, 3, 4, 5]

    inst = e3_plus_isolated()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    res = brute_force(inst)
    assert res.status is Status.UNSAT
    cache_add(cache, inst, res)
    [(count, [entry])] = cache.infeasible.items()
    assert cache.stations_of(entry) == [1, 2, 3, 4, 5]


def test_timeout_not_cached():
    inst = e1()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    cache.add(inst, SolverResult(Status.TIMEOUT, None, 1.0, "x"))
    assert len(cache) == 0


def test_bad_witness_refused():
    inst = e1()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    with pytest.raises(CacheError):
        cache.add(inst, SolverResult(Status.SAT, {1: 14, 2: 14}, 0.0, "liar"))


def test_query_examples():
    cache = ContainmentCache(range(1, 10), b"k" * 32, 15)
    cache.add_infeasible([1, 2, 3, 4, 5])
    assert cache.query([1, 2, 3, 4, 5, 9]).verdict is Verdict.INFEASIBLE
    assert cache.query([1, 2, 3, 4]).verdict is Verdict.MISS
    cache.add_feasible([6, 7], {6: 14, 7: 15})
    ans = cache.query([6])
    assert ans.verdict is Verdict.FEASIBLE and ans.witness == {6: 14}
    with pytest.raises(ContextMismatch):
        cache.query([42])


def test_context_key_depends_on_target():
    data = data_of(e1())
    assert context_key(data, 15) != context_key(data, 14)
    assert context_key(data, 15) == context_key(data_of(e1()), 15)
    cache = ContainmentCache.for_data(data, 15)
    with pytest.raises(ContextMismatch):
        cache.check_context(build_instance(data, [1, 2], 14))


def random_ops(cache, ref, rng, n_ops, universe):
    for _ in range(n_ops):
        k = rng.randint(1, len(universe))
        subset = rng.sample(universe, k)
        op = rng.random()
        if op < 0.15:
            cache.add_infeasible(subset)
            ref.add_infeasible(subset)
        elif op < 0.3:
            w = {s: 14 for s in subset}
            cache.add_feasible(subset, w)
            ref.add_feasible(subset, w)
        else:
            got = cache.query(subset).verdict.value
            assert got == ref.query(subset)


def test_linear_scan_equivalence():
    rng = random.Random(5)
    universe = list(range(1, 65))
    cache = ContainmentCache(universe, b"k" * 32, 36)
    ref = oracles.LinearScanCache()
    random_ops(cache, ref, rng, 3000, universe)


def test_monotone_verdicts():
    rng = random.Random(9)
    universe = list(range(1, 17))
    cache = ContainmentCache(universe, b"k" * 32, 36)
    queries = [rng.sample(universe, rng.randint(1, 16)) for _ in range(200)]
    seen = {}
    for step in range(300):
        subset = rng.sample(universe, rng.randint(1, 16))
        # a consistent workload: small sets feasible, large sets infeasible
        if len(subset) <= 6:
            cache.add_feasible(subset, {s: 14 for s in subset})
        elif len(subset) >= 11:
            cache.add_infeasible(subset)
        for i, q in enumerate(queries):
            v = cache.query(q).verdict
            if i in seen and seen[i] is not Verdict.MISS:
                assert v is seen[i]
            seen[i] = v


def test_round_trip(tmp_path):
    empty = ContainmentCache(range(1, 5), b"e" * 32, 20)
    empty.save(tmp_path / "empty.bin")
    back = ContainmentCache.load(tmp_path / "empty.bin")
    assert len(back) == 0 and back.universe == [1, 2, 3, 4]

    big = e3_plus_isolated()
    cache = ContainmentCache.for_data(data_of(big), 15)
    cache.add(e1(), brute_force(e1()))
    cache.add(big, brute_force(big))
    cache.save(tmp_path / "c.bin")
    back = ContainmentCache.load(tmp_path / "c.bin", data_of(big), 15)
    assert ContainmentCache.from_json(cache.to_json()).to_bytes() == cache.to_bytes()
    rng = random.Random(1)
    for _ in range(100):
        q = rng.sample(list(big.stations), rng.randint(1, 7))
        assert back.query(q) == cache.query(q)
    with pytest.raises(ContextMismatch):
        ContainmentCache.load(tmp_path / "c.bin", data_of(big), 14)


def test_corrupt_file(tmp_path):
    cache = ContainmentCache(range(1, 5), b"e" * 32, 20)
    cache.add_infeasible([1, 2])
    raw = cache.to_bytes()
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CacheError):
        ContainmentCache.load(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-3])
    with pytest.raises(CacheError):
        ContainmentCache.load(tmp_path / "short.bin")


def populated_twelve(seed):
    data = generate_synthetic(12, (14, 16), 0.3, seed)
    cache = ContainmentCache.for_data(data, 16)
    rng = random.Random(seed)
    for _ in range(40):
        subset = rng.sample(data.stations, rng.randint(2, 12))
        inst = build_instance(data, subset, 16)
        cache.add(inst, solve_complete(inst, cutoff=5.0))
    return data, cache


def test_exhaustive_twelve_station_sweep():
    data, cache = populated_twelve(3)
    assert cache.n_feasible and cache.n_infeasible
    for r in range(1, 13):
        for q in itertools.combinations(data.stations, r):
            ans = cache.query(q)
            if ans.verdict is Verdict.MISS:
                continue
            inst = build_instance(data, q, 16)
            if ans.verdict is Verdict.FEASIBLE:
                assert oracles.assignment_ok(inst, ans.witness)
            else:
                assert not oracles.satisfiable(inst)


def test_infeasible_core_is_infeasible():
    rng = np.random.default_rng(4)
    from stationrepack.model import random_instance

    for _ in range(80):
        inst = random_instance(rng)
        res = brute_force(inst)
        if res.status is not Status.UNSAT:
            continue
        hint = frozenset(solve_complete(inst, SolverConfig(arc_consistency=True, decomposition=True,
                                                           unconstrained_removal=True)).unsat_stations or ())
        core = infeasible_core(inst, hint or None)
        assert core <= inst.station_set
        assert not oracles.satisfiable(inst.restrict(core))


def test_cached_solve_hits():
    inst = e1()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    calls = []

    def solve(i):
        calls.append(i)
        return solve_complete(i)

    first = cached_solve(inst, cache, solve)
    second = cached_solve(inst, cache, solve)
    assert not first.cache_hit and second.cache_hit and len(calls) == 1
    assert second.witness == first.witness

    inst = e3_plus_isolated()
    cache = ContainmentCache.for_data(data_of(inst), 15)
    assert cached_solve(inst, cache, solve).status is Status.UNSAT
    again = cached_solve(inst.restrict([1, 2, 3, 4, 5, 8]), cache, solve)
    assert again.status is Status.UNSAT and again.cache_hit
