"""Containment cache for repacking answers.

A packable station set answers every subset query (restrict the packing);
an unpackable set answers every superset query. Entries are station
bitsets over a fixed universe, bucketed by popcount so scans can stop as
soon as cardinalities rule out containment.
"""

from __future__ import annotations

import enum
import hashlib
import io
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .model import InterferenceData, RepackingInstance, verify_assignment
from .simplify import decompose, remove_unconstrained, reinsert
from .solve import SolverConfig, SolverResult, Status, solve_complete

MAGIC = b"SRCC"
VERSION = 1
_FEASIBLE, _INFEASIBLE = 0, 1


class CacheError(ValueError):
    pass


class ContextMismatch(CacheError):
    """The cache was built for another dataset or clearing target."""


class Verdict(str, enum.Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    MISS = "MISS"


@dataclass
class CacheAnswer:
    verdict: Verdict
    witness: dict[int, int] | None = None


def context_key(data: InterferenceData, max_channel: int) -> bytes:
    return hashlib.sha256(f"{data.fingerprint}|{max_channel}".encode()).digest()


class ContainmentCache:
    """Feasible and infeasible stores keyed by station bitsets.

    Queries never take the lock; ``add`` serialises writers. Each bucket is
    append-only, so a concurrent reader sees either the old or the new list
    contents, never a torn entry.
    """

    def __init__(self, universe: Iterable[int], key: bytes, max_channel: int, capacity: int | None = None):
        self.universe = sorted(universe)
        self.position = {s: i for i, s in enumerate(self.universe)}
        self.key = key
        self.max_channel = max_channel
        self.capacity = capacity
        self.feasible: dict[int, list[tuple[int, dict[int, int]]]] = {}
        self.infeasible: dict[int, list[int]] = {}
        self._order: deque = deque()
        self._lock = threading.Lock()

    @classmethod
    def for_data(cls, data: InterferenceData, max_channel: int, capacity: int | None = None) -> "ContainmentCache":
        return cls(data.stations, context_key(data, max_channel), max_channel, capacity)

    # ------------------------------------------------------------------
    def bits(self, stations: Iterable[int]) -> int:
        out = 0
        try:
            for s in stations:
                out |= 1 << self.position[s]
        except KeyError as exc:
            raise ContextMismatch(f"station {exc.args[0]} is not in the cache universe") from None
        return out

    def stations_of(self, bits: int) -> list[int]:
        out = []
        while bits:
            low = bits & -bits
            out.append(self.universe[low.bit_length() - 1])
            bits ^= low
        return out

    def __len__(self) -> int:
        return self.n_feasible + self.n_infeasible

    @property
    def n_feasible(self) -> int:
        return sum(len(v) for v in self.feasible.values())

    @property
    def n_infeasible(self) -> int:
        return sum(len(v) for v in self.infeasible.values())

    def stats(self) -> dict:
        return {
            "universe": len(self.universe),
            "max_channel": self.max_channel,
            "context_key": self.key.hex(),
            "feasible": self.n_feasible,
            "infeasible": self.n_infeasible,
        }

    def check_context(self, instance: RepackingInstance) -> None:
        if instance.max_channel != self.max_channel:
            raise ContextMismatch(f"cache built for max_channel {self.max_channel}, "
                                  f"instance has {instance.max_channel}")
        self.bits(instance.stations)

    # ------------------------------------------------------------------
    def add_feasible(self, stations: Iterable[int], witness: Mapping[int, int]) -> None:
        stations = list(stations)
        b = self.bits(stations)
        entry = (b, {s: witness[s] for s in stations})
        with self._lock:
            self.feasible.setdefault(b.bit_count(), []).append(entry)
            self._remember(_FEASIBLE, b.bit_count(), entry)

    def add_infeasible(self, stations: Iterable[int]) -> None:
        b = self.bits(stations)
        with self._lock:
            self.infeasible.setdefault(b.bit_count(), []).append(b)
            self._remember(_INFEASIBLE, b.bit_count(), b)

    def _remember(self, kind, count, entry) -> None:
        if self.capacity is None:
            return
        self._order.append((kind, count, entry))
        while len(self._order) > self.capacity:
            kind, count, old = self._order.popleft()
            store = self.feasible if kind == _FEASIBLE else self.infeasible
            bucket = [e for e in store[count] if e is not old]
            store[count] = bucket

    # ------------------------------------------------------------------
    def query_bits(self, q: int) -> CacheAnswer:
        n = q.bit_count()
        for count in sorted(self.infeasible):
            if count > n:
                break
            for e in self.infeasible[count]:
                if e & q == e:
                    return CacheAnswer(Verdict.INFEASIBLE)
        for count in sorted(self.feasible, reverse=True):
            if count < n:
                break
            for e, witness in self.feasible[count]:
                if e & q == q:
                    return CacheAnswer(Verdict.FEASIBLE, {s: witness[s] for s in self.stations_of(q)})
        return CacheAnswer(Verdict.MISS)

    def query(self, stations: Iterable[int]) -> CacheAnswer:
        return self.query_bits(self.bits(stations))

    # ------------------------------------------------------------------
    def add(self, instance: RepackingInstance, result: SolverResult, verify_cutoff: float = 1.0) -> None:
        """Store a decisive result; TIMEOUT results are ignored.

        SAT stores the full station set with its witness. UNSAT stores the
        smallest candidate component that is confirmed infeasible on its own,
        falling back to the full station set.
        """
        self.check_context(instance)
        if result.status is Status.SAT:
            if not verify_assignment(instance, result.witness):
                raise CacheError("refusing to cache a non-verifying witness")
            self.add_feasible(instance.stations, result.witness)
        elif result.status is Status.UNSAT:
            self.add_infeasible(infeasible_core(instance, result.unsat_stations, verify_cutoff))

    # ------------------------------------------------------------------
    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    def to_bytes(self) -> bytes:
        n_words = max(1, (len(self.universe) + 63) // 64)
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<H", VERSION))
        buf.write(self.key)
        buf.write(struct.pack("<iII", self.max_channel, len(self.universe), n_words))
        buf.write(struct.pack(f"<{len(self.universe)}I", *self.universe))

        def words(b):
            return b.to_bytes(8 * n_words, "little")

        for count in sorted(self.infeasible):
            for b in self.infeasible[count]:
                payload = struct.pack("<B", _INFEASIBLE) + words(b) + struct.pack("<I", 0)
                buf.write(struct.pack("<I", len(payload)) + payload)
        for count in sorted(self.feasible):
            for b, witness in self.feasible[count]:
                items = sorted(witness.items())
                payload = (struct.pack("<B", _FEASIBLE) + words(b) + struct.pack("<I", len(items))
                           + b"".join(struct.pack("<IH", s, c) for s, c in items))
                buf.write(struct.pack("<I", len(payload)) + payload)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes, expected_key: bytes | None = None) -> "ContainmentCache":
        try:
            view = memoryview(raw)
            if bytes(view[:4]) != MAGIC:
                raise CacheError("not a containment cache file (bad magic)")
            (version,) = struct.unpack_from("<H", view, 4)
            if version != VERSION:
                raise CacheError(f"unsupported cache file version {version}")
            key = bytes(view[6:38])
            if expected_key is not None and key != expected_key:
                raise ContextMismatch("cache file belongs to a different dataset or clearing target")
            max_channel, n_universe, n_words = struct.unpack_from("<iII", view, 38)
            off = 50
            universe = list(struct.unpack_from(f"<{n_universe}I", view, off))
            off += 4 * n_universe
            cache = cls(universe, key, max_channel)
            while off < len(view):
                (length,) = struct.unpack_from("<I", view, off)
                off += 4
                end = off + length
                if end > len(view):
                    raise CacheError("truncated cache record")
                kind = view[off]
                b = int.from_bytes(view[off + 1: off + 1 + 8 * n_words], "little")
                p = off + 1 + 8 * n_words
                (n_items,) = struct.unpack_from("<I", view, p)
                p += 4
                if kind == _INFEASIBLE:
                    cache.infeasible.setdefault(b.bit_count(), []).append(b)
                elif kind == _FEASIBLE:
                    witness = {}
                    for _ in range(n_items):
                        s, c = struct.unpack_from("<IH", view, p)
                        witness[s] = c
                        p += 6
                    cache.feasible.setdefault(b.bit_count(), []).append((b, witness))
                else:
                    raise CacheError(f"unknown record kind {kind}")
                if p != end:
                    raise CacheError("cache record length mismatch")
                off = end
        except struct.error as exc:
            raise CacheError(f"corrupt cache file: {exc}") from None
        return cache

    @classmethod
    def load(cls, path, data: InterferenceData | None = None, max_channel: int | None = None) -> "ContainmentCache":
        """Read a cache file, checking it matches ``(data, max_channel)`` when given."""
        expected = context_key(data, max_channel) if data is not None and max_channel is not None else None
        return cls.from_bytes(Path(path).read_bytes(), expected)

    def to_json(self) -> dict:
        return {
            "context_key": self.key.hex(),
            "max_channel": self.max_channel,
            "universe": self.universe,
            "infeasible": [self.stations_of(b) for c in sorted(self.infeasible) for b in self.infeasible[c]],
            "feasible": [{"stations": self.stations_of(b), "assignment": {str(s): ch for s, ch in sorted(w.items())}}
                         for c in sorted(self.feasible) for b, w in self.feasible[c]],
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "ContainmentCache":
        cache = cls(raw["universe"], bytes.fromhex(raw["context_key"]), int(raw["max_channel"]))
        for stations in raw["infeasible"]:
            cache.add_infeasible(stations)
        for entry in raw["feasible"]:
            cache.add_feasible(entry["stations"], {int(k): int(v) for k, v in entry["assignment"].items()})
        return cache


def cache_query(cache: ContainmentCache, stations: Iterable[int]) -> CacheAnswer:
    return cache.query(stations)


def cache_add(cache: ContainmentCache, instance: RepackingInstance, result: SolverResult) -> ContainmentCache:
    cache.add(instance, result)
    return cache


def _component_containing(instance: RepackingInstance, stations: frozenset[int]) -> frozenset[int] | None:
    reduced, rep = remove_unconstrained(instance)
    for comp in decompose(reduced).components:
        if stations <= comp:
            return comp
    return None


def infeasible_core(instance: RepackingInstance, hint: frozenset[int] | None, verify_cutoff: float = 1.0) -> frozenset[int]:
    """Smallest station set, among a few simplification-derived candidates,
    that is infeasible on its own. Falls back to the whole instance."""
    full = instance.station_set
    candidates = []
    if hint:
        candidates.append(frozenset(hint))
        comp = _component_containing(instance, frozenset(hint))
        if comp is not None:
            candidates.append(comp)
    reduced, _ = remove_unconstrained(instance)
    candidates.extend(sorted(decompose(reduced).components, key=len))
    seen = set()
    for cand in candidates:
        if cand in seen or cand == full or not cand <= full:
            continue
        seen.add(cand)
        sub = instance.restrict(cand, keep_target=False)
        res = solve_complete(sub, SolverConfig(name="core-check"), cutoff=verify_cutoff)
        if res.status is Status.UNSAT:
            return cand
    return full


def cached_solve(instance: RepackingInstance, cache: ContainmentCache, solve, store: bool = True) -> SolverResult:
    """Answer from ``cache`` when containment allows, else call ``solve(instance)``.

    Feasible lookups use the part of the problem that still needs solving
    after unconstrained-station removal and decomposition: the target's
    component when a previous packing covers the rest, else every remaining
    station.
    """
    t0 = time.perf_counter()
    cache.check_context(instance)
    if not instance.trivially_infeasible:
        ans = cache.query(instance.stations)
        if ans.verdict is Verdict.INFEASIBLE:
            return SolverResult(Status.UNSAT, None, time.perf_counter() - t0, "cache", cache_hit=True)
        gamma = ans.witness if ans.verdict is Verdict.FEASIBLE else _feasible_from_cache(instance, cache)
        if gamma is not None:
            return SolverResult(Status.SAT, gamma, time.perf_counter() - t0, "cache", cache_hit=True)
    result = solve(instance)
    if store and result.status.decided:
        cache.add(instance, result)
    return result


def _feasible_from_cache(instance: RepackingInstance, cache: ContainmentCache) -> dict[int, int] | None:
    reduced, rep = remove_unconstrained(instance)
    prev = instance.previous or {}
    dec = decompose(reduced)
    if instance.target is not None and all(s in prev for s in reduced.stations if s != instance.target):
        key = dec.target_component if instance.target in reduced.station_set else frozenset()
    else:
        key = reduced.station_set
    if not key:
        # simplification alone solves it; that is not a cache answer
        return None
    ans = cache.query(key)
    if ans.verdict is not Verdict.FEASIBLE:
        return None
    partial = dict(ans.witness)
    for s in reduced.stations:
        if s not in partial:
            partial[s] = prev[s]
    gamma = reinsert(instance, partial, rep.removed_stations, rep.removed_domains)
    if gamma is None or not verify_assignment(instance, gamma):
        return None
    return gamma
