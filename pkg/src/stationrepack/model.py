"""Domain types, file I/O and synthetic data for station repacking.

A dataset (:class:`InterferenceData`) holds the per-station channel domains
and the explicit set of forbidden station-channel pairs. A
:class:`RepackingInstance` is the restriction of a dataset to a set of
stations and a clearing target; it is the unit every feasibility checker
works on.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

Slot = tuple[int, int]  # (station, channel)
Pair = tuple[Slot, Slot]
Assignment = dict[int, int]

MIN_CHANNEL = 1
MAX_CHANNEL = 51

CONSTRAINT_KINDS = {"CO": 0, "ADJ+1": 1, "ADJ+2": 2}
_KIND_BY_GAP = {v: k for k, v in CONSTRAINT_KINDS.items()}


class Band(enum.Enum):
    LVHF = "LVHF"
    HVHF = "HVHF"
    UHF = "UHF"
    OFF = "OFF"


def band(channel: int) -> Band:
    """Band of a physical channel (1-6 LVHF, 7-13 HVHF, 14-51 UHF)."""
    if not MIN_CHANNEL <= channel <= MAX_CHANNEL:
        raise ChannelDomainError(f"channel {channel} outside {MIN_CHANNEL}..{MAX_CHANNEL}")
    if channel <= 6:
        return Band.LVHF
    if channel <= 13:
        return Band.HVHF
    return Band.UHF


class DataError(ValueError):
    """Base class for malformed interference data."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class UnknownStationError(DataError):
    """A constraint refers to a station without a DOMAIN row."""


class ChannelDomainError(DataError):
    """A channel lies outside 1..51 or a pair crosses bands."""


def normalize_pair(a: Slot, b: Slot) -> Pair:
    return (a, b) if a <= b else (b, a)


def check_pair(a: Slot, b: Slot) -> None:
    if a[0] == b[0]:
        raise DataError(f"forbidden pair {a}-{b} links a station to itself")
    gap = abs(a[1] - b[1])
    if gap > 2:
        raise ChannelDomainError(f"forbidden pair {a}-{b} has channel gap {gap} > 2")
    if band(a[1]) is not band(b[1]):
        raise ChannelDomainError(f"forbidden pair {a}-{b} crosses bands")


@dataclass(frozen=True, eq=False)
class InterferenceData:
    """Channel domains plus forbidden station-channel pairs for a whole dataset."""

    domains: Mapping[int, frozenset[int]]
    forbidden_pairs: frozenset[Pair]
    dropped_rows: int = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InterferenceData):
            return NotImplemented
        return dict(self.domains) == dict(other.domains) and self.forbidden_pairs == other.forbidden_pairs

    __hash__ = None  # type: ignore[assignment]

    @property
    def stations(self) -> list[int]:
        return sorted(self.domains)

    @cached_property
    def pairs_by_station(self) -> dict[int, list[Pair]]:
        index: dict[int, list[Pair]] = defaultdict(list)
        for pair in self.forbidden_pairs:
            index[pair[0][0]].append(pair)
            index[pair[1][0]].append(pair)
        return dict(index)

    @cached_property
    def fingerprint(self) -> str:
        """Stable content hash, used to key caches to a dataset."""
        import hashlib

        h = hashlib.sha256()
        for s in sorted(self.domains):
            h.update(f"D{s}:{','.join(map(str, sorted(self.domains[s])))};".encode())
        for (s1, c1), (s2, c2) in sorted(self.forbidden_pairs):
            h.update(f"P{s1},{c1},{s2},{c2};".encode())
        return h.hexdigest()

    def neighbours(self, station: int) -> set[int]:
        out = set()
        for a, b in self.pairs_by_station.get(station, ()):
            out.add(b[0] if a[0] == station else a[0])
        return out


@dataclass(frozen=True, eq=False)
class RepackingInstance:
    """A feasibility question: can ``stations`` share channels up to ``max_channel``?

    ``domains`` and ``pairs`` are already restricted to the station set and
    the clearing target. ``previous`` is a known-feasible packing of every
    station except ``target``.
    """

    stations: tuple[int, ...]
    max_channel: int
    domains: Mapping[int, frozenset[int]]
    pairs: frozenset[Pair]
    previous: Mapping[int, int] | None = None
    target: int | None = None
    trivially_infeasible: bool = False
    name: str = ""

    @cached_property
    def conflicts(self) -> dict[Slot, set[Slot]]:
        out: dict[Slot, set[Slot]] = defaultdict(set)
        for a, b in self.pairs:
            out[a].add(b)
            out[b].add(a)
        return dict(out)

    @cached_property
    def graph(self) -> dict[int, set[int]]:
        return interference_graph(self)

    @property
    def station_set(self) -> frozenset[int]:
        return frozenset(self.stations)

    def empty_domain_stations(self) -> list[int]:
        return [s for s in self.stations if not self.domains[s]]

    def restrict(self, stations: Iterable[int], *, domains: Mapping[int, Iterable[int]] | None = None,
                 keep_target: bool = True) -> "RepackingInstance":
        """Sub-instance on ``stations``, optionally with narrowed domains."""
        keep = frozenset(stations)
        src = domains if domains is not None else self.domains
        doms = {s: frozenset(src[s]) for s in sorted(keep)}
        pairs = frozenset(
            (a, b) for a, b in self.pairs
            if a[0] in keep and b[0] in keep and a[1] in doms[a[0]] and b[1] in doms[b[0]]
        )
        target = self.target if keep_target and self.target in keep else None
        previous = None
        if self.previous is not None:
            previous = {s: c for s, c in self.previous.items() if s in keep and s != target}
        return RepackingInstance(
            stations=tuple(sorted(keep)),
            max_channel=self.max_channel,
            domains=doms,
            pairs=pairs,
            previous=previous,
            target=target,
            trivially_infeasible=any(not d for d in doms.values()),
            name=self.name,
        )

    def to_json(self) -> dict:
        return {
            "stations": list(self.stations),
            "max_channel": self.max_channel,
            "previous": None if self.previous is None else {str(k): v for k, v in sorted(self.previous.items())},
            "target": self.target,
        }


def build_instance(data: InterferenceData, stations: Iterable[int], max_channel: int,
                   previous: Mapping[int, int] | None = None, target: int | None = None,
                   name: str = "") -> RepackingInstance:
    """Restrict ``data`` to ``stations`` and channels ``<= max_channel``.

    Stations whose restricted domain is empty produce an instance flagged
    ``trivially_infeasible`` instead of an error.
    """
    keep = frozenset(stations)
    missing = keep - data.domains.keys()
    if missing:
        raise UnknownStationError(f"stations not in dataset: {sorted(missing)}")
    if target is not None and target not in keep:
        raise ValueError(f"target {target} not among the instance stations")
    domains = {s: frozenset(c for c in data.domains[s] if c <= max_channel) for s in sorted(keep)}
    pairs = set()
    for s in keep:
        for a, b in data.pairs_by_station.get(s, ()):
            if a[0] in keep and b[0] in keep and a[1] in domains[a[0]] and b[1] in domains[b[0]]:
                pairs.add((a, b))
    prev = None
    if previous is not None:
        prev = {int(s): int(c) for s, c in previous.items() if int(s) in keep and int(s) != target}
    return RepackingInstance(
        stations=tuple(sorted(keep)),
        max_channel=max_channel,
        domains=domains,
        pairs=frozenset(pairs),
        previous=prev,
        target=target,
        trivially_infeasible=any(not d for d in domains.values()),
        name=name,
    )


def make_instance(domains: Mapping[int, Iterable[int]], pairs: Iterable[tuple[Slot, Slot]],
                  max_channel: int | None = None, previous: Mapping[int, int] | None = None,
                  target: int | None = None, name: str = "") -> RepackingInstance:
    """Build an instance directly from domains and pairs (tests, corpora)."""
    doms = {int(s): frozenset(int(c) for c in d) for s, d in domains.items()}
    if max_channel is None:
        max_channel = max((c for d in doms.values() for c in d), default=MAX_CHANNEL)
    data = InterferenceData(doms, frozenset(normalize_pair(a, b) for a, b in pairs))
    return build_instance(data, doms.keys(), max_channel, previous, target, name)


def interference_graph(instance: RepackingInstance) -> dict[int, set[int]]:
    """Station adjacency induced by the instance's surviving forbidden pairs."""
    adj: dict[int, set[int]] = {s: set() for s in instance.stations}
    for (s1, _), (s2, _) in instance.pairs:
        adj[s1].add(s2)
        adj[s2].add(s1)
    return adj


def verify_assignment(instance: RepackingInstance, gamma: Mapping[int, int]) -> bool:
    for s in instance.stations:
        c = gamma.get(s)
        if c is None or c not in instance.domains[s]:
            return False
    for (s1, c1), (s2, c2) in instance.pairs:
        if gamma[s1] == c1 and gamma[s2] == c2:
            return False
    return True


def violated_pairs(instance: RepackingInstance, gamma: Mapping[int, int]) -> list[Pair]:
    return [p for p in instance.pairs if gamma.get(p[0][0]) == p[0][1] and gamma.get(p[1][0]) == p[1][1]]


# --------------------------------------------------------------------------
# CSV I/O


def _rows(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, next(csv.reader([stripped]))


def _int(token: str, lineno: int, path: Path) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise ParseError(f"expected an integer, got {token!r}", lineno, str(path)) from None


def load_interference(domains_path, constraints_path) -> InterferenceData:
    """Parse a domains CSV and a constraints CSV into :class:`InterferenceData`.

    Constraint rows naming channels outside a station's domain are dropped
    and counted in ``dropped_rows``; unknown stations and channels outside
    1..51 are errors.
    """
    domains_path, constraints_path = Path(domains_path), Path(constraints_path)
    domains: dict[int, frozenset[int]] = {}
    for lineno, row in _rows(domains_path):
        if row[0].strip() != "DOMAIN" or len(row) < 2:
            raise ParseError(f"expected DOMAIN,<station>,<channels...>, got {','.join(row)!r}",
                             lineno, str(domains_path))
        station = _int(row[1], lineno, domains_path)
        if station <= 0:
            raise ParseError(f"station id must be positive, got {station}", lineno, str(domains_path))
        channels = [_int(t, lineno, domains_path) for t in row[2:] if t.strip()]
        for c in channels:
            if not MIN_CHANNEL <= c <= MAX_CHANNEL:
                raise ChannelDomainError(f"{domains_path}:{lineno}: channel {c} outside 1..51")
        if station in domains:
            raise ParseError(f"duplicate DOMAIN row for station {station}", lineno, str(domains_path))
        domains[station] = frozenset(channels)

    pairs: set[Pair] = set()
    dropped = 0
    for lineno, row in _rows(constraints_path):
        kind = row[0].strip()
        if kind not in CONSTRAINT_KINDS or len(row) < 4:
            raise ParseError(f"expected <CO|ADJ+1|ADJ+2>,<channel>,<station>,<stations...>, got {','.join(row)!r}",
                             lineno, str(constraints_path))
        gap = CONSTRAINT_KINDS[kind]
        channel = _int(row[1], lineno, constraints_path)
        subject = _int(row[2], lineno, constraints_path)
        others = [_int(t, lineno, constraints_path) for t in row[3:] if t.strip()]
        for c in (channel, channel + gap):
            if not MIN_CHANNEL <= c <= MAX_CHANNEL:
                raise ChannelDomainError(f"{constraints_path}:{lineno}: channel {c} outside 1..51")
        for s in (subject, *others):
            if s not in domains:
                raise UnknownStationError(f"{constraints_path}:{lineno}: station {s} has no DOMAIN row")
        for other in others:
            a, b = (subject, channel), (other, channel + gap)
            try:
                check_pair(a, b)
            except DataError as exc:
                raise type(exc)(f"{constraints_path}:{lineno}: {exc}") from None
            if a[1] not in domains[a[0]] or b[1] not in domains[b[0]]:
                dropped += 1
                continue
            pairs.add(normalize_pair(a, b))
    if dropped:
        log.warning("dropped %d constraint entries outside station domains", dropped)
    return InterferenceData(domains, frozenset(pairs), dropped)


def _constraint_rows(data: InterferenceData) -> list[tuple[str, int, int, list[int]]]:
    grouped: dict[tuple[str, int, int], list[int]] = defaultdict(list)
    for a, b in sorted(data.forbidden_pairs):
        if a[1] > b[1]:
            a, b = b, a
        elif a[1] == b[1] and a[0] > b[0]:
            a, b = b, a
        kind = _KIND_BY_GAP[b[1] - a[1]]
        grouped[(kind, a[1], a[0])].append(b[0])
    return [(k, c, s, sorted(o)) for (k, c, s), o in sorted(grouped.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2]))]


def write_interference(data: InterferenceData, domains_path, constraints_path) -> None:
    with open(domains_path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sorted(data.domains):
            fh.write(",".join(["DOMAIN", str(s), *map(str, sorted(data.domains[s]))]) + "\n")
    with open(constraints_path, "w", encoding="utf-8", newline="\n") as fh:
        for kind, c, s, others in _constraint_rows(data):
            fh.write(",".join([kind, str(c), str(s), *map(str, others)]) + "\n")


def load_instance_file(path, data: InterferenceData, name: str | None = None) -> RepackingInstance:
    """Read an instance JSON (stations, max_channel, previous, target) against ``data``."""
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", exc.lineno, str(path)) from None
    try:
        stations = [int(s) for s in spec["stations"]]
        max_channel = int(spec["max_channel"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"instance needs 'stations' and 'max_channel' ({exc})", path=str(path)) from None
    previous = spec.get("previous")
    if previous is not None:
        previous = {int(k): int(v) for k, v in previous.items()}
    target = spec.get("target")
    return build_instance(data, stations, max_channel, previous,
                          None if target is None else int(target), name or path.stem)


def write_instance_file(instance: RepackingInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_json(), indent=1) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Synthetic data


def _link_probability(r: float) -> float:
    # P(|X-Y| < r) for X, Y uniform in the unit square
    if r <= 1.0:
        return math.pi * r * r - 8.0 / 3.0 * r ** 3 + 0.5 * r ** 4
    if r >= math.sqrt(2.0):
        return 1.0
    u = math.sqrt(r * r - 1.0)
    return (1.0 / 3.0 + (math.pi - 2.0) * r * r - 0.5 * r ** 4
            + 4.0 / 3.0 * (2.0 * r * r + 1.0) * u - 4.0 * r * r * math.acos(1.0 / r))


def interference_radius(density: float) -> float:
    """Radius r with P(two uniform points in the unit square lie within r) = density."""
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    if density >= 1.0:
        return math.sqrt(2.0) + 1e-9
    from scipy.optimize import brentq

    return brentq(lambda r: _link_probability(r) - density, 0.0, math.sqrt(2.0), xtol=1e-12)


def generate_synthetic(n_stations: int, channels: Iterable[int] | tuple[int, int], density: float,
                       seed: int) -> InterferenceData:
    """Geometric random interference data.

    Stations 1..n are dropped uniformly in the unit square; stations closer
    than ``interference_radius(density)`` receive co-channel pairs on every
    channel and first-adjacent pairs in both directions. ``channels`` is an
    iterable of channels or an inclusive ``(lo, hi)`` tuple.
    """
    if n_stations < 1:
        raise ValueError("n_stations must be >= 1")
    if isinstance(channels, tuple) and len(channels) == 2:
        chans = list(range(channels[0], channels[1] + 1))
    else:
        chans = sorted(set(channels))
    for c in chans:
        band(c)
    rng = np.random.default_rng(seed)
    points = rng.random((n_stations, 2))
    r = interference_radius(density)
    ids = list(range(1, n_stations + 1))
    domains = {s: frozenset(chans) for s in ids}
    chanset = set(chans)
    pairs: set[Pair] = set()
    for i in range(n_stations):
        for j in range(i + 1, n_stations):
            if float(np.hypot(*(points[i] - points[j]))) >= r:
                continue
            s, t = ids[i], ids[j]
            for c in chans:
                pairs.add(normalize_pair((s, c), (t, c)))
                if c + 1 in chanset and band(c) is band(c + 1):
                    pairs.add(normalize_pair((s, c), (t, c + 1)))
                    pairs.add(normalize_pair((t, c), (s, c + 1)))
    return InterferenceData(domains, frozenset(pairs))


def random_instance(rng: np.random.Generator, max_stations: int = 10, max_channels: int = 5,
                    density: float | None = None, base_channel: int = 14) -> RepackingInstance:
    """Small random instance with irregular domains and a mix of CO/ADJ pairs (test workloads)."""
    n = int(rng.integers(1, max_stations + 1))
    k = int(rng.integers(1, max_channels + 1))
    if density is None:
        density = float(rng.choice([0.1, 0.25, 0.4, 0.6, 0.85]))
    chans = list(range(base_channel, base_channel + k))
    domains = {}
    for s in range(1, n + 1):
        size = int(rng.integers(1, k + 1))
        domains[s] = frozenset(int(c) for c in rng.choice(chans, size=size, replace=False))
    pairs = set()
    for s in range(1, n + 1):
        for t in range(s + 1, n + 1):
            if rng.random() >= density:
                continue
            for c in domains[s]:
                for gap in (-2, -1, 0, 1, 2):
                    c2 = c + gap
                    if c2 in domains[t] and (gap == 0 or rng.random() < 0.5):
                        pairs.add(normalize_pair((s, c), (t, c2)))
    return make_instance(domains, pairs, max_channel=chans[-1], name=f"rand{n}x{k}")


def dumps_interference(data: InterferenceData) -> tuple[str, str]:
    """Domains and constraints CSV text (no files)."""
    d = io.StringIO()
    for s in sorted(data.domains):
        d.write(",".join(["DOMAIN", str(s), *map(str, sorted(data.domains[s]))]) + "\n")
    c = io.StringIO()
    for kind, ch, s, others in _constraint_rows(data):
        c.write(",".join([kind, str(ch), str(s), *map(str, others)]) + "\n")
    return d.getvalue(), c.getvalue()


def e1() -> RepackingInstance:
    return make_instance({1: {14, 15}, 2: {14, 15}}, [((1, 14), (2, 14)), ((1, 15), (2, 15))], name="E1")


def e2() -> RepackingInstance:
    return make_instance({1: {14}, 2: {14}}, [((1, 14), (2, 14))], name="E2")


def _cycle(channels) -> RepackingInstance:
    edges = [(i, i % 5 + 1) for i in range(1, 6)]
    pairs = [((a, c), (b, c)) for a, b in edges for c in channels]
    return make_instance({s: set(channels) for s in range(1, 6)}, pairs)


def e3() -> RepackingInstance:
    inst = _cycle((14, 15))
    return RepackingInstance(inst.stations, inst.max_channel, inst.domains, inst.pairs, name="E3")


def e4() -> RepackingInstance:
    inst = _cycle((14, 15, 16))
    return RepackingInstance(inst.stations, inst.max_channel, inst.domains, inst.pairs, name="E4")


def e5_data() -> InterferenceData:
    return generate_synthetic(8, (14, 16), 0.5, seed=42)


def e5() -> RepackingInstance:
    data = e5_data()
    return build_instance(data, data.stations, 16, name="E5")
