"""Problem simplification: arc consistency, unconstrained-station removal,
component decomposition and previous-solution augmentation rings."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import RepackingInstance


@dataclass
class SimplificationReport:
    pruned_values: int = 0
    removed_stations: tuple[int, ...] = ()
    components: list[frozenset[int]] = field(default_factory=list)
    target_component: frozenset[int] | None = None
    infeasible: bool = False
    infeasible_component: frozenset[int] | None = None
    # domains of removed stations at the moment they were removed
    removed_domains: dict[int, frozenset[int]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pruned_values": self.pruned_values,
            "removed_stations": list(self.removed_stations),
            "components": [sorted(c) for c in self.components],
            "target_component": None if self.target_component is None else sorted(self.target_component),
            "infeasible": self.infeasible,
            "infeasible_component": None if self.infeasible_component is None else sorted(self.infeasible_component),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def connected_components(adj: Mapping[int, Iterable[int]]) -> list[frozenset[int]]:
    seen: set[int] = set()
    out = []
    for root in sorted(adj):
        if root in seen:
            continue
        comp = {root}
        queue = deque([root])
        seen.add(root)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    queue.append(v)
        out.append(frozenset(comp))
    return out


def _component_of(adj, station) -> frozenset[int]:
    for comp in connected_components(adj):
        if station in comp:
            return comp
    return frozenset([station])


def arc_consistency(instance: RepackingInstance) -> tuple[RepackingInstance, SimplificationReport]:
    """AC-3 over the binary constraints; arcs are requeued only when a neighbour shrinks."""
    domains = {s: set(instance.domains[s]) for s in instance.stations}
    conflicts = instance.conflicts
    adj = instance.graph
    report = SimplificationReport()
    empty = instance.empty_domain_stations()
    if empty:
        report.infeasible = True
        report.infeasible_component = frozenset([empty[0]])
        return instance, report

    queue = deque((x, y) for x in instance.stations for y in sorted(adj[x]))
    queued = set(queue)
    while queue:
        x, y = queue.popleft()
        queued.discard((x, y))
        dy = domains[y]
        removed = []
        for c in domains[x]:
            blocked = conflicts.get((x, c), ())
            if len(dy) <= sum(1 for (s2, c2) in blocked if s2 == y and c2 in dy):
                removed.append(c)
        if not removed:
            continue
        domains[x].difference_update(removed)
        report.pruned_values += len(removed)
        if not domains[x]:
            report.infeasible = True
            report.infeasible_component = _component_of(adj, x)
            break
        for z in adj[x]:
            if z != y and (z, x) not in queued:
                queue.append((z, x))
                queued.add((z, x))

    reduced = instance.restrict(instance.stations, domains=domains) if report.pruned_values else instance
    if not report.infeasible:
        report.components = connected_components(reduced.graph)
        if reduced.target is not None:
            report.target_component = _component_of(reduced.graph, reduced.target)
    return reduced, report


def blocking_capacity(instance: RepackingInstance, station: int, present: set[int] | None = None) -> int:
    """Upper bound on how many channels of ``station`` its neighbours can block at once."""
    dom = instance.domains[station]
    conflicts = instance.conflicts
    per_neighbour: dict[int, dict[int, int]] = {}
    for c in dom:
        for (s2, c2) in conflicts.get((station, c), ()):
            if present is not None and s2 not in present:
                continue
            per_neighbour.setdefault(s2, {}).setdefault(c2, 0)
            per_neighbour[s2][c2] += 1
    return sum(max(counts.values()) for counts in per_neighbour.values())


def remove_unconstrained(instance: RepackingInstance) -> tuple[RepackingInstance, SimplificationReport]:
    """Drop stations that can always be packed whatever their neighbours do.

    A station is removed when its domain is larger than the sum, over its
    neighbours, of the most of its channels any single neighbour channel can
    block. Removal repeats until nothing changes. ``removed_stations`` is in
    removal order; re-inserting in reverse order always succeeds.
    """
    present = set(instance.stations)
    order: list[int] = []
    changed = True
    while changed:
        changed = False
        for s in sorted(present):
            if not instance.domains[s]:
                continue
            if len(instance.domains[s]) > blocking_capacity(instance, s, present):
                present.discard(s)
                order.append(s)
                changed = True
    report = SimplificationReport(removed_stations=tuple(order),
                                  removed_domains={s: instance.domains[s] for s in order})
    reduced = instance.restrict(present) if order else instance
    report.components = connected_components(reduced.graph)
    if reduced.target is not None:
        report.target_component = _component_of(reduced.graph, reduced.target)
    return reduced, report


def decompose(instance: RepackingInstance) -> SimplificationReport:
    adj = instance.graph
    report = SimplificationReport(components=connected_components(adj))
    if instance.target is not None:
        report.target_component = _component_of(adj, instance.target)
    return report


def ring_stations(instance: RepackingInstance, radius: int) -> frozenset[int]:
    """Stations within graph distance ``radius`` of the target."""
    if instance.target is None:
        raise ValueError("augmentation ring needs a target station")
    adj = instance.graph
    dist = {instance.target: 0}
    queue = deque([instance.target])
    while queue:
        u = queue.popleft()
        if dist[u] == radius:
            continue
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return frozenset(dist)


def augmentation_ring(instance: RepackingInstance, radius: int) -> RepackingInstance:
    """Free only the stations near the target; pin everything else to the previous packing.

    Free stations lose every channel that conflicts with a pinned neighbour's
    previous channel. A solution of the result, joined with the previous
    packing on pinned stations, solves ``instance``; infeasibility of the
    result says nothing about ``instance``.
    """
    if instance.previous is None or instance.target is None:
        raise ValueError("augmentation ring needs both a previous assignment and a target")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    free = ring_stations(instance, radius)
    fixed = {s: c for s, c in instance.previous.items() if s not in free}
    conflicts = instance.conflicts
    domains = {}
    for s in free:
        keep = set()
        for c in instance.domains[s]:
            if not any(fixed.get(s2) == c2 for (s2, c2) in conflicts.get((s, c), ())):
                keep.add(c)
        domains[s] = keep
    return instance.restrict(free, domains=domains)


def extend_ring_solution(instance: RepackingInstance, ring: RepackingInstance,
                         witness: Mapping[int, int]) -> dict[int, int]:
    out = {s: c for s, c in instance.previous.items() if s not in ring.station_set}
    out.update(witness)
    return out


def reinsert(instance: RepackingInstance, partial: Mapping[int, int], removed: Iterable[int],
             domains: Mapping[int, Iterable[int]] | None = None) -> dict[int, int] | None:
    """Greedily add removed unconstrained stations back (reverse removal order).

    ``domains`` should be the domains the stations had when removed; the
    removal argument only covers those channels.
    """
    gamma = dict(partial)
    conflicts = instance.conflicts
    domains = domains or instance.domains
    for s in reversed(tuple(removed)):
        for c in sorted(domains[s]):
            if not any(gamma.get(s2) == c2 for (s2, c2) in conflicts.get((s, c), ())):
                gamma[s] = c
                break
        else:
            return None
    return gamma


@dataclass
class Simplified:
    """Result of the full simplification loop.

    ``instance`` is the reduced problem; ``to_solve`` lists the components a
    solver still has to handle. When the original problem has a target and a
    previous packing only the target's component is listed, and the previous
    packing covers the rest.
    """

    original: RepackingInstance
    instance: RepackingInstance
    report: SimplificationReport
    to_solve: list[frozenset[int]]

    def complete(self, partial: Mapping[int, int]) -> dict[int, int] | None:
        gamma = dict(partial)
        prev = self.original.previous or {}
        for s in self.instance.stations:
            if s not in gamma:
                if s not in prev:
                    return None
                gamma[s] = prev[s]
        return reinsert(self.original, gamma, self.report.removed_stations, self.report.removed_domains)


def simplify(instance: RepackingInstance, *, arc: bool = True, unconstrained: bool = True,
             decomposition: bool = True) -> Simplified:
    """Arc consistency, then unconstrained removal, repeated to a fixpoint, then decomposition."""
    total = SimplificationReport()
    current = instance
    removed: list[int] = []
    while True:
        changed = False
        if arc:
            current, rep = arc_consistency(current)
            total.pruned_values += rep.pruned_values
            if rep.infeasible:
                total.infeasible = True
                total.infeasible_component = rep.infeasible_component
                total.removed_stations = tuple(removed)
                return Simplified(instance, current, total, [])
            changed |= rep.pruned_values > 0
        if unconstrained:
            current, rep = remove_unconstrained(current)
            removed.extend(rep.removed_stations)
            total.removed_domains.update(rep.removed_domains)
            changed |= bool(rep.removed_stations)
        if not changed or not (arc and unconstrained):
            break
    total.removed_stations = tuple(removed)
    if current.trivially_infeasible:
        total.infeasible = True
        total.infeasible_component = frozenset(current.empty_domain_stations()[:1])
        return Simplified(instance, current, total, [])
    dec = decompose(current)
    total.components = dec.components
    total.target_component = dec.target_component
    prev = instance.previous
    if (decomposition and instance.target is not None and prev is not None
            and all(s in prev for s in current.stations if s != instance.target)):
        to_solve = [dec.target_component] if dec.target_component is not None else []
    elif decomposition:
        to_solve = sorted(dec.components, key=lambda c: (len(c), min(c)))
    else:
        to_solve = [frozenset(current.stations)] if current.stations else []
    return Simplified(instance, current, total, to_solve)
