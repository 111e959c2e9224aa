"""Independent reference implementations used to check the package.

Nothing here imports solver, simplification or cache code from the
package; only the plain data types are shared.
"""

import itertools
import math


def conflict_set(instance):
    out = set()
    for a, b in instance.pairs:
        out.add((a, b))
        out.add((b, a))
    return out


def solutions(instance, limit=None):
    """Every total assignment satisfying all forbidden pairs, by plain enumeration."""
    stations = list(instance.stations)
    doms = [sorted(instance.domains[s]) for s in stations]
    bad = conflict_set(instance)
    found = []
    for combo in itertools.product(*doms):
        ok = True
        for i in range(len(stations)):
            for j in range(i + 1, len(stations)):
                if ((stations[i], combo[i]), (stations[j], combo[j])) in bad:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            found.append(dict(zip(stations, combo)))
            if limit is not None and len(found) >= limit:
                break
    return found


def satisfiable(instance):
    """Plain chronological backtracking in station order."""
    stations = list(instance.stations)
    if any(not instance.domains[s] for s in stations):
        return False
    bad = conflict_set(instance)
    chosen = []

    def extend(i):
        if i == len(stations):
            return True
        s = stations[i]
        for c in sorted(instance.domains[s]):
            if all(((s, c), slot) not in bad for slot in chosen):
                chosen.append((s, c))
                if extend(i + 1):
                    return True
                chosen.pop()
        return False

    return extend(0)


def assignment_ok(instance, gamma):
    if set(gamma) != set(instance.stations):
        return False
    if any(gamma[s] not in instance.domains[s] for s in instance.stations):
        return False
    return not any(gamma.get(a[0]) == a[1] and gamma.get(b[0]) == b[1] for a, b in instance.pairs)


def ac3_fixpoint(instance):
    """Revise every arc until nothing changes (no queue). Returns (domains, pruned, wiped_out)."""
    doms = {s: set(instance.domains[s]) for s in instance.stations}
    bad = conflict_set(instance)
    nbrs = {s: set() for s in instance.stations}
    for (a, _), (b, _) in instance.pairs:
        nbrs[a].add(b)
        nbrs[b].add(a)
    pruned = 0
    changed = True
    while changed:
        changed = False
        for x in instance.stations:
            for y in nbrs[x]:
                for c in sorted(doms[x]):
                    if not any(((x, c), (y, d)) not in bad for d in doms[y]):
                        doms[x].discard(c)
                        pruned += 1
                        changed = True
                if not doms[x]:
                    return doms, pruned, True
    return doms, pruned, False


def union_find_components(instance):
    parent = {s: s for s in instance.stations}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for (a, _), (b, _) in instance.pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for s in instance.stations:
        groups.setdefault(find(s), set()).add(s)
    return sorted((frozenset(g) for g in groups.values()), key=min)


class LinearScanCache:
    """Reference containment cache: plain lists, plain set containment."""

    def __init__(self):
        self.feasible = []
        self.infeasible = []

    def add_feasible(self, stations, witness):
        self.feasible.append((frozenset(stations), dict(witness)))

    def add_infeasible(self, stations):
        self.infeasible.append(frozenset(stations))

    def query(self, stations):
        q = frozenset(stations)
        if any(e <= q for e in self.infeasible):
            return "INFEASIBLE"
        if any(q <= e for e, _ in self.feasible):
            return "FEASIBLE"
        return "MISS"


def exhaustive_vcg(instance_for, stations, bidders, values):
    """Welfare optimum and VCG payments by enumerating every on-air bidder subset.

    ``instance_for(station_set)`` builds the repacking instance for a set of
    on-air stations. Returns (optimal on-air bidder set, payments dict).
    """
    fixed = set(stations) - set(bidders)
    feasible = {}

    def ok(subset):
        key = frozenset(subset)
        if key not in feasible:
            feasible[key] = satisfiable(instance_for(fixed | key))
        return feasible[key]

    subsets = [frozenset(c) for r in range(len(bidders) + 1) for c in itertools.combinations(bidders, r)]
    good = [s for s in subsets if ok(s)]

    def worth(s):
        return math.fsum(values[b] for b in s)

    best = max(worth(s) for s in good)
    payments = {}
    for b in bidders:
        with_b = [worth(s) - values[b] for s in good if b in s]
        payments[b] = None if not with_b else best - max(with_b)
    return best, good, payments
