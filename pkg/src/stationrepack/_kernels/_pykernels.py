"""Pure-Python search kernels.

Same algorithms, argument layout and random stream as the compiled
``_ckernels`` module, so both backends return identical results for a
given seed (runtime limits aside).
"""

import time

MASK = 0xFFFFFFFFFFFFFFFF

SAT = 1
UNSAT = 0
TIMEOUT = -1
CANCELLED = -2

CHECK_EVERY = 256


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class XorShift:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = splitmix64(seed & MASK) or 0x9E3779B97F4A7C15

    def next(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK

    def below(self, n):
        return (self.next() >> 11) % n

    def unit(self):
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)


def dpll(lits, offsets, n_vars, station_start, var_station, degree, heuristic,
         restart_base, seed, max_seconds, stop, model):
    """Chronological-backtracking DPLL with two watched literals.

    Literals are ``2*var + neg``. Decisions pick a station with no true
    channel variable (``heuristic`` 0 = fewest live channels, 1 = highest
    degree, 2 = lowest index) and set its lowest live channel true. With
    ``restart_base > 0`` the search restarts after that many conflicts,
    growing the limit by 1.5x, and ties are broken at random afterwards.

    Writes 0/1 into ``model`` on SAT. Returns (status, decisions, conflicts).
    """
    deadline = time.monotonic() + max_seconds
    n_clauses = len(offsets) - 1
    n_st = len(station_start) - 1
    cl = [int(x) for x in lits]
    cs = [int(x) for x in offsets]
    st_start = [int(x) for x in station_start]
    vst = [int(x) for x in var_station]
    deg = [int(x) for x in degree]
    rng = XorShift(seed)

    val = [-1] * n_vars
    ntrue = [0] * n_st
    nfalse = [0] * n_st
    watches = [[] for _ in range(2 * n_vars)]
    trail = []
    units = []
    for c in range(n_clauses):
        size = cs[c + 1] - cs[c]
        if size == 0:
            return UNSAT, 0, 0
        if size == 1:
            units.append(cl[cs[c]])
        else:
            watches[cl[cs[c]]].append(c)
            watches[cl[cs[c] + 1]].append(c)

    def value(lit):
        v = val[lit >> 1]
        return -1 if v < 0 else v ^ (lit & 1)

    def assign(lit):
        v = lit >> 1
        b = 1 - (lit & 1)
        val[v] = b
        if b:
            ntrue[vst[v]] += 1
        else:
            nfalse[vst[v]] += 1
        trail.append(lit)

    def undo_to(n):
        while len(trail) > n:
            v = trail.pop() >> 1
            if val[v]:
                ntrue[vst[v]] -= 1
            else:
                nfalse[vst[v]] -= 1
            val[v] = -1

    qhead = 0

    def propagate():
        nonlocal qhead
        while qhead < len(trail):
            false_lit = trail[qhead] ^ 1
            qhead += 1
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                base = cs[c]
                if cl[base] == false_lit:
                    cl[base], cl[base + 1] = cl[base + 1], cl[base]
                first = cl[base]
                if value(first) == 1:
                    ws[j] = c
                    j += 1
                    continue
                moved = False
                for k in range(base + 2, cs[c + 1]):
                    if value(cl[k]) != 0:
                        cl[base + 1], cl[k] = cl[k], cl[base + 1]
                        watches[cl[base + 1]].append(c)
                        moved = True
                        break
                if moved:
                    continue
                ws[j] = c
                j += 1
                if value(first) == 0:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    return True
                assign(first)
            del ws[j:]
        return False

    for u in units:
        x = value(u)
        if x == 0:
            return UNSAT, 0, 0
        if x < 0:
            assign(u)

    level = 0
    level_start = [0]
    dec_lit = [0]
    flipped = [0]
    decisions = conflicts = 0
    since_restart = 0
    limit = float(restart_base)
    randomized = False
    ticks = 0

    while True:
        ticks += 1
        if ticks % CHECK_EVERY == 0:
            if stop is not None and stop[0]:
                return CANCELLED, decisions, conflicts
            if time.monotonic() > deadline:
                return TIMEOUT, decisions, conflicts
        if propagate():
            conflicts += 1
            since_restart += 1
            while level > 0 and flipped[level]:
                level -= 1
                level_start.pop()
                dec_lit.pop()
                flipped.pop()
            if level == 0:
                return UNSAT, decisions, conflicts
            undo_to(level_start[level])
            qhead = len(trail)
            flipped[level] = 1
            assign(dec_lit[level] ^ 1)
            if restart_base > 0 and since_restart >= limit:
                undo_to(level_start[1])
                qhead = len(trail)
                level = 0
                del level_start[1:], dec_lit[1:], flipped[1:]
                since_restart = 0
                limit *= 1.5
                randomized = True
            continue

        best = -1
        best_key = 0
        ties = 0
        for s in range(n_st):
            if ntrue[s]:
                continue
            if heuristic == 0:
                key = st_start[s + 1] - st_start[s] - nfalse[s]
            elif heuristic == 1:
                key = -deg[s]
            else:
                key = 0
            if best < 0 or key < best_key:
                best, best_key, ties = s, key, 1
            elif key == best_key and randomized:
                ties += 1
                if rng.below(ties) == 0:
                    best = s
        if best < 0:
            for v in range(n_vars):
                model[v] = 1 if val[v] == 1 else 0
            return SAT, decisions, conflicts
        var = st_start[best]
        while val[var] >= 0:
            var += 1
        decisions += 1
        level += 1
        level_start.append(len(trail))
        dec_lit.append(2 * var)
        flipped.append(0)
        assign(2 * var)


def walksat(station_start, var_station, conf_start, conf_other, conf_pair, pair_u, pair_v,
            init, noise, restart_interval, warm_fraction, seed, max_seconds, max_flips, stop, out):
    """Min-conflicts walk over one-channel-per-station assignments.

    Each step picks a violated pair uniformly, one of its two stations
    uniformly, and moves that station to its least-conflicting other channel
    (lowest channel on ties) or, with probability ``noise``, to a uniformly
    random other channel. ``init[s] >= 0`` seeds station ``s`` (warm start);
    ``-1`` means random. Restarts every ``restart_interval`` flips re-use
    the warm start with probability ``warm_fraction``.

    Writes the final station->variable assignment into ``out`` whatever the status. Returns (status, flips).
    """
    deadline = time.monotonic() + max_seconds
    n_st = len(station_start) - 1
    n_pairs = len(pair_u)
    st_start = [int(x) for x in station_start]
    vst = [int(x) for x in var_station]
    cstart = [int(x) for x in conf_start]
    cother = [int(x) for x in conf_other]
    cpair = [int(x) for x in conf_pair]
    pu = [int(x) for x in pair_u]
    pv = [int(x) for x in pair_v]
    warm = [int(x) for x in init]
    have_warm = any(x >= 0 for x in warm)
    rng = XorShift(seed)
    n_vars = st_start[n_st]

    cur = [0] * n_st
    on = [0] * n_vars
    vlist = [0] * n_pairs
    vpos = [-1] * n_pairs
    nviol = 0

    def add(p):
        nonlocal nviol
        vpos[p] = nviol
        vlist[nviol] = p
        nviol += 1

    def remove(p):
        nonlocal nviol
        i = vpos[p]
        nviol -= 1
        last = vlist[nviol]
        vlist[i] = last
        vpos[last] = i
        vpos[p] = -1

    def reset(use_warm):
        nonlocal nviol
        for v in range(n_vars):
            on[v] = 0
        for s in range(n_st):
            size = st_start[s + 1] - st_start[s]
            if use_warm and warm[s] >= 0:
                cur[s] = warm[s]
            else:
                cur[s] = st_start[s] + rng.below(size)
            on[cur[s]] = 1
        for p in range(n_pairs):
            vpos[p] = -1
        nviol = 0
        for p in range(n_pairs):
            if on[pu[p]] and on[pv[p]]:
                add(p)

    def finish(status):
        # the final state is reported whatever the status
        for s in range(n_st):
            out[s] = cur[s]
        return status, flips

    reset(have_warm)
    flips = 0
    since_restart = 0
    while True:
        if nviol == 0:
            return finish(SAT)
        if max_flips >= 0 and flips >= max_flips:
            return finish(TIMEOUT)
        if flips % CHECK_EVERY == 0 and flips:
            if stop is not None and stop[0]:
                return finish(CANCELLED)
            if time.monotonic() > deadline:
                return finish(TIMEOUT)
        if restart_interval > 0 and since_restart >= restart_interval:
            reset(have_warm and rng.unit() < warm_fraction)
            since_restart = 0
            continue
        flips += 1
        since_restart += 1
        p = vlist[rng.below(nviol)]
        var = pu[p] if rng.below(2) == 0 else pv[p]
        s = vst[var]
        lo, hi = st_start[s], st_start[s + 1]
        size = hi - lo
        if size == 1:
            continue
        old = cur[s]
        if rng.unit() < noise:
            new = lo + rng.below(size - 1)
            if new >= old:
                new += 1
        else:
            new = -1
            best = 0
            for v in range(lo, hi):
                if v == old:
                    continue
                cost = 0
                for k in range(cstart[v], cstart[v + 1]):
                    cost += on[cother[k]]
                if new < 0 or cost < best:
                    new, best = v, cost
        on[old] = 0
        for k in range(cstart[old], cstart[old + 1]):
            if vpos[cpair[k]] >= 0:
                remove(cpair[k])
        on[new] = 1
        cur[s] = new
        for k in range(cstart[new], cstart[new + 1]):
            if on[cother[k]]:
                add(cpair[k])
