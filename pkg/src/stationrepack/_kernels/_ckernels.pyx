# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels; see ``_pykernels`` for the reference semantics.

Both kernels run without the GIL and poll ``stop[0]`` and the wall clock
every 256 steps, so portfolio lanes can run side by side and be cancelled.
"""

from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int32_t, int8_t
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

cdef enum:
    SAT = 1
    UNSAT = 0
    TIMEOUT = -1
    CANCELLED = -2
    CHECK_EVERY = 256


cdef inline double _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + ts.tv_nsec * 1e-9


cdef inline uint64_t _splitmix64(uint64_t x) noexcept nogil:
    cdef uint64_t z
    x = x + <uint64_t>0x9E3779B97F4A7C15ULL
    z = x
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef struct Rng:
    uint64_t state


cdef inline void _seed(Rng* r, uint64_t seed) noexcept nogil:
    r.state = _splitmix64(seed)
    if r.state == 0:
        r.state = <uint64_t>0x9E3779B97F4A7C15ULL


cdef inline uint64_t _next(Rng* r) noexcept nogil:
    cdef uint64_t x = r.state
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    r.state = x
    return x * <uint64_t>0x2545F4914F6CDD1DULL


cdef inline long _below(Rng* r, long n) noexcept nogil:
    return <long>((_next(r) >> 11) % <uint64_t>n)


cdef inline double _unit(Rng* r) noexcept nogil:
    return (_next(r) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int _value(int8_t* val, int lit) noexcept nogil:
    cdef int v = val[lit >> 1]
    if v < 0:
        return -1
    return v ^ (lit & 1)


cdef struct Dpll:
    int n_vars
    int n_st
    int* cl
    const int32_t* cs
    const int32_t* vst
    int8_t* val
    int* ntrue
    int* nfalse
    int* wstart
    int* wcnt
    int* wdata
    int* trail
    int trail_len
    int qhead


cdef inline void _assign(Dpll* d, int lit) noexcept nogil:
    cdef int v = lit >> 1
    cdef int b = 1 - (lit & 1)
    d.val[v] = b
    if b:
        d.ntrue[d.vst[v]] += 1
    else:
        d.nfalse[d.vst[v]] += 1
    d.trail[d.trail_len] = lit
    d.trail_len += 1


cdef inline void _undo_to(Dpll* d, int n) noexcept nogil:
    cdef int v
    while d.trail_len > n:
        d.trail_len -= 1
        v = d.trail[d.trail_len] >> 1
        if d.val[v]:
            d.ntrue[d.vst[v]] -= 1
        else:
            d.nfalse[d.vst[v]] -= 1
        d.val[v] = -1


cdef int _propagate(Dpll* d) noexcept nogil:
    cdef int false_lit, c, base, first, k, tmp, nl, i, j, n
    cdef int* ws
    cdef bint moved
    while d.qhead < d.trail_len:
        false_lit = d.trail[d.qhead] ^ 1
        d.qhead += 1
        ws = d.wdata + d.wstart[false_lit]
        n = d.wcnt[false_lit]
        i = 0
        j = 0
        while i < n:
            c = ws[i]
            i += 1
            base = d.cs[c]
            if d.cl[base] == false_lit:
                d.cl[base] = d.cl[base + 1]
                d.cl[base + 1] = false_lit
            first = d.cl[base]
            if _value(d.val, first) == 1:
                ws[j] = c
                j += 1
                continue
            moved = False
            for k in range(base + 2, d.cs[c + 1]):
                if _value(d.val, d.cl[k]) != 0:
                    tmp = d.cl[base + 1]
                    d.cl[base + 1] = d.cl[k]
                    d.cl[k] = tmp
                    nl = d.cl[base + 1]
                    d.wdata[d.wstart[nl] + d.wcnt[nl]] = c
                    d.wcnt[nl] += 1
                    moved = True
                    break
            if moved:
                continue
            ws[j] = c
            j += 1
            if _value(d.val, first) == 0:
                while i < n:
                    ws[j] = ws[i]
                    j += 1
                    i += 1
                d.wcnt[false_lit] = j
                return 1
            _assign(d, first)
        d.wcnt[false_lit] = j
    return 0


def dpll(const int32_t[::1] lits, const int32_t[::1] offsets, int n_vars,
         const int32_t[::1] station_start, const int32_t[::1] var_station,
         const int32_t[::1] degree, int heuristic, long restart_base, uint64_t seed,
         double max_seconds, int32_t[::1] stop, int8_t[::1] model):
    cdef int n_clauses = offsets.shape[0] - 1
    cdef int n_st = station_start.shape[0] - 1
    cdef int n_lits = lits.shape[0]
    cdef int c, size, i, s, key, best, best_key, ties, var, level, x
    cdef long decisions = 0, conflicts = 0, since_restart = 0, ticks = 0
    cdef double limit = <double>restart_base
    cdef bint randomized = False
    cdef int status = UNSAT
    cdef double deadline = _now() + max_seconds
    cdef Dpll d
    cdef Rng rng
    cdef int* occ
    cdef int* units
    cdef int n_units = 0
    cdef int* level_start
    cdef int* dec_lit
    cdef int8_t* flipped
    cdef int32_t* stop_ptr = &stop[0]

    _seed(&rng, seed)
    d.n_vars = n_vars
    d.n_st = n_st
    d.cs = &offsets[0]
    d.vst = &var_station[0] if n_vars > 0 else NULL
    d.cl = <int*>malloc((n_lits + 1) * sizeof(int))
    d.val = <int8_t*>malloc((n_vars + 1) * sizeof(int8_t))
    d.ntrue = <int*>malloc((n_st + 1) * sizeof(int))
    d.nfalse = <int*>malloc((n_st + 1) * sizeof(int))
    d.wstart = <int*>malloc((2 * n_vars + 1) * sizeof(int))
    d.wcnt = <int*>malloc((2 * n_vars + 1) * sizeof(int))
    d.wdata = <int*>malloc((n_lits + 1) * sizeof(int))
    d.trail = <int*>malloc((n_vars + 1) * sizeof(int))
    occ = <int*>malloc((2 * n_vars + 1) * sizeof(int))
    units = <int*>malloc((n_clauses + 1) * sizeof(int))
    level_start = <int*>malloc((n_vars + 2) * sizeof(int))
    dec_lit = <int*>malloc((n_vars + 2) * sizeof(int))
    flipped = <int8_t*>malloc((n_vars + 2) * sizeof(int8_t))
    d.trail_len = 0
    d.qhead = 0

    with nogil:
        for i in range(n_lits):
            d.cl[i] = lits[i]
        for i in range(n_vars):
            d.val[i] = -1
        for s in range(n_st):
            d.ntrue[s] = 0
            d.nfalse[s] = 0
        for i in range(2 * n_vars):
            occ[i] = 0
            d.wcnt[i] = 0
        for i in range(n_lits):
            occ[lits[i]] += 1
        x = 0
        for i in range(2 * n_vars):
            d.wstart[i] = x
            x += occ[i]

        for c in range(n_clauses):
            size = offsets[c + 1] - offsets[c]
            if size == 0:
                status = UNSAT
                break
            if size == 1:
                units[n_units] = d.cl[offsets[c]]
                n_units += 1
            else:
                x = d.cl[offsets[c]]
                d.wdata[d.wstart[x] + d.wcnt[x]] = c
                d.wcnt[x] += 1
                x = d.cl[offsets[c] + 1]
                d.wdata[d.wstart[x] + d.wcnt[x]] = c
                d.wcnt[x] += 1
        else:
            status = 2
            for i in range(n_units):
                x = _value(d.val, units[i])
                if x == 0:
                    status = UNSAT
                    break
                if x < 0:
                    _assign(&d, units[i])

        if status == 2:
            level = 0
            level_start[0] = 0
            dec_lit[0] = 0
            flipped[0] = 0
            while True:
                ticks += 1
                if ticks % CHECK_EVERY == 0:
                    if stop_ptr[0]:
                        status = CANCELLED
                        break
                    if _now() > deadline:
                        status = TIMEOUT
                        break
                if _propagate(&d):
                    conflicts += 1
                    since_restart += 1
                    while level > 0 and flipped[level]:
                        level -= 1
                    if level == 0:
                        status = UNSAT
                        break
                    _undo_to(&d, level_start[level])
                    d.qhead = d.trail_len
                    flipped[level] = 1
                    _assign(&d, dec_lit[level] ^ 1)
                    if restart_base > 0 and since_restart >= limit:
                        _undo_to(&d, level_start[1])
                        d.qhead = d.trail_len
                        level = 0
                        since_restart = 0
                        limit *= 1.5
                        randomized = True
                    continue

                best = -1
                best_key = 0
                ties = 0
                for s in range(n_st):
                    if d.ntrue[s]:
                        continue
                    if heuristic == 0:
                        key = station_start[s + 1] - station_start[s] - d.nfalse[s]
                    elif heuristic == 1:
                        key = -degree[s]
                    else:
                        key = 0
                    if best < 0 or key < best_key:
                        best = s
                        best_key = key
                        ties = 1
                    elif key == best_key and randomized:
                        ties += 1
                        if _below(&rng, ties) == 0:
                            best = s
                if best < 0:
                    for i in range(n_vars):
                        model[i] = 1 if d.val[i] == 1 else 0
                    status = SAT
                    break
                var = station_start[best]
                while d.val[var] >= 0:
                    var += 1
                decisions += 1
                level += 1
                level_start[level] = d.trail_len
                dec_lit[level] = 2 * var
                flipped[level] = 0
                _assign(&d, 2 * var)

    free(d.cl)
    free(d.val)
    free(d.ntrue)
    free(d.nfalse)
    free(d.wstart)
    free(d.wcnt)
    free(d.wdata)
    free(d.trail)
    free(occ)
    free(units)
    free(level_start)
    free(dec_lit)
    free(flipped)
    return status, decisions, conflicts


cdef struct Walk:
    int* vlist
    int* vpos
    int nviol


cdef inline void _vadd(Walk* w, int p) noexcept nogil:
    w.vpos[p] = w.nviol
    w.vlist[w.nviol] = p
    w.nviol += 1


cdef inline void _vremove(Walk* w, int p) noexcept nogil:
    cdef int i = w.vpos[p]
    cdef int last
    w.nviol -= 1
    last = w.vlist[w.nviol]
    w.vlist[i] = last
    w.vpos[last] = i
    w.vpos[p] = -1


def walksat(const int32_t[::1] station_start, const int32_t[::1] var_station,
            const int32_t[::1] conf_start, const int32_t[::1] conf_other,
            const int32_t[::1] conf_pair, const int32_t[::1] pair_u, const int32_t[::1] pair_v,
            const int32_t[::1] init, double noise, long restart_interval, double warm_fraction,
            uint64_t seed, double max_seconds, long max_flips, int32_t[::1] stop, int32_t[::1] out):
    cdef int n_st = station_start.shape[0] - 1
    cdef int n_pairs = pair_u.shape[0]
    cdef int n_vars = station_start[n_st]
    cdef int s, v, p, k, lo, hi, size, old, new, best, cost, var
    cdef long flips = 0, since_restart = 0
    cdef bint have_warm = False, use_warm
    cdef int status = TIMEOUT
    cdef double deadline = _now() + max_seconds
    cdef Rng rng
    cdef Walk w
    cdef int* cur = <int*>malloc((n_st + 1) * sizeof(int))
    cdef int8_t* on = <int8_t*>malloc((n_vars + 1) * sizeof(int8_t))
    cdef int32_t* stop_ptr = &stop[0]
    w.vlist = <int*>malloc((n_pairs + 1) * sizeof(int))
    w.vpos = <int*>malloc((n_pairs + 1) * sizeof(int))
    w.nviol = 0
    _seed(&rng, seed)

    with nogil:
        for s in range(n_st):
            if init[s] >= 0:
                have_warm = True
        use_warm = have_warm
        while True:
            # (re)initialise
            for v in range(n_vars):
                on[v] = 0
            for s in range(n_st):
                size = station_start[s + 1] - station_start[s]
                if use_warm and init[s] >= 0:
                    cur[s] = init[s]
                else:
                    cur[s] = station_start[s] + <int>_below(&rng, size)
                on[cur[s]] = 1
            for p in range(n_pairs):
                w.vpos[p] = -1
            w.nviol = 0
            for p in range(n_pairs):
                if on[pair_u[p]] and on[pair_v[p]]:
                    _vadd(&w, p)
            since_restart = 0

            while True:
                if w.nviol == 0:
                    status = SAT
                    break
                if max_flips >= 0 and flips >= max_flips:
                    status = TIMEOUT
                    break
                if flips % CHECK_EVERY == 0 and flips:
                    if stop_ptr[0]:
                        status = CANCELLED
                        break
                    if _now() > deadline:
                        status = TIMEOUT
                        break
                if restart_interval > 0 and since_restart >= restart_interval:
                    status = 2
                    break
                flips += 1
                since_restart += 1
                p = w.vlist[_below(&rng, w.nviol)]
                var = pair_u[p] if _below(&rng, 2) == 0 else pair_v[p]
                s = var_station[var]
                lo = station_start[s]
                hi = station_start[s + 1]
                size = hi - lo
                if size == 1:
                    continue
                old = cur[s]
                if _unit(&rng) < noise:
                    new = lo + <int>_below(&rng, size - 1)
                    if new >= old:
                        new += 1
                else:
                    new = -1
                    best = 0
                    for v in range(lo, hi):
                        if v == old:
                            continue
                        cost = 0
                        for k in range(conf_start[v], conf_start[v + 1]):
                            cost += on[conf_other[k]]
                        if new < 0 or cost < best:
                            new = v
                            best = cost
                on[old] = 0
                for k in range(conf_start[old], conf_start[old + 1]):
                    if w.vpos[conf_pair[k]] >= 0:
                        _vremove(&w, conf_pair[k])
                on[new] = 1
                cur[s] = new
                for k in range(conf_start[new], conf_start[new + 1]):
                    if on[conf_other[k]]:
                        _vadd(&w, conf_pair[k])
            if status != 2:
                break
            use_warm = have_warm and _unit(&rng) < warm_fraction
        # the final state is reported whatever the status
        for s in range(n_st):
            out[s] = cur[s]

    free(cur)
    free(on)
    free(w.vlist)
    free(w.vpos)
    return status, flips
