"""Parallel portfolio: every member races on its own thread, first decisive answer wins."""

from __future__ import annotations

import contextlib
import gc
import logging
import queue
import threading
import time

from ..model import RepackingInstance, verify_assignment
from .solvers import run_config
from .types import CancelToken, Portfolio, SolverResult, Status

log = logging.getLogger(__name__)

# members poll their stop flag every few hundred kernel steps
CANCEL_GRACE = 0.05

_gc_lock = threading.Lock()
_gc_holders = 0
_gc_was_enabled = False


@contextlib.contextmanager
def _gc_paused():
    """Hold off cyclic GC during a race.

    A full collection on a large heap stops every thread for 100 ms or more,
    which alone would blow the cutoff. Reference counting still frees
    acyclic garbage; cycles wait until the last concurrent race ends.
    """
    global _gc_holders, _gc_was_enabled
    with _gc_lock:
        if _gc_holders == 0:
            _gc_was_enabled = gc.isenabled()
            gc.disable()
        _gc_holders += 1
    try:
        yield
    finally:
        with _gc_lock:
            _gc_holders -= 1
            if _gc_holders == 0 and _gc_was_enabled:
                gc.enable()


def run_portfolio(instance: RepackingInstance, portfolio: Portfolio, cutoff: float | None = None) -> SolverResult:
    """Race the members of ``portfolio`` on ``instance``.

    The first SAT or UNSAT answer is returned and the remaining members are
    told to stop; if nobody answers within ``cutoff`` seconds the result is
    TIMEOUT. A single-member portfolio runs inline on the calling thread.
    """
    t0 = time.perf_counter()
    if cutoff is None:
        cutoff = max(c.cutoff for c in portfolio)
    if len(portfolio) == 1:
        cfg = portfolio.configs[0]
        res = run_config(instance, cfg, CancelToken(), cutoff)
        res.runtime = time.perf_counter() - t0
        return res

    with _gc_paused():
        winner = _race(instance, portfolio, cutoff, t0)
    runtime = time.perf_counter() - t0
    if winner is None:
        return SolverResult(Status.TIMEOUT, None, runtime, "portfolio")
    if winner.status is Status.SAT and not verify_assignment(instance, winner.witness):
        raise RuntimeError(f"portfolio member {winner.solver_name!r} returned a non-verifying witness")
    winner.runtime = runtime
    return winner


def _race(instance: RepackingInstance, portfolio: Portfolio, cutoff: float, t0: float) -> SolverResult | None:
    token = CancelToken()
    answers: queue.Queue = queue.Queue()

    def lane(cfg):
        try:
            res = run_config(instance, cfg, token, cutoff)
        except Exception as exc:  # a crashing member must not sink the race
            log.exception("portfolio member %s failed", cfg.name)
            res = SolverResult(Status.TIMEOUT, None, 0.0, cfg.name, stats={"error": repr(exc)})
        answers.put(res)

    threads = [threading.Thread(target=lane, args=(cfg,), name=f"lane-{cfg.name}", daemon=True)
               for cfg in portfolio]
    for th in threads:
        th.start()

    deadline = t0 + cutoff
    pending = len(threads)
    winner = None
    while pending:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            break
        try:
            res = answers.get(timeout=remaining)
        except queue.Empty:
            break
        pending -= 1
        if res.status.decided:
            winner = res
            break
    token.cancel()
    stop_by = time.perf_counter() + CANCEL_GRACE
    for th in threads:
        th.join(timeout=max(0.0, stop_by - time.perf_counter()))
    return winner
