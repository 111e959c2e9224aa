"""Command-line entry point.

JSON goes to stdout (or ``--output``); diagnostics go to stderr. ``solve``
exits 10 on SAT, 20 on UNSAT and 30 on TIMEOUT; every other successful
command exits 0 and any error exits 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import auction, bench
from .cache import CacheError, ContainmentCache, cached_solve
from .model import DataError, generate_synthetic, load_instance_file, load_interference, write_interference
from .simplify import simplify
from .solve import Portfolio, Status, default_portfolio, run_portfolio

log = logging.getLogger("stationrepack")

EXIT_CODES = {Status.SAT: 10, Status.UNSAT: 20, Status.TIMEOUT: 30}
EXIT_ERROR = 1


class CliError(Exception):
    pass


def _emit(args, payload) -> None:
    text = json.dumps(payload, indent=2 if args.pretty else None, sort_keys=False)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
        sys.stdout.flush()


def _load_data(args):
    if args.data:
        root = Path(args.data)
        return load_interference(root / "domains.csv", root / "constraints.csv")
    if args.domains and args.constraints:
        return load_interference(args.domains, args.constraints)
    raise CliError("interference data needed: --data DIR or --domains/--constraints")


def _portfolio(args) -> Portfolio:
    pf = Portfolio.load(args.portfolio) if args.portfolio else default_portfolio()
    if args.seed:
        pf = Portfolio(tuple(c.with_(seed=c.seed + args.seed) for c in pf.configs))
    return pf


def _cutoff(args, default_ms: float) -> float:
    return (args.cutoff_ms if args.cutoff_ms is not None else default_ms) / 1000.0


def cmd_solve(args) -> int:
    data = _load_data(args)
    inst = load_instance_file(args.instance, data)
    pf = _portfolio(args)
    cutoff = _cutoff(args, 60000.0)
    solve = lambda i: run_portfolio(i, pf, cutoff)  # noqa: E731
    cache = None
    cache_path = Path(args.cache) if args.cache else None
    if cache_path is not None:
        if cache_path.exists():
            cache = ContainmentCache.load(cache_path, data, inst.max_channel)
        else:
            cache = ContainmentCache.for_data(data, inst.max_channel)
        res = cached_solve(inst, cache, solve)
        cache.save(cache_path)
    else:
        res = solve(inst)
    payload = res.to_json()
    if args.explain:
        payload["simplification"] = simplify(inst).report.to_json()
    _emit(args, payload)
    return EXIT_CODES[res.status]


def _simulation(args) -> auction.Simulation:
    sim = auction.load_simulation(args.spec)
    if args.checker:
        sim.config.checker = args.checker
    if args.cutoff_ms is not None:
        sim.config.cutoff = args.cutoff_ms / 1000.0
    if args.portfolio:
        sim.config.portfolio = Portfolio.load(args.portfolio)
    return sim


def cmd_simulate(args) -> int:
    sim = _simulation(args)
    outcome = auction.run_reverse_auction(sim.data, sim.config, sim.valuations)
    payload = outcome.to_json(include_events=True, timings=args.timings)
    if args.vcg:
        opt = auction.vcg(sim.data, sim.stations, sim.config.max_channel, sim.valuations,
                          participants=outcome.participants)
        payload["vcg"] = opt.to_json()
        payload["metrics"] = auction.metrics(outcome, sim.valuations, opt)
    else:
        payload["metrics"] = auction.metrics(outcome, sim.valuations)
    if args.events_csv:
        auction.write_event_csv(outcome, args.events_csv)
    _emit(args, payload)
    return 0


def cmd_vcg(args) -> int:
    sim = _simulation(args)
    prices = {s: sim.config.opening_price[s] for s in sim.stations}
    participants = auction.decide_participation(sim.valuations, prices)
    opt = auction.vcg(sim.data, sim.stations, sim.config.max_channel, sim.valuations, participants=participants)
    payload = opt.to_json()
    payload["metrics"] = auction.metrics(opt, sim.valuations)
    _emit(args, payload)
    return 0


def cmd_bench(args) -> int:
    corpus_dir = Path(args.corpus)
    if args.harvest:
        if not args.spec:
            raise CliError("--harvest needs --spec to locate the simulation's interference data")
        sim = auction.load_simulation(args.spec)
        events = []
        for path in args.harvest:
            events.extend(bench.load_events(path))
        corpus = bench.harvest_nontrivial(sim.data, events, args.size, args.seed)
        bench.save_corpus(corpus_dir, sim.data, corpus)
        log.info("harvested %d nontrivial instances into %s", len(corpus), corpus_dir)
    _, corpus = bench.load_corpus(corpus_dir)
    solvers = []
    for name in args.solvers.split(","):
        name = name.strip()
        if name == "greedy":
            solvers.append("greedy")
        elif name == "portfolio":
            solvers.append(_portfolio(args))
        else:
            raise CliError(f"unknown solver {name!r} (choose greedy, portfolio)")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    records = bench.run_benchmark(corpus, solvers, _cutoff(args, 1000.0), seeds, records_path=args.records)
    report = bench.ecdf_report(records)
    if args.ecdf:
        bench.write_ecdf(report, args.ecdf)
    _emit(args, {
        "instances": len(corpus),
        "records": len(records),
        "solved_fraction": {k: v["solved_fraction"] for k, v in report.items()},
    })
    return 0


def cmd_cache(args) -> int:
    if args.action == "stats":
        cache = ContainmentCache.load(args.cache)
        _emit(args, cache.stats())
    elif args.action == "export":
        cache = ContainmentCache.load(args.cache)
        Path(args.json).write_text(json.dumps(cache.to_json()) + "\n", encoding="utf-8")
        _emit(args, cache.stats())
    else:
        cache = ContainmentCache.from_json(json.loads(Path(args.json).read_text(encoding="utf-8")))
        cache.save(args.cache)
        _emit(args, cache.stats())
    return 0


def cmd_gen(args) -> int:
    try:
        lo, hi = (int(x) for x in args.channels.split("-"))
    except ValueError:
        raise CliError(f"--channels wants LO-HI, got {args.channels!r}") from None
    data = generate_synthetic(args.stations, (lo, hi), args.density, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_interference(data, out / "domains.csv", out / "constraints.csv")
    _emit(args, {"stations": len(data.domains), "forbidden_pairs": len(data.forbidden_pairs),
                 "fingerprint": data.fingerprint, "directory": str(out)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # global flags work before or after the subcommand; the subcommand
        # copy must not reset values given before it
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=d(0))
        g.add_argument("--cutoff-ms", type=float, default=d(None))
        g.add_argument("--log-level", default=d("WARNING"))
        g.add_argument("--output", default=d(None), help="write the JSON result here instead of stdout")
        g.add_argument("--pretty", action="store_true", default=d(False), help="indent JSON output")
        return g

    common = global_flags(True)
    p = argparse.ArgumentParser(prog="stationrepack", parents=[global_flags(False)],
                                description="Station repacking feasibility solver and reverse-auction simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp):
        sp.add_argument("--data", help="directory holding domains.csv and constraints.csv")
        sp.add_argument("--domains")
        sp.add_argument("--constraints")

    s = sub.add_parser("solve", parents=[common], help="decide one repacking instance")
    s.add_argument("instance")
    data_flags(s)
    s.add_argument("--portfolio", help="portfolio JSON (default: bundled portfolio)")
    s.add_argument("--cache", help="containment cache file, created if missing")
    s.add_argument("--explain", action="store_true", help="include the simplification report")
    s.set_defaults(func=cmd_solve)

    for name, func, helptext in (("simulate", cmd_simulate, "run a descending clock auction"),
                                 ("vcg", cmd_vcg, "welfare-optimal VCG outcome")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("spec", help="simulation spec JSON")
        s.add_argument("--checker", choices=["greedy", "portfolio", "complete", "oracle"])
        s.add_argument("--portfolio")
        if name == "simulate":
            s.add_argument("--vcg", action="store_true", help="also compute VCG and the value-loss ratio")
            s.add_argument("--events-csv", help="write the feasibility-check log as CSV")
            s.add_argument("--timings", action="store_true", help="include check runtimes in the JSON log")
        s.set_defaults(func=func)

    s = sub.add_parser("bench", parents=[common], help="benchmark solvers on an instance corpus")
    s.add_argument("corpus", help="corpus directory (domains.csv, constraints.csv, instances/)")
    s.add_argument("--solvers", default="greedy,portfolio")
    s.add_argument("--portfolio")
    s.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    s.add_argument("--records", help="records CSV path")
    s.add_argument("--ecdf", help="ECDF CSV path")
    s.add_argument("--harvest", nargs="+", metavar="OUTCOME", help="build the corpus from auction outcome JSON files")
    s.add_argument("--spec", help="simulation spec the harvested outcomes came from")
    s.add_argument("--size", type=int, help="subsample the harvested corpus to this size")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("cache", parents=[common], help="inspect or convert containment caches")
    s.add_argument("action", choices=["export", "import", "stats"])
    s.add_argument("cache", help="binary cache file")
    s.add_argument("--json", help="JSON file to export to or import from")
    s.set_defaults(func=cmd_cache)

    s = sub.add_parser("gen", parents=[common], help="generate synthetic interference data")
    s.add_argument("out_dir")
    s.add_argument("--stations", type=int, required=True)
    s.add_argument("--channels", default="14-36", help="inclusive LO-HI range")
    s.add_argument("--density", type=float, default=0.1)
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "cache" and args.action in ("export", "import") and not args.json:
        parser.error(f"cache {args.action} needs --json")
    try:
        return args.func(args)
    except (CliError, DataError, CacheError, auction.ClearingTargetInfeasible, OSError, ValueError, KeyError) as exc:
        print(f"stationrepack: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
