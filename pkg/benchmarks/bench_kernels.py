"""Time the compiled search kernels against the pure-Python fallback.

Both backends run the same DPLL and local-search workloads with the same
seeds; results must agree exactly, so the only difference is speed.

    python3 benchmarks/bench_kernels.py --instances 30 --stations 40
"""

import argparse
import statistics
import sys
import time

import numpy as np

from stationrepack import encode, generate_synthetic, build_instance
from stationrepack._kernels import backends
from stationrepack.solve.solvers import _degrees, local_layout


def workloads(n_instances, n_stations, seed):
    out = []
    for k in range(n_instances):
        data = generate_synthetic(n_stations, (14, 24), 0.15, seed + k)
        out.append(build_instance(data, data.stations, 21, name=f"w{k}"))
    return out


def run_dpll(mod, inst, seed):
    f = encode(inst)
    lits, offsets = f.flat_clauses()
    start, var_station = f.station_layout()
    model = np.zeros(f.n_vars, dtype=np.int8)
    stop = np.zeros(1, dtype=np.int32)
    t0 = time.perf_counter()
    status, decisions, conflicts = mod.dpll(lits, offsets, f.n_vars, start, var_station, _degrees(inst),
                                            0, 100, seed, 30.0, stop, model)
    return time.perf_counter() - t0, (status, decisions, conflicts, model.tobytes())


def run_walksat(mod, inst, seed, flips):
    lay = local_layout(inst)
    init = np.full(len(inst.stations), -1, dtype=np.int32)
    out = np.zeros(len(inst.stations), dtype=np.int32)
    stop = np.zeros(1, dtype=np.int32)
    t0 = time.perf_counter()
    status, done = mod.walksat(lay["station_start"], lay["var_station"], lay["conf_start"], lay["conf_other"],
                               lay["conf_pair"], lay["pair_u"], lay["pair_v"], init, 0.2, 20000, 0.0,
                               seed, 30.0, flips, stop, out)
    return time.perf_counter() - t0, (status, done, out.tobytes())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--stations", type=int, default=40)
    ap.add_argument("--flips", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    mods = backends()
    if "compiled" not in mods:
        print("compiled kernels not built; nothing to compare", file=sys.stderr)
        return 1
    insts = workloads(args.instances, args.stations, args.seed)
    print(f"{len(insts)} instances, {args.stations} stations each")
    for kernel in ("dpll", "walksat"):
        times = {name: [] for name in mods}
        for k, inst in enumerate(insts):
            results = {}
            for name, mod in mods.items():
                if kernel == "dpll":
                    dt, res = run_dpll(mod, inst, args.seed + k)
                else:
                    dt, res = run_walksat(mod, inst, args.seed + k, args.flips)
                times[name].append(dt)
                results[name] = res
            if results["python"] != results["compiled"]:
                print(f"{kernel}: backends disagree on {inst.name}", file=sys.stderr)
                return 2
        py, c = sum(times["python"]), sum(times["compiled"])
        ratio = statistics.median(p / max(q, 1e-9) for p, q in zip(times["python"], times["compiled"]))
        print(f"{kernel:8s} python {py * 1000:9.1f} ms  compiled {c * 1000:8.1f} ms  "
              f"total speedup {py / max(c, 1e-9):6.1f}x  median {ratio:6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
