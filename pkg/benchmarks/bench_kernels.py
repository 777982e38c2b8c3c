"""Time the solver kernels compiled with numba against the plain-Python fallback.

Each backend runs in its own interpreter because ``DELMU_DISABLE_NUMBA`` is
read at import time::

    python benchmarks/bench_kernels.py [--instances 50] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from delmu._accel import HAS_NUMBA
from delmu.baseline import greedy_solve
from delmu.data import generate_instances
from delmu.globalsearch import GsOptions, multistart_solve
from delmu.model import builtin_topology
from delmu.repair import repair
from delmu.utility import DEFAULT_PARAMS

n, repeat = int(sys.argv[1]), int(sys.argv[2])
topo = builtin_topology(3)
insts = generate_instances(3, n, seed=11)
rng = np.random.default_rng(11)
raws = [rng.uniform(0, 1.5, topo.shape) * inst.max_demand for inst in insts]
gs_opts = GsOptions(n_starts=10, seed=0)

cases = {
    "greedy": lambda k: greedy_solve(topo, insts[k], DEFAULT_PARAMS),
    "repair": lambda k: repair(topo, insts[k], DEFAULT_PARAMS, raws[k]),
    "multistart (10 starts)": lambda k: multistart_solve(topo, insts[k], DEFAULT_PARAMS, gs_opts),
}
out = {"numba": HAS_NUMBA}
for name, fn in cases.items():
    fn(0)  # compile / warm caches
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for k in range(n):
            fn(k)
        best = min(best, (time.perf_counter() - t0) / n)
    out[name] = best
print(json.dumps(out))
"""


def run_backend(disable: bool, instances: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("DELMU_DISABLE_NUMBA", None)
    if disable:
        env["DELMU_DISABLE_NUMBA"] = "1"
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-c", WORKER, str(instances), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    result = json.loads(proc.stdout.strip().splitlines()[-1])
    result["wall"] = time.perf_counter() - t0
    return result


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    fast = run_backend(False, args.instances, args.repeat)
    slow = run_backend(True, args.instances, args.repeat)
    if not fast["numba"]:
        print("numba is not importable; both columns use the fallback")
    print(f"topology 3, {args.instances} instances, best of {args.repeat} (per-instance time)")
    print(f"{'kernel':<24}{'numba':>12}{'fallback':>12}{'speedup':>10}")
    for name in (k for k in fast if k not in ("numba", "wall")):
        a, b = fast[name], slow[name]
        print(f"{name:<24}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.1f}x")
    print(f"process wall time incl. import/compile: numba {fast['wall']:.1f} s, fallback {slow['wall']:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
