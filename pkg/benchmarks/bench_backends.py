"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by SUPEROPT_DISABLE_JIT).  Workloads:

  mcmc     one 2,000-iteration search on the HD task-20 reference
  eqcost   test-case cost of the same program over 4,096 random inputs
  rollouts 20 rollouts of 200 iterations (one training program's worth / 5)

Both backends consume identical uniform streams, so the script also checks
that they return the same scores.

    python3 benchmarks/bench_backends.py [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from superopt import BACKEND, eq_cost, make_tests, uniform_params
from superopt.data import hd_task
from superopt.mcmc import SearchConfig, metropolis_run, run_rollouts

repeats = int(sys.argv[1])
task = hd_task(20)
p = task.reference
tests = task.make_tests(0)
big = make_tests(p, task.sample_inputs(np.random.default_rng(1), 4096), [0])
params = uniform_params()

def timed(fn):
    fn()  # warm-up (includes JIT compilation)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out

res = {"backend": BACKEND}
res["mcmc"] = timed(lambda: metropolis_run(p, p, params, tests, SearchConfig(2000, seed=3)).score)
res["eqcost"] = timed(lambda: eq_cost(p, big))
res["rollouts"] = timed(lambda: float(run_rollouts(p, p, params, tests, SearchConfig(200, seed=4), 20).scores.mean()))
print(json.dumps(res))
"""


def run(disable_jit: bool, repeats: int) -> dict:
    env = dict(os.environ)
    env["SUPEROPT_DISABLE_JIT"] = "1" if disable_jit else "0"
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeats)
    slow = run(True, args.repeats)
    print(f"{'workload':>10s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}  same result")
    for key in ("mcmc", "eqcost", "rollouts"):
        (tf, rf), (ts, rs) = fast[key], slow[key]
        print(f"{key:>10s} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f}  {rf == rs}")


if __name__ == "__main__":
    main()
