"""Compare the numba and numpy kernel backends.

Each backend runs in its own interpreter because the choice is made at import
time through PERCEPATH_NO_NUMBA. Timings exclude the first (compiling) call.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, sys, time
import numpy as np
from percepath import _accel
from percepath.path_select import plan
from percepath.scenario import storage_like

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
occ2 = rng.random((400, 400)) < 0.05
occ3 = rng.random((120, 100, 30)) < 0.02
a = np.array([60.0, 50.0, 15.0])
b = rng.uniform([0, 0, 0], [120, 100, 30], size=(20000, 3))
sc = storage_like(0)
world = sc.world()

def best(fn):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

out = {
    "backend": _accel.BACKEND,
    "edt_2d 400x400": best(lambda: _accel.edt_2d(occ2)),
    "first_hits 20k rays": best(lambda: _accel.first_hits(occ3, a, b)),
    "plan storage": best(lambda: plan(world, sc.start, sc.goal, sc.config(), sc.camera)),
}
print(json.dumps(out))
"""


def run(no_numba, repeat):
    env = dict(os.environ, PERCEPATH_NO_NUMBA="1" if no_numba else "0")
    res = subprocess.run([sys.executable, "-c", _CHILD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    nb, npy = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<22}{nb['backend']:>12}{npy['backend']:>12}{'speedup':>10}")
    for key in nb:
        if key == "backend":
            continue
        print(f"{key:<22}{nb[key]:>11.4f}s{npy[key]:>11.4f}s{npy[key] / nb[key]:>9.1f}x")


if __name__ == "__main__":
    main()
