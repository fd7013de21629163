import os
import subprocess
import sys

import numpy as np
import pytest

from percepath import _accel

from conftest import brute_esdf


def _ray_oracle(occ, a, b, step=1e-4):
    """First occupied cell along a densely sampled segment, endpoint cells excluded."""
    n = int(np.ceil(np.linalg.norm(b - a) / step)) + 1
    t = np.linspace(0.0, 1.0, n)[:, None]
    cells = np.floor(a + t * (b - a)).astype(int)
    cells = np.clip(cells, 0, np.array(occ.shape) - 1)
    keep = np.concatenate(([True], np.any(np.diff(cells, axis=0) != 0, axis=1)))
    cells = cells[keep]
    first, last = tuple(cells[0]), tuple(cells[-1])
    for c in map(tuple, cells):
        if c != first and c != last and occ[c]:
            return c
    return None


def test_first_hits_matches_dense_sampling():
    rng = np.random.default_rng(11)
    occ = rng.random((9, 9, 5)) < 0.15
    a = rng.uniform(0.01, [8.99, 8.99, 4.99], size=(300, 3))
    b = rng.uniform(0.01, [8.99, 8.99, 4.99], size=(300, 3))
    for p, q in zip(a, b):
        hit = _accel.first_hits(occ, p, q[None])[0]
        got = None if hit[0] < 0 else tuple(int(v) for v in hit)
        assert got == _ray_oracle(occ, p, q)


def test_edt_nearest_site_is_consistent():
    rng = np.random.default_rng(2)
    occ = rng.random((25, 19)) < 0.05
    d2, si, sj = _accel.edt_2d(occ)
    assert np.all(occ[si, sj])
    ii, jj = np.indices(occ.shape)
    assert np.array_equal(d2, (ii - si) ** 2 + (jj - sj) ** 2)
    assert np.array_equal(np.sqrt(d2), brute_esdf(occ))


def test_edt_without_sites():
    d2, si, sj = _accel.edt_2d(np.zeros((4, 3), bool))
    assert np.all(d2 >= 1e29) and np.all(si == -1) and np.all(sj == -1)


_PROBE = r"""
import sys, numpy as np
from percepath import _accel
rng = np.random.default_rng(4)
occ2 = rng.random((31, 27)) < 0.07
occ3 = rng.random((12, 10, 6)) < 0.12
a = rng.uniform(0.01, [11.99, 9.99, 5.99], size=(200, 3))
b = rng.uniform(0.01, [11.99, 9.99, 5.99], size=(200, 3))
hits = np.stack([_accel.first_hits(occ3, p, q[None])[0] for p, q in zip(a, b)])
batch = _accel.first_hits(occ3, a[0], b)
np.savez(sys.argv[1], backend=_accel.BACKEND, d2=_accel.edt_2d(occ2)[0], hits=hits, batch=batch)
"""


def _probe(tmp_path, flag):
    out = tmp_path / f"probe_{flag}.npz"
    env = dict(os.environ)
    env.pop("PERCEPATH_NO_NUMBA", None)
    if flag:
        env["PERCEPATH_NO_NUMBA"] = "1"
    subprocess.run([sys.executable, "-c", _PROBE, str(out)], check=True, env=env)
    return np.load(out)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")
def test_backends_agree(tmp_path):
    fast = _probe(tmp_path, False)
    slow = _probe(tmp_path, True)
    assert str(fast["backend"]) == "numba" and str(slow["backend"]) == "numpy"
    for key in ("d2", "hits", "batch"):
        assert np.array_equal(fast[key], slow[key])
