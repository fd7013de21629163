import numpy as np
import pytest

from percepath.scenario import gallery_like, storage_like
from percepath.world_map import GridWorld, Landmark


def extrude(mask2d, nz=3, resolution=1.0, landmarks=()):
    """3D world whose every z-layer equals ``mask2d``."""
    occ = np.repeat(np.asarray(mask2d, dtype=bool)[:, :, None], nz, axis=2)
    return GridWorld(occ, resolution, (0.0, 0.0, 0.0), landmarks)


def brute_esdf(mask):
    occ = np.argwhere(mask)
    out = np.empty(mask.shape)
    for i in range(mask.shape[0]):
        for j in range(mask.shape[1]):
            out[i, j] = np.sqrt(np.min(np.sum((occ - [i, j]) ** 2, axis=1)))
    return out


def wall_landmarks(occ, cells, resolution=1.0):
    """Landmarks at the centres of the given occupied cells."""
    return [Landmark(n, tuple((np.array(c) + 0.5) * resolution), tuple(c)) for n, c in enumerate(cells)]


@pytest.fixture(scope="session")
def storage():
    return storage_like(seed=0)


@pytest.fixture(scope="session")
def storage_world(storage):
    return storage.world()


@pytest.fixture(scope="session")
def gallery():
    return gallery_like(seed=0)


# -- acceptance reporting ----------------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        crit = dict(report.user_properties).get("criterion")
        if crit is not None:
            _CRITERIA[crit[0]] = (crit[1], report.outcome)


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcome = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if outcome == 'passed' else 'FAIL'}  {title}")
