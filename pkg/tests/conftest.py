import numpy as np
import pytest

from isingtrack import Event, Hit, Hyperparams, build_graph
from isingtrack.toy_detector import DetectorGeometry

# (layers, particles, doublets, qubits) rows of the published results table
RESULTS_TABLE = [
    (3, 2, 8, 8),
    (3, 3, 18, 12),
    (3, 4, 32, 12),
    (3, 5, 50, 14),
    (4, 2, 12, 10),
    (4, 3, 27, 12),
    (4, 4, 48, 14),
]


def make_event(points, spacing=30.0):
    """Event from ``(x, y, module, truth)`` tuples on a regular toy geometry."""
    n_layers = max(p[2] for p in points) + 1 if points else 1
    geom = DetectorGeometry.regular(n_layers, spacing, 50.0, 50.0)
    hits = tuple(
        Hit(k, float(x), float(y), geom.layer_z[m], m, t) for k, (x, y, m, t) in enumerate(points)
    )
    return Event(hits, (), geom.id)


def line_event(n_layers, slope=(0.0, 0.0), truth=0):
    return make_event([(slope[0] * 30 * (m + 1), slope[1] * 30 * (m + 1), m, truth) for m in range(n_layers)])


@pytest.fixture
def defaults():
    return Hyperparams()


@pytest.fixture
def tight():
    return Hyperparams(epsilon=1e-9)


@pytest.fixture
def two_doublet_graph():
    return build_graph(line_event(3), epsilon=1e-5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda x: int(x.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
