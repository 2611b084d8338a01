import math

import numpy as np
import pytest

from ibshell.harmonics import build_basis
from ibshell.quadrature import reference_weights, unit_sphere_weights
from ibshell.shapes import Sphere
from ibshell.sphere_points import shipped_point_set

ACCEPTANCE_KEY = pytest.StashKey[list]()

TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3.0)


@pytest.fixture(scope="session")
def tetra():
    return TETRA.copy()


@pytest.fixture(scope="session")
def points():
    """Shipped point set by count, cached per session."""
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = shipped_point_set(n)
        return cache[n]

    return get


@pytest.fixture(scope="session")
def basis(points):
    cache = {}

    def get(m):
        if m not in cache:
            p = points(m)
            cache[m] = build_basis(p, p.degree)
        return cache[m]

    return get


@pytest.fixture(scope="session")
def sphere_weights(points):
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = unit_sphere_weights(points(n))
        return cache[n]

    return get


@pytest.fixture(scope="session")
def eval_setup(points, sphere_weights):
    """(points, unit-sphere reference jets, reference weights) for count n."""
    cache = {}

    def get(n):
        if n not in cache:
            ev = points(n)
            Zj = Sphere(1.0).jet(ev.lam, ev.theta)
            cache[n] = (ev, Zj, reference_weights(sphere_weights(n), Zj))
        return cache[n]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_nodes(rng, k, margin=0.05):
    """Random (lam, theta) away from the poles."""
    lam = rng.uniform(-math.pi, math.pi, k)
    theta = rng.uniform(-math.pi / 2 + margin, math.pi / 2 - margin, k)
    return lam, theta


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
