"""Shared, session-scoped geometry: JAX compiles and node sampling are slow."""

import pytest

from crlab import operators as op
from crlab import pseudohermitian as ph

SPHERE3 = "|z1|^2+|z2|^2-1"
SPHERE5 = "|z1|^2+|z2|^2+|z3|^2-1"
ELLIPSOID = "|z1|^2+2*|z2|^2-1"
# a genuinely non-spherical ellipsoid (real-linear, not complex-linear, image of S^3)
REAL_ELLIPSOID = "|z1|^2+|z2|^2+0.1*z1^2+0.1*conj(z1)^2-1"


class Geometry:
    """Memoized surfaces, node sets, frames, invariants and spaces."""

    def __init__(self):
        self._surf = {}
        self._geo = {}
        self._space = {}

    def surface(self, u, n=2, phi=""):
        key = (u, n, phi)
        if key not in self._surf:
            self._surf[key] = ph.build_hypersurface({"n": n, "u": u, "phi": phi})
        return self._surf[key]

    def geo(self, u, res, n=2, phi="", curvature=True):
        key = (u, res, n, phi, curvature)
        if key not in self._geo:
            M = self.surface(u, n, phi)
            ns = ph.sample_nodes(M, res)
            fr = ph.build_frames(M, ns)
            inv = ph.compute_invariants(fr, curvature=curvature)
            self._geo[key] = (M, ns, fr, inv)
        return self._geo[key]

    def space(self, u, res, degree, n=2, phi="", curvature=True):
        key = (u, res, degree, n, phi, curvature)
        if key not in self._space:
            M, ns, fr, inv = self.geo(u, res, n, phi, curvature)
            self._space[key] = (op.build_space(M, ns, fr, degree), inv)
        return self._space[key]


_GEOMETRY = Geometry()


@pytest.fixture(scope="session")
def geometry():
    return _GEOMETRY


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
