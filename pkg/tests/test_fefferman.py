import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crlab import fefferman as fe
from crlab import jets
from crlab import pseudohermitian as ph
from crlab.jets import parse_hermitian, parse_polynomial

from conftest import ELLIPSOID, SPHERE3


def ball_points(n, count, radius=0.9, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * radius * rng.uniform(0.1, 1.0, size=(count, 1))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_is_fixed_point(n):
    u = parse_hermitian("1-" + "-".join(f"|z{j+1}|^2" for j in range(n)), n)
    J = fe.J_functional(u, fe.euclidean(n), ball_points(n, 20))
    assert np.max(np.abs(J - 1)) < 1e-12


def test_ricci_potential_examples():
    z = ball_points(2, 10)
    assert np.max(np.abs(fe.euclidean(2).f_ricci(z))) < 1e-14
    eps = 0.3
    amb = fe.ricci_potential(parse_hermitian(f"|z1|^2+|z2|^2+{eps}*|z1|^4", 2))
    assert np.allclose(amb.f_ricci(z), -np.log(1 + 4 * eps * np.abs(z[:, 0]) ** 2), atol=1e-13)
    # Ricci form is -i ddbar log det g; compare with an explicit derivative of f
    r = amb.ricci_form(z)
    s = np.abs(z[:, 0]) ** 2
    assert np.allclose(r[:, 0, 0], -4 * eps / (1 + 4 * eps * s) ** 2, atol=1e-12)
    assert np.allclose(r[:, 1, 1], 0, atol=1e-12)


def test_degenerate_metric():
    amb = fe.ricci_potential(parse_hermitian("|z1|^2", 2))
    with pytest.raises(fe.DegenerateMetric):
        amb.check_positive(ball_points(2, 5))
    with pytest.raises(fe.DegenerateMetric):
        amb.log_det(ball_points(2, 5))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(1, 3))
def test_scaling_law(c, n):
    u = parse_hermitian("1-" + "-".join(f"{j+1}*|z{j+1}|^2" for j in range(n)) + "+0.1*|z1|^4", n)
    amb = fe.euclidean(n)
    z = ball_points(n, 8, radius=0.5)
    assert np.allclose(fe.J_functional(u * c, amb, z), c ** (n + 1) * fe.J_functional(u, amb, z), rtol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_constant_shift_of_f(c):
    base = fe.euclidean(2)
    shifted = fe.AmbientMetric(base.potential, gauge=jets.ComplexPolynomial.constant(2, -c))
    u = parse_hermitian("1-|z1|^2-2*|z2|^2", 2)
    z = ball_points(2, 6, radius=0.5)
    assert np.allclose(fe.J_functional(u, shifted, z), np.exp(-c) * fe.J_functional(u, base, z), rtol=1e-12)


def test_perturbation_is_detected_and_log_form_agrees(geometry):
    M = geometry.surface(SPHERE3)
    nodes = ph.sample_nodes(M, 4)
    collar = fe.collar_points(M, nodes, 0.05)
    u = parse_hermitian("1-|z1|^2-|z2|^2+0.05*|z1|^2*|z2|^2", 2)
    r, lf = fe.ma_residual(u, fe.euclidean(2), collar, log_form=True)
    assert np.max(np.abs(r)) > 1e-3
    ok = np.isfinite(lf)
    assert ok.mean() > 0.99
    # the log form is log J, so the two residuals carry the same sign
    assert np.allclose(lf[ok], np.log1p(r[ok]), atol=1e-10)
    assert np.all(np.sign(lf[ok]) == np.sign(r[ok]))


def test_collar_lies_inside(geometry):
    M = geometry.surface(SPHERE3)
    nodes = ph.sample_nodes(M, 3)
    c = fe.collar_points(M, nodes, 0.1)
    d = 1 - np.linalg.norm(c, axis=1)
    assert np.all(d > 0) and np.max(d) < 0.1 + 1e-12
    assert set(np.round(d, 10)) == {0.025, 0.05, 0.075, 0.1}


def test_minimal_norm_gauge(geometry):
    M = geometry.surface(SPHERE3)
    pot = parse_hermitian("|z1|^2+|z2|^2+0.3*|z1|^4+0.2*z1^2*conj(z2)+0.2*z2*conj(z1)^2", 2)
    plain = fe.ricci_potential(pot)
    gauged = fe.ricci_potential(pot, minimal_norm=True, M=M)
    z = ball_points(2, 10, radius=0.7)
    # the gauge is pluriharmonic: i ddbar f (hence the Ricci form) is unchanged
    assert np.max(np.abs(jets.levi_matrix(gauged.gauge, z))) < 1e-12
    assert np.allclose(plain.ricci_form(z), gauged.ricci_form(z))
    # J changes by exactly e^h
    u = parse_hermitian("1-|z1|^2-|z2|^2", 2)
    ratio = fe.J_functional(u, gauged, z) / fe.J_functional(u, plain, z)
    assert np.allclose(ratio, np.exp(gauged.gauge(z).real), rtol=1e-8)
    # and the gauged potential is L2-orthogonal to the pluriharmonic fit space
    pts, w = fe.domain_quadrature(M, 6)
    f = gauged.f_ricci(pts)
    for b in fe.pluriharmonic_basis(2, 2):
        assert abs(np.sum(w * f * b(pts).real)) < 1e-10
    with pytest.raises(ValueError):
        fe.ricci_potential(pot, minimal_norm=True)


def test_jacobian_matches_finite_differences(geometry):
    M = geometry.surface(ELLIPSOID)
    collar = fe.collar_points(M, ph.sample_nodes(M, 3), 0.05)[:40]
    amb = fe.euclidean(2)
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(5):
        c = rng.normal(size=len(fe.ansatz_basis(2, 2))) * 0.05
        _, jac = fe.residual_jacobian(M, amb, c, 2, collar)
        for k in range(len(c)):
            e = np.zeros_like(c)
            e[k] = h
            rp, _ = fe.residual_jacobian(M, amb, c + e, 2, collar)
            rm, _ = fe.residual_jacobian(M, amb, c - e, 2, collar)
            fd = (rp - rm) / (2 * h)
            assert np.linalg.norm(fd - jac[:, k]) < 1e-5 * max(np.linalg.norm(jac[:, k]), 1e-8)


def test_ma_solve_exact_ball(geometry):
    st_ = fe.ma_solve(geometry.surface(SPHERE3), fe.euclidean(2))
    assert st_.iterations == 0 and st_.status == "converged"
    assert st_.final_residual < 1e-12


def test_ma_solve_manufactured(geometry, tmp_path):
    M = geometry.surface(SPHERE3)
    v0 = parse_polynomial("0.05*z1+0.05*conj(z1)", 2)
    st_ = fe.ma_solve(M, fe.euclidean(2), ansatz_degree=2, initial_exponent=v0)
    h = st_.history
    assert h[0] > 1e-2 and h[-1] < 1e-8
    assert all(b < a for a, b in zip(h, h[1:]))
    assert np.max(np.abs(st_.coeffs)) < 1e-8
    # the Dirichlet condition is built into the ansatz
    assert max(st_.boundary_max_u) < 1e-10
    p = st_.write_csv(tmp_path / "h.csv")
    assert len(p.read_text().splitlines()) == len(h) + 1


def test_ma_solve_initial_exponent_outside_span(geometry):
    with pytest.raises(ValueError):
        fe.ma_solve(geometry.surface(SPHERE3), fe.euclidean(2), ansatz_degree=1,
                    initial_exponent=parse_polynomial("0.1*|z1|^4", 2))
    with pytest.raises(ValueError):
        fe.ma_solve(geometry.surface(SPHERE3), fe.euclidean(2), damping=1.5)


def test_ma_solve_ellipsoid_reduces_residual(geometry):
    st_ = fe.ma_solve(geometry.surface(ELLIPSOID), fe.euclidean(2), ansatz_degree=4)
    h = st_.history
    assert h[-1] < 0.1 * h[0]
    assert all(b < a for a, b in zip(h, h[1:]))
    assert max(st_.boundary_max_u) < 1e-10
