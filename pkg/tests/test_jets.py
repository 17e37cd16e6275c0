import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crlab import jets
from crlab.jets import ComplexPolynomial, HermitianPolynomial, parse_hermitian, parse_polynomial


def random_poly(n, degree, seed, count=8):
    rng = np.random.default_rng(seed)
    exps = rng.integers(0, degree + 1, size=(count, 2 * n))
    exps = exps[exps.sum(axis=1) <= degree]
    c = rng.normal(size=len(exps)) + 1j * rng.normal(size=len(exps))
    return ComplexPolynomial(n, exps, c)


def oracle_eval(p, z):
    """Term-by-term summation with python complex arithmetic."""
    out = []
    for pt in z:
        s = 0j
        for (a, b), c in p.terms.items():
            t = complex(c)
            for j in range(p.n):
                t *= complex(pt[j]) ** a[j] * complex(np.conj(pt[j])) ** b[j]
            s += t
        out.append(s)
    return np.array(out)


def test_wirtinger_monomial_rules():
    p = parse_polynomial("z1*conj(z1)", 2)
    assert p.d(1).allclose(parse_polynomial("conj(z1)", 2))
    assert parse_polynomial("z1", 2).dbar(1).is_zero()
    with pytest.raises(IndexError):
        p.wirtinger("holo", 3)


def test_wirtinger_matches_finite_differences():
    p = random_poly(2, 6, seed=1, count=30)
    rng = np.random.default_rng(2)
    z = rng.normal(size=(5, 2)) * 0.7 + 1j * rng.normal(size=(5, 2)) * 0.7
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1
        fx = (p(z + h * e) - p(z - h * e)) / (2 * h)
        fy = (p(z + 1j * h * e) - p(z - 1j * h * e)) / (2 * h)
        dz = 0.5 * (fx - 1j * fy)
        dzb = 0.5 * (fx + 1j * fy)
        scale = np.max(np.abs(p(z)))
        assert np.max(np.abs(p.d(j + 1)(z) - dz)) < 1e-7 * scale
        assert np.max(np.abs(p.dbar(j + 1)(z) - dzb)) < 1e-7 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_derivatives_commute(seed, n):
    p = random_poly(n, 5, seed)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            assert p.d(i).dbar(j).allclose(p.dbar(j).d(i))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_evaluation_matches_oracle(seed):
    p = random_poly(2, 6, seed, count=12)
    z = np.random.default_rng(seed).normal(size=(4, 2)) + 0.3j
    ref = oracle_eval(p, z)
    assert np.allclose(p(z), ref, rtol=1e-13, atol=1e-13 * np.max(np.abs(ref)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_hermitized_polynomial_is_real(seed):
    p = HermitianPolynomial.hermitize(random_poly(2, 4, seed))
    z = np.random.default_rng(seed + 1).normal(size=(10, 2)) * (1 + 1j)
    cmax = max(np.max(np.abs(p.coeffs), initial=0.0), 1.0)
    assert np.max(np.abs(p.evaluate_complex(z).imag)) < 1e-12 * cmax * 50


def test_parse_rejects_non_hermitian_naming_term():
    with pytest.raises(ValueError, match="z2"):
        parse_hermitian("|z1|^2 + z2 - 1", 2)


def test_parse_whitespace_insensitive():
    a = parse_polynomial("2*z1^2*conj(z2) - 0.5*|z1|^2", 2)
    b = parse_polynomial("  2 * z1 ^ 2 * conj( z2 )-0.5*|z1|^2 ", 2)
    assert a.allclose(b)


def test_levi_matrix_examples():
    z = np.random.default_rng(0).normal(size=(5, 2)) + 1j
    I = jets.levi_matrix(parse_hermitian("|z1|^2+|z2|^2-1", 2), z)
    assert np.allclose(I, np.eye(2))
    assert np.allclose(jets.levi_matrix(parse_hermitian("0.5*z1^2+0.5*conj(z1)^2", 2), z), 0)
    L = jets.levi_matrix(parse_hermitian("|z1|^4", 2), z)
    assert np.allclose(L[:, 0, 0], 4 * np.abs(z[:, 0]) ** 2)
    assert np.allclose(L[:, 0, 1], 0) and np.allclose(L[:, 1, 1], 0)


def test_levi_matrix_hermitian_everywhere():
    u = HermitianPolynomial.hermitize(random_poly(2, 4, 7, 20))
    L = jets.levi_matrix(u, np.random.default_rng(3).normal(size=(10, 2)) * (1 - 0.5j))
    assert np.allclose(L, np.conj(np.swapaxes(L, 1, 2)), atol=1e-12)


def test_dc_form_examples():
    u = parse_hermitian("|z1|^2", 2)
    # d^c u = i(zbar dz - z dzbar) = -y dx + x dy per variable; at z=(1,0): dy_1
    assert np.allclose(jets.dc_form(u, np.array([1.0 + 0j, 0])), [0, 0, 2, 0])
    assert np.allclose(jets.dc_form(parse_hermitian("3", 2), np.array([0.2, 0.1j])), 0)


def test_ddc_equals_factor_times_iddbar():
    u = HermitianPolynomial.hermitize(random_poly(2, 4, 11, 20))
    z = np.random.default_rng(5).normal(size=(5, 2)) + 0.2j
    d = jets.exterior_derivative(jets.dc_polynomials(u))
    ddc = np.stack([np.stack([d[k][l](z).real for l in range(4)], -1) for k in range(4)], -2)
    assert np.allclose(ddc, jets.DDC_FACTOR * jets.ddbar_real_matrix(u, z), atol=1e-10)


def test_iddbar_is_closed():
    u = HermitianPolynomial.hermitize(random_poly(3, 5, 13, 30))
    H = jets.i_ddbar(u)
    # d of i sum u_{j kbar} dz_j ^ dzbar_k: del_l u_{j kbar} symmetric in (l, j)
    for j in range(3):
        for k in range(3):
            for l in range(3):
                assert H[j][k].d(l + 1).allclose(H[l][k].d(j + 1))
                assert H[j][k].dbar(l + 1).allclose(H[j][l].dbar(k + 1))


def test_bordered_det_examples():
    z = np.random.default_rng(0).normal(size=(6, 2)) * 0.4 + 0.1j
    u = parse_hermitian("1-|z1|^2-|z2|^2", 2)
    assert np.allclose(jets.bordered_det(u, z), 1.0)
    u1 = parse_hermitian("1-|z1|^2", 1)
    assert np.isclose(jets.bordered_det(u1, np.array([0j])), -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(0, 1000))
def test_bordered_det_homogeneity(c, seed):
    u = HermitianPolynomial.hermitize(random_poly(2, 3, seed, 12))
    z = np.random.default_rng(seed).normal(size=(4, 2)) * 0.5 + 0j
    a = jets.bordered_det(u * c, z)
    b = c**3 * jets.bordered_det(u, z)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12 * max(1, np.max(np.abs(b))))


def test_monomial_values_shape_and_values():
    z = np.array([[1 + 1j, 2.0], [0.5j, -1]])
    exps = np.array([[1, 0, 1, 0], [0, 2, 0, 1]])
    v = jets.monomial_values(z, exps)
    assert np.allclose(v[:, 0], np.abs(z[:, 0]) ** 2)
    assert np.allclose(v[:, 1], z[:, 1] ** 2 * np.conj(z[:, 1]))
