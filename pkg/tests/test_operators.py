import numpy as np
import pytest

from crlab import operators as op
from crlab import pseudohermitian as ph
from crlab.jets import parse_hermitian, parse_polynomial

from conftest import REAL_ELLIPSOID, SPHERE3, SPHERE5


def rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(A)


@pytest.fixture(scope="module")
def s3(geometry):
    return geometry.space(SPHERE3, 5, 4)


@pytest.fixture(scope="module")
def ell(geometry):
    return geometry.space(REAL_ELLIPSOID, 5, 3)


def coeffs_of(S, literal):
    return S.coefficients_of(parse_polynomial(literal, S.n))


def test_basis_jets_match_finite_differences(geometry):
    M, ns, _, _ = geometry.geo(SPHERE3, 5)
    alpha, beta, kind = op.real_spanning_set(2, 3)
    z = ns.nodes[:5]
    V, G, H = op.basis_jets(z, alpha, beta, kind)
    h = 1e-5
    x = np.concatenate([z.real, z.imag], axis=1)
    for r in range(4):
        e = np.zeros(4)
        e[r] = h
        zp = (x + e)[:, :2] + 1j * (x + e)[:, 2:]
        zm = (x - e)[:, :2] + 1j * (x - e)[:, 2:]
        Vp, Gp, _ = op.basis_jets(zp, alpha, beta, kind)
        Vm, Gm, _ = op.basis_jets(zm, alpha, beta, kind)
        assert np.max(np.abs((Vp - Vm) / (2 * h) - G[:, :, r])) < 1e-8
        assert np.max(np.abs((Gp - Gm) / (2 * h) - H[:, :, :, r])) < 1e-7


def test_space_contract(s3, geometry):
    S, _ = s3
    assert np.max(np.abs(S.gram() - np.eye(S.dim))) < 1e-8
    Pi = S.projector()
    assert np.linalg.norm(Pi @ Pi - Pi) < 1e-8 * np.linalg.norm(Pi)
    M, ns, fr, _ = geometry.geo(SPHERE3, 5)
    S1 = op.build_space(M, ns, fr, 1)
    assert S1.dim == 5
    # constant function: norm^2 = volume
    assert np.isclose(S1.gram_eigenvalues.max() >= 0, True)
    one = np.ones(len(ns))
    assert np.isclose(S.inner(one, one).real, ns.weights.sum())


def test_build_space_guards(geometry):
    M, ns, fr, _ = geometry.geo(SPHERE3, 5)
    with pytest.raises(ValueError):
        op.build_space(M, ns, fr, 0)
    small = ph.sample_nodes(M, 1)
    with pytest.raises(ValueError):
        op.build_space(M, small, ph.build_frames(M, small), 4)


def test_reeb_matrix(s3):
    S, _ = s3
    T = op.op_T(S).matrix
    iT = 1j * T
    assert np.linalg.norm(iT - iT.conj().T) < 1e-6 * np.linalg.norm(iT)
    assert np.linalg.norm(T @ coeffs_of(S, "1")) < 1e-10
    # |z1|^2 is circle invariant
    f = S.values @ coeffs_of(S, "|z1|^2")
    assert np.max(np.abs(S.Tf @ coeffs_of(S, "|z1|^2"))) < 1e-8 * np.max(np.abs(f))


def test_dbar_b_on_sphere(geometry, s3):
    S, _ = s3
    D = op.op_dbar_b(S)
    assert np.max(np.abs(D.apply(coeffs_of(S, "z1")))) < 1e-8
    n5 = np.linalg.norm(D.apply(coeffs_of(S, "conj(z1)")) * np.sqrt(S.weights)[:, None])
    S6, _ = geometry.space(SPHERE3, 6, 4)
    D6 = op.op_dbar_b(S6)
    n6 = np.linalg.norm(D6.apply(coeffs_of(S6, "conj(z1)")) * np.sqrt(S6.weights)[:, None])
    assert n5 > 0.1 and abs(n5 - n6) / n6 < 0.01
    rng = np.random.default_rng(0)
    star = op.op_dbar_b_star(S)
    for _ in range(10):
        f = rng.normal(size=S.dim) + 1j * rng.normal(size=S.dim)
        g = rng.normal(size=(len(S.weights), 1)) + 1j * rng.normal(size=(len(S.weights), 1))
        lhs = op.form_inner(S, D.apply(f), g)
        rhs = np.vdot(star(g), f)
        assert abs(lhs - rhs) < 1e-9 * max(1, abs(lhs))


def test_sublaplacian_spectrum_on_sphere(s3):
    S, _ = s3
    L = op.op_sublaplacian(S).matrix
    lam = np.linalg.eigvalsh(L)
    assert lam[0] > -1e-8
    assert np.sum(np.abs(lam) < 1e-8) == 1
    assert np.linalg.norm(L @ coeffs_of(S, "1")) < 1e-10
    # unitary symmetry: Rayleigh quotients of z1 and z2 agree
    q = [np.real(np.vdot(c, L @ c) / np.vdot(c, c)) for c in (coeffs_of(S, "z1"), coeffs_of(S, "z2"))]
    assert abs(q[0] - q[1]) < 1e-10 * abs(q[0])


def test_kohn_identity_two_resolutions(geometry):
    for res in (5, 6):
        S, _ = geometry.space(SPHERE3, res, 4)
        B = op.op_box_b(S).matrix
        D = op.op_sublaplacian(S).matrix
        T = op.op_T(S).matrix
        assert rel(B, 0.5 * (D + 1j * T)) < 1e-5
        # the other sign convention is O(1) off
        assert rel(B, 0.5 * (D - 1j * T)) > 0.1


def test_box_b_kernel_contains_cr_functions(s3):
    S, _ = s3
    B = op.op_box_b(S).matrix
    for lit in ("1", "z1", "z1*z2^2"):
        c = coeffs_of(S, lit)
        assert np.linalg.norm(B @ c) < 1e-8 * max(1, np.linalg.norm(c))


def test_hermiticity(ell, s3, geometry):
    S, inv = ell
    for M in (op.op_sublaplacian(S), op.op_box_b(S), op.op_paneitz(S, invariants=inv)):
        assert M.hermitian_defect() < 1e-6
    S3, _ = s3
    assert op.OperatorMatrix(1j * op.op_T(S3).matrix).hermitian_defect() < 1e-6
    # off the sphere iT is skew only up to quadrature error, which must shrink
    d5 = op.OperatorMatrix(1j * op.op_T(S).matrix).hermitian_defect()
    S8, _ = geometry.space(REAL_ELLIPSOID, 8, 3)
    d8 = op.OperatorMatrix(1j * op.op_T(S8).matrix).hermitian_defect()
    assert d8 < 0.1 * d5


def test_weak_and_nodal_sublaplacian_agree(s3):
    S, inv = s3
    lap = op.nodal_sublaplacian(S, inv)
    weak = S.values.T @ (S.weights[:, None] * lap)
    D = op.op_sublaplacian(S).matrix
    # equal after integration by parts, which the quadrature does only approximately
    assert rel(D, weak) < 1e-6


def test_op_L_contract(s3):
    S, inv = s3
    L = op.op_L(S, invariants=inv)
    rng = np.random.default_rng(1)
    lap = op.nodal_sublaplacian(S, inv)
    th, hol, anti = L.apply(coeffs_of(S, "1"))
    assert max(np.max(np.abs(th)), np.max(np.abs(hol)), np.max(np.abs(anti))) < 1e-10
    for _ in range(10):
        f = rng.normal(size=S.dim)
        th, hol, anti = L.apply(f)
        assert np.max(np.abs(th - lap @ f)) < 1e-9 * np.max(np.abs(th))
        # d_b^c f has no theta component, so it is orthogonal to (Delta_b f) theta
        assert np.allclose(hol, np.conj(anti))


def test_op_L_dimension_guard(geometry):
    S, inv = geometry.space(SPHERE5, 3, 1, n=3, curvature=False)
    with pytest.raises(op.DimensionUnsupported):
        op.op_L(S, invariants=inv)
    with pytest.raises(op.DimensionUnsupported):
        op.op_paneitz(S, invariants=inv)


def test_paneitz_on_sphere(s3):
    S, inv = s3
    P = op.op_paneitz(S, invariants=inv).matrix
    assert np.linalg.norm(P @ coeffs_of(S, "1")) < 1e-9
    assert rel(P, op.op_paneitz(S, invariants=inv, torsion=False).matrix) < 1e-8
    B = op.op_box_b(S).matrix
    assert rel(P, 4 * B @ np.conj(B)) < 1e-5
    assert rel(P, op.op_paneitz_composite(S).matrix) < 1e-5
    rng = np.random.default_rng(2)
    f = rng.normal(size=S.dim)
    assert np.linalg.norm((P @ f).imag) < 1e-9 * np.linalg.norm(f)


def test_paneitz_spectral_multiplicativity(s3):
    S, inv = s3
    P = op.op_paneitz(S, invariants=inv).matrix
    B = op.op_box_b(S).matrix
    Bb = np.conj(B)
    # B and Bbar commute on S^3; diagonalize a generic combination
    H = B + np.pi * Bb
    _, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    for k in range(V.shape[1]):
        v = V[:, k]
        lb = np.real(np.vdot(v, B @ v))
        lbb = np.real(np.vdot(v, Bb @ v))
        lp = np.real(np.vdot(v, P @ v))
        assert abs(lp - 4 * lb * lbb) <= 1e-4 * max(abs(lp), 1.0)


def test_paneitz_torsion_term_matters_off_sphere(geometry):
    S, inv = geometry.space(REAL_ELLIPSOID, 5, 3)
    P = op.op_paneitz(S, invariants=inv).matrix
    P0 = op.op_paneitz(S, invariants=inv, torsion=False).matrix
    assert rel(P, P0) > 1e-3
    f = np.random.default_rng(3).normal(size=S.dim)
    assert np.linalg.norm((P @ f).imag) < 1e-9 * np.linalg.norm(f)


def test_factored_paneitz_on_sphere(s3):
    S, inv = s3
    P = op.op_paneitz(S, invariants=inv).matrix
    F = op.op_paneitz_factored(S)
    assert rel(P, F.matrix) < 1e-4
    assert np.linalg.norm(F.matrix @ coeffs_of(S, "1")) < 1e-9
    # the T-contraction of d(L f) has no theta component
    g = op.dL_contract_nodes(S)
    assert np.max(np.abs(g[:, :, 0])) < 1e-8 * np.max(np.abs(g))


def test_q_curvature(s3):
    S, inv = s3
    assert np.max(np.abs(op.q_curvature(S, invariants=inv))) < 1e-5


def test_q_curvature_nonzero_off_sphere(ell):
    S, inv = ell
    assert np.max(np.abs(op.q_curvature(S, invariants=inv))) > 1e-3


def test_matrix_export_roundtrip(tmp_path, s3):
    S, inv = s3
    P = op.op_paneitz(S, invariants=inv)
    path = op.export_matrix(P, tmp_path / "p.bin", {"operator": "paneitz"})
    A = op.load_matrix(path)
    assert np.array_equal(A, P.matrix)
    raw = np.fromfile(path, dtype="<f8").reshape(P.shape + (2,))
    assert np.array_equal(raw[..., 0] + 1j * raw[..., 1], P.matrix)
    assert "operator" in (tmp_path / "p.bin.meta").read_text()


def test_nodal_csv(tmp_path, s3):
    S, inv = s3
    q = op.q_curvature(S, invariants=inv)
    p = op.export_nodal_csv(tmp_path / "q.csv", S.nodes, q, name="Q")
    lines = p.read_text().splitlines()
    assert lines[0].endswith("weight,Q") and len(lines) == len(q) + 1
