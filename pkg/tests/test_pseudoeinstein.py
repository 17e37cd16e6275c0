import numpy as np
import pytest

from crlab import jets
from crlab import pseudoeinstein as pe
from crlab.operators import DimensionUnsupported

from conftest import SPHERE3, SPHERE5

U_STAR = "|z1|^2*z2+|z1|^2*conj(z2)+0.5*|z3|^2+0.3*z1*conj(z3)+0.3*z3*conj(z1)"


@pytest.fixture(scope="module")
def s5(geometry):
    return geometry.space(SPHERE5, 3, 3, n=3, curvature=False)


def test_decompose_contact_form(s5):
    S, _ = s5
    fr = S.frames
    f = pe.decompose_one_form(fr.theta, fr)
    assert np.max(np.abs(f.theta - 1)) < 1e-12
    assert np.max(np.abs(f.hol)) < 1e-12 and np.max(np.abs(f.antihol)) < 1e-12


def test_decompose_reconstructs_tangential_part(s5):
    S, _ = s5
    fr = S.frames
    sig = pe.CovectorField.dbar_of(jets.parse_hermitian(U_STAR, 3), 1j)
    field = pe.decompose_one_form(sig, fr)
    assert pe.reconstruction_residual(sig.evaluate(fr.nodes.nodes), field) < 1e-12
    # dbar f has no (1,0) part along H
    assert np.max(np.abs(field.hol)) < 1e-12


def test_closedness(s5):
    S, _ = s5
    fr = S.frames
    good = pe.decompose_one_form(pe.CovectorField.dbar_of(jets.parse_hermitian(U_STAR, 3), 1j), fr)
    assert pe.dbar_b_closedness(good.part("01")) < 1e-6
    z = jets.ComplexPolynomial(3)
    bad = pe.CovectorField(3, [z] * 3, [jets.parse_polynomial("conj(z2)", 3), z, z])
    assert pe.dbar_b_closedness(pe.decompose_one_form(bad, fr).part("01")) > 1e-3


def test_solve_zero_and_unsolvable(s5):
    S, _ = s5
    fr = S.frames
    zero = pe.decompose_one_form(np.zeros_like(fr.theta), fr)
    sol = pe.dbar_b_solve(zero, S)
    assert np.max(np.abs(sol.coeffs)) == 0
    assert sol.kernel.shape[1] == 20  # CR functions of degree <= 3 in three variables
    z = jets.ComplexPolynomial(3)
    bad = pe.CovectorField(3, [z] * 3, [jets.parse_polynomial("conj(z2)", 3), z, z])
    with pytest.raises(pe.ResidualAboveTolerance):
        pe.dbar_b_solve(pe.decompose_one_form(bad, fr).part("01"), S)


def test_assemble_potential():
    u = pe.assemble_potential(np.array([1 + 2j, -0.5j, 3.0]))
    assert np.array_equal(u, np.array([1, 0, 3], dtype=complex))


def test_pe_residual_examples(s5):
    S, inv = s5
    c = S.coefficients_of(jets.parse_hermitian(U_STAR, 3))
    ric = pe.manufactured_ricci(S, inv, c)
    assert ric.hermitian_defect() < 1e-12
    assert float(pe.pe_residual(c, ric, S, inv)) < 1e-12
    zero = pe.RicciFormData(np.zeros_like(ric.r))
    assert pe.pe_residual(np.zeros_like(c), zero, S, inv).full == 0.0
    assert float(pe.pe_residual(np.zeros_like(c), ric, S, inv)) == pytest.approx(1.0)
    assert float(pe.pe_residual(c, ric, S, inv, factor=2.0)) == pytest.approx(0.5)


@pytest.mark.parametrize("factor", [False, True])
def test_manufactured_pipeline(s5, factor):
    S, inv = s5
    rep = pe.manufactured_pipeline(S, inv, jets.parse_hermitian(U_STAR, 3), factor_n_plus_1=factor)
    assert rep.closedness < 1e-6
    assert rep.solve_residual < 1e-10
    assert rep.recovery_error < 1e-8
    assert rep.pe_residual < 1e-8
    assert rep.kernel_dim == 20
    assert rep.kernel_orthogonality < 1e-10
    assert "pe_residual" in rep.to_json()


def test_dimension_guard(geometry):
    S, inv = geometry.space(SPHERE3, 3, 2)
    with pytest.raises(DimensionUnsupported):
        pe.manufactured_pipeline(S, inv, jets.parse_hermitian("|z1|^2", 2))
    with pytest.raises(DimensionUnsupported):
        pe.pe_residual(np.zeros(S.dim), pe.RicciFormData(np.zeros((len(S.weights), 1, 1))), S, inv)
