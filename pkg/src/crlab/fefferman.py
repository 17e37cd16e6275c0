"""Ambient Kahler data, the Fefferman functional and a Monge-Ampere solver.

Defining functions here are taken positive inside the domain, which makes the
unit ball with ``u = 1 - |z|^2`` a fixed point: ``J(u) = 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import jets
from .jets import ComplexPolynomial, HermitianPolynomial
from .pseudohermitian import Hypersurface, NodeSet, _radial_roots, sample_nodes, sphere_rule


class DegenerateMetric(ValueError):
    pass


class LinearizationSingular(RuntimeError):
    pass


class NoDescent(RuntimeError):
    pass


# -- ambient metric ---------------------------------------------------------------


def pluriharmonic_basis(n: int, degree: int) -> list[ComplexPolynomial]:
    """1, Re z^a, Im z^a for 1 <= |a| <= degree (real parts of holomorphic polynomials)."""
    out = [ComplexPolynomial.constant(n, 1.0)]
    for e in jets.all_exponents(n, degree):
        a, b = e[:n], e[n:]
        if b.sum() == 0 and a.sum() > 0:
            m = ComplexPolynomial.monomial(n, a, [0] * n)
            out += [m.real_part(), m.imag_part()]
    return out


def domain_quadrature(M: Hypersurface, resolution: int):
    """Points and Euclidean weights filling the star-shaped domain bounded by M."""

    n = M.n
    w_dirs, w_sph = sphere_rule(n, resolution)
    rho = _radial_roots(M, w_dirs)
    g, w = np.polynomial.legendre.leggauss(resolution)
    s = 0.5 * (g + 1.0)
    ws = 0.5 * w
    c = np.asarray(M.center, dtype=complex)
    pts = c + (s[None, :, None] * rho[:, None, None]) * w_dirs[:, None, :]
    wt = w_sph[:, None] * ws[None, :] * (s[None, :] * rho[:, None]) ** (2 * n - 1) * rho[:, None]
    return pts.reshape(-1, n), wt.reshape(-1)


@dataclass
class AmbientMetric:
    """Kahler metric g_{i jbar} = (phi0)_{i jbar} with Ricci potential f = -log det g - h."""

    potential: HermitianPolynomial
    gauge: Optional[ComplexPolynomial] = None  # pluriharmonic h subtracted from f

    def __post_init__(self):
        n = self.potential.n
        self.n = n
        self._g = jets.i_ddbar(self.potential)
        # first and second derivatives of the metric entries
        self._gd = [[[gjk.d(a + 1) for a in range(n)] for gjk in row] for row in self._g]
        self._gdb = [[[gjk.dbar(a + 1) for a in range(n)] for gjk in row] for row in self._g]
        self._gddb = [[[[gjk.d(a + 1).dbar(b + 1) for b in range(n)] for a in range(n)] for gjk in row] for row in self._g]

    def g(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        n = self.n
        out = np.empty(z.shape[:-1] + (n, n), dtype=complex)
        for j in range(n):
            for k in range(n):
                out[..., j, k] = self._g[j][k](z)
        return out

    def check_positive(self, z, tol: float = 1e-8):
        ev = np.linalg.eigvalsh(self.g(z))
        if np.min(ev) <= tol:
            raise DegenerateMetric(f"ambient metric not positive definite (min eigenvalue {np.min(ev):.3e})")

    def log_det(self, z) -> np.ndarray:
        sign, ld = np.linalg.slogdet(self.g(z))
        if np.any(sign.real <= 0):
            raise DegenerateMetric("det g is not positive")
        return ld.real

    def f_ricci(self, z) -> np.ndarray:
        f = -self.log_det(z)
        if self.gauge is not None:
            f = f - self.gauge(z).real
        return f

    __call__ = f_ricci

    def ddbar_log_det(self, z) -> np.ndarray:
        """(log det g)_{a bbar} = tr(g^-1 g_{a bbar}) - tr(g^-1 g_a g^-1 g_bbar)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        n = self.n
        G = self.g(z)
        Gi = np.linalg.inv(G)
        P = z.shape[0]
        Ga = np.empty((P, n, n, n), complex)
        Gb = np.empty_like(Ga)
        Gab = np.empty((P, n, n, n, n), complex)
        for j in range(n):
            for k in range(n):
                for a in range(n):
                    Ga[:, a, j, k] = self._gd[j][k][a](z)
                    Gb[:, a, j, k] = self._gdb[j][k][a](z)
                    for b in range(n):
                        Gab[:, a, b, j, k] = self._gddb[j][k][a][b](z)
        t1 = np.einsum("pkj,pabjk->pab", Gi, Gab)
        t2 = np.einsum("pij,pajk,pkl,pbli->pab", Gi, Ga, Gi, Gb)
        return t1 - t2

    def ricci_form(self, z) -> np.ndarray:
        """Coefficients of the Ricci form, -(log det g)_{a bbar}."""
        return -self.ddbar_log_det(z)


def ricci_potential(
    potential: HermitianPolynomial,
    minimal_norm: bool = False,
    M: Optional[Hypersurface] = None,
    degree: int = 2,
    resolution: int = 6,
) -> AmbientMetric:
    """Ambient metric whose f_ricci solves i ddbar f = Ric.

    With ``minimal_norm`` the pluriharmonic part of degree <= ``degree`` that
    best fits f over the domain of M (least squares) is removed.
    """
    amb = AmbientMetric(HermitianPolynomial.from_poly(potential))
    if not minimal_norm:
        return amb
    if M is None:
        raise ValueError("minimal_norm needs a domain")
    pts, w = domain_quadrature(M, resolution)
    amb.check_positive(pts)
    f = amb.f_ricci(pts)
    basis = pluriharmonic_basis(M.n, degree)
    V = np.stack([b(pts).real for b in basis], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(V * sw[:, None], f * sw, rcond=None)
    h = ComplexPolynomial(M.n)
    for c, b in zip(coef, basis):
        h = h + float(c) * b
    return AmbientMetric(amb.potential, gauge=h)


def euclidean(n: int) -> AmbientMetric:
    return AmbientMetric(jets.parse_hermitian(" + ".join(f"|z{j+1}|^2" for j in range(n)), n))


# -- the functional ---------------------------------------------------------------------


def J_functional(u: ComplexPolynomial, ambient: AmbientMetric, z) -> np.ndarray:
    """(-1)^n e^{-f} det(bordered Hessian of u) / det g at points z."""
    z = np.asarray(z, dtype=complex)
    n = u.n
    det = jets.bordered_det(u, z).real
    return (-1) ** n * np.exp(-ambient.f_ricci(z) - ambient.log_det(z)) * det


def collar_points(M: Hypersurface, nodes: NodeSet, width: float) -> np.ndarray:
    """Boundary nodes pushed inward along the unit normal by {1/4, 1/2, 3/4, 1} * width."""
    z = nodes.nodes
    g = jets.real_gradient(M.u, z)
    g = g / np.linalg.norm(g, axis=1, keepdims=True)
    inward = -M.sign * g  # u negative inside -> inward is -grad u
    n = M.n
    step = inward[:, :n] + 1j * inward[:, n:]
    fr = np.array([0.25, 0.5, 0.75, 1.0]) * width
    return (z[None, :, :] + fr[:, None, None] * step[None, :, :]).reshape(-1, n)


def positive_inside(M: Hypersurface) -> HermitianPolynomial:
    return M.u if M.sign < 0 else HermitianPolynomial.from_poly(-M.u)


def ma_residual(u: ComplexPolynomial, ambient: AmbientMetric, collar, log_form: bool = False):
    """J(u) - 1 at collar points; with ``log_form`` also the log-form residual.

    The log form is log det (phi_{i jbar}) - log det g - f - (n+1) phi with
    phi = -log u (u positive inside), defined only where u > 0.
    """
    collar = np.asarray(collar, dtype=complex)
    r = J_functional(u, ambient, collar) - 1.0
    if not log_form:
        return r
    uv = u(collar).real
    n = u.n
    lf = np.full(len(collar), np.nan)
    ok = uv > 0
    if np.any(ok):
        z = collar[ok]
        B = jets.bordered_matrix(u, z)
        uu = uv[ok]
        # phi_{i jbar} = -u_{i jbar}/u + u_i u_jbar / u^2
        H = -B[:, 1:, 1:] / uu[:, None, None] + B[:, 1:, :1] * B[:, :1, 1:] / uu[:, None, None] ** 2
        sign, ld = np.linalg.slogdet(H)
        good = sign.real > 0
        vals = ld.real - ambient.log_det(z) - ambient.f_ricci(z) - (n + 1) * (-np.log(uu))
        vals[~good] = np.nan
        lf[ok] = vals
    return r, lf


# -- Gauss-Newton solver ---------------------------------------------------------


@dataclass
class _AnsatzTables:
    """Values, gradients and Levi matrices of u0 and ansatz functions at points."""

    u0: np.ndarray  # (P,)
    u0_j: np.ndarray  # (P, n)
    u0_jk: np.ndarray  # (P, n, n)
    psi: np.ndarray  # (P, K)
    psi_j: np.ndarray  # (P, K, n)
    psi_jk: np.ndarray  # (P, K, n, n)

    @classmethod
    def build(cls, u0: ComplexPolynomial, basis, z):
        n = u0.n
        u0v = u0(z)
        u0j = jets.gradient(u0, z)
        u0jk = jets.levi_matrix(u0, z)
        psi = np.stack([b(z) for b in basis], axis=1)
        psij = np.stack([jets.gradient(b, z) for b in basis], axis=1)
        psijk = np.stack([jets.levi_matrix(b, z) for b in basis], axis=1)
        return cls(u0v, u0j, u0jk, psi, psij, psijk)


def _bordered_tilde(tab: _AnsatzTables, c):
    """B(u0 e^v) = e^v Btilde with v = sum c_k psi_k; returns v, Btilde, v_j."""
    v = tab.psi @ c
    vj = np.einsum("pkj,k->pj", tab.psi_j, c)
    vjk = np.einsum("pkab,k->pab", tab.psi_jk, c)
    u0, uj, ujk = tab.u0, tab.u0_j, tab.u0_jk
    P, n = uj.shape
    B = np.empty((P, n + 1, n + 1), complex)
    B[:, 0, 0] = u0
    B[:, 0, 1:] = np.conj(uj) + u0[:, None] * np.conj(vj)  # u_{jbar} of a real function
    B[:, 1:, 0] = uj + u0[:, None] * vj
    B[:, 1:, 1:] = (
        ujk
        + uj[:, :, None] * np.conj(vj)[:, None, :]
        + np.conj(uj)[:, None, :] * vj[:, :, None]
        + u0[:, None, None] * (vj[:, :, None] * np.conj(vj)[:, None, :] + vjk)
    )
    return v, B, vj


def _residual_and_jacobian(tab: _AnsatzTables, c, scale, want_jac: bool = True):
    n = tab.u0_j.shape[1]
    v, B, vj = _bordered_tilde(tab, c)
    det = np.linalg.det(B).real
    J = (-1) ** n * scale * np.exp((n + 1) * v) * det
    r = J - 1.0
    if not want_jac:
        return r, None
    Bi = np.linalg.inv(B)
    u0, uj = tab.u0, tab.u0_j
    pj = tab.psi_j  # (P, K, n)
    dB = np.zeros((len(u0), tab.psi.shape[1], n + 1, n + 1), complex)
    dB[:, :, 0, 1:] = u0[:, None, None] * np.conj(pj)
    dB[:, :, 1:, 0] = u0[:, None, None] * pj
    dB[:, :, 1:, 1:] = (
        uj[:, None, :, None] * np.conj(pj)[:, :, None, :]
        + np.conj(uj)[:, None, None, :] * pj[:, :, :, None]
        + u0[:, None, None, None]
        * (
            pj[:, :, :, None] * np.conj(vj)[:, None, None, :]
            + vj[:, None, :, None] * np.conj(pj)[:, :, None, :]
            + tab.psi_jk
        )
    )
    tr = np.einsum("pij,pkji->pk", Bi, dB).real
    jac = J[:, None] * ((n + 1) * tab.psi + tr)
    return r, jac


@dataclass
class MASolveState:
    coeffs: np.ndarray
    basis: list
    u0: HermitianPolynomial
    collar: np.ndarray
    history: list = field(default_factory=list)  # max |J - 1| per iteration (index 0: initial)
    step_norms: list = field(default_factory=list)
    boundary_max_u: list = field(default_factory=list)
    status: str = ""

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    @property
    def final_residual(self) -> float:
        return self.history[-1]

    def u_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        v = sum(c * b(z).real for c, b in zip(self.coeffs, self.basis))
        return self.u0(z).real * np.exp(v)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "max_residual", "step_norm"])
            for k, r in enumerate(self.history):
                w.writerow([k, repr(float(r)), repr(float(self.step_norms[k - 1])) if k else "0.0"])
        return path


def ansatz_basis(n: int, degree: int) -> list[HermitianPolynomial]:
    return jets.hermitian_monomials(n, degree)


def ma_solve(
    M: Hypersurface,
    ambient: AmbientMetric,
    ansatz_degree: int = 2,
    collar_width: float = 0.05,
    max_iter: int = 30,
    damping: float = 0.5,
    resolution: int = 4,
    u0: Optional[ComplexPolynomial] = None,
    tol: float = 1e-10,
    initial_exponent: Optional[ComplexPolynomial] = None,
) -> MASolveState:
    """Gauss-Newton on u_c = u0 exp(sum c_k psi_k) driving J(u_c) -> 1 on a collar.

    ``damping`` is the backtracking factor applied to rejected steps.  An
    ``initial_exponent`` v starts the iteration from u0 exp(v); v must lie
    in the span of the ansatz functions.
    """
    if u0 is None:
        u0 = positive_inside(M)
    nodes = sample_nodes(M, resolution)
    collar = collar_points(M, nodes, collar_width)
    ambient.check_positive(collar)
    scale = np.exp(-ambient.f_ricci(collar) - ambient.log_det(collar))
    basis = ansatz_basis(M.n, ansatz_degree)
    tab = _AnsatzTables.build(u0, basis, collar)
    bnd = _AnsatzTables.build(u0, basis, nodes.nodes)
    c = np.zeros(len(basis))
    if initial_exponent is not None:
        c, res, *_ = np.linalg.lstsq(tab.psi.real, initial_exponent(collar).real, rcond=None)
        if np.max(np.abs(tab.psi.real @ c - initial_exponent(collar).real)) > 1e-10:
            raise ValueError("initial exponent is not in the span of the ansatz")
    r, jac = _residual_and_jacobian(tab, c, scale)
    state = MASolveState(c, basis, HermitianPolynomial.from_poly(u0), collar)
    state.history.append(float(np.max(np.abs(r))))
    state.boundary_max_u.append(float(np.max(np.abs(bnd.u0 * np.exp(bnd.psi @ c)))))
    if not (0 < damping < 1):
        raise ValueError("damping must lie in (0, 1)")
    for it in range(max_iter):
        if state.history[-1] < tol:
            state.status = "converged"
            break
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[0] == 0 or not np.all(np.isfinite(sv)):
            raise LinearizationSingular("Jacobian vanishes or is not finite")
        step, *_ = np.linalg.lstsq(jac, -r, rcond=1e-12)
        t = 1.0
        cur = state.history[-1]
        for _ in range(40):
            trial = c + t * step
            r_new, _ = _residual_and_jacobian(tab, trial, scale, want_jac=False)
            if np.all(np.isfinite(r_new)) and np.max(np.abs(r_new)) < cur:
                break
            t *= damping
        else:
            if cur < 1e3 * tol:
                state.status = "stalled"
                break
            raise NoDescent(f"no decrease of the max residual after damping (iteration {it})")
        c = trial
        r, jac = _residual_and_jacobian(tab, c, scale)
        state.coeffs = c
        state.history.append(float(np.max(np.abs(r))))
        state.step_norms.append(float(t * np.linalg.norm(step)))
        state.boundary_max_u.append(float(np.max(np.abs(bnd.u0 * np.exp(bnd.psi @ c)))))
        if state.history[-2] - state.history[-1] < 1e-14 * max(state.history[-2], 1e-300):
            state.status = "stalled"
            break
    else:
        state.status = "max_iter"
    if not state.status:
        state.status = "converged"
    return state


def residual_jacobian(M: Hypersurface, ambient: AmbientMetric, coeffs, ansatz_degree: int, collar) -> tuple:
    """Residual vector and analytic Jacobian at coefficient vector ``coeffs`` (for checks)."""
    u0 = positive_inside(M)
    basis = ansatz_basis(M.n, ansatz_degree)
    tab = _AnsatzTables.build(u0, basis, np.asarray(collar))
    scale = np.exp(-ambient.f_ricci(collar) - ambient.log_det(collar))
    return _residual_and_jacobian(tab, np.asarray(coeffs, float), scale)
