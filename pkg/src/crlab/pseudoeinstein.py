"""Boundary Poincare-Lelong pipeline: decompose a 1-form, solve
i dbar_b f = sigma^(0,1) by least squares, take u = Re f and compare
i d_b dbar_b u against the prescribed (1,1)-form.

Forms on H are stored by frame components in the unitary gauge h = I:
a (1,1)-form is ``i r_{a bbar} theta^a ^ theta^bbar`` and is kept as the
matrix ``r`` at each node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .jets import ComplexPolynomial
from .operators import DimensionUnsupported, DiscreteFunctionSpace, covariant_jets
from .pseudohermitian import FrameField, PseudoHermitianInvariants, _pivots, _to_x, chunked

import jax
import jax.numpy as jnp


class ResidualAboveTolerance(RuntimeError):
    pass


# -- covector fields -----------------------------------------------------------


class CovectorField:
    """Ambient complex 1-form sum_j a_j dz_j + b_j dzbar_j with polynomial coefficients."""

    def __init__(self, n: int, dz: Sequence[ComplexPolynomial], dzbar: Sequence[ComplexPolynomial]):
        self.n = n
        self.dz = list(dz)
        self.dzbar = list(dzbar)
        self._jdz = [p.to_jax() for p in self.dz]
        self._jdzb = [p.to_jax() for p in self.dzbar]

    @classmethod
    def dbar_of(cls, f: ComplexPolynomial, scale: complex = 1.0) -> "CovectorField":
        """scale * dbar f."""
        n = f.n
        zero = ComplexPolynomial(n)
        return cls(n, [zero] * n, [f.dbar(j + 1) * scale for j in range(n)])

    @classmethod
    def d_of(cls, f: ComplexPolynomial, scale: complex = 1.0) -> "CovectorField":
        n = f.n
        zero = ComplexPolynomial(n)
        return cls(n, [f.d(j + 1) * scale for j in range(n)], [zero] * n)

    def real_coords(self, x):
        """Real-coordinate covector (2n,) at x: dz_j = dx_j + i dy_j."""
        a = jnp.stack([p(x) for p in self._jdz])
        b = jnp.stack([p(x) for p in self._jdzb])
        return jnp.concatenate([a + b, 1j * (a - b)])

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        a = np.stack([p(z) for p in self.dz], axis=-1)
        b = np.stack([p(z) for p in self.dzbar], axis=-1)
        return np.concatenate([a + b, 1j * (a - b)], axis=-1)


@dataclass
class OneFormField:
    """Frame components of a 1-form on M: lambda theta + sigma_a theta^a + sigma_abar theta^abar.

    ``source`` (optional) is a JAX map (x, perm) -> ambient covector used for
    exterior derivatives.
    """

    frames: FrameField
    theta: np.ndarray  # (N,)
    hol: np.ndarray  # (N, m)
    antihol: np.ndarray  # (N, m)
    source: Optional[Callable] = None

    def covector(self) -> np.ndarray:
        """Ambient covector reassembled from the coframe (vanishes on the normal)."""
        fr = self.frames
        co = fr.coframe
        return (
            self.theta[:, None] * fr.theta
            + np.einsum("na,nax->nx", self.hol, co)
            + np.einsum("na,nax->nx", self.antihol, np.conj(co))
        )

    def part(self, which: str) -> "OneFormField":
        """Single component type as its own field ('theta', '10', '01')."""
        z = np.zeros_like
        th = self.theta if which == "theta" else z(self.theta)
        ho = self.hol if which == "10" else z(self.hol)
        ah = self.antihol if which == "01" else z(self.antihol)
        src = _part_source(self.frames, self.source, which) if self.source is not None else None
        return OneFormField(self.frames, th, ho, ah, src)

    def norm(self) -> float:
        w = self.frames.nodes.weights
        s = np.abs(self.theta) ** 2 + np.sum(np.abs(self.hol) ** 2 + np.abs(self.antihol) ** 2, axis=1)
        return float(np.sqrt(np.sum(w * s)))


def _part_source(frames: FrameField, source, which):
    eng = frames.M.engine

    def fn(x, perm):
        fr = eng.frame_fn(x, perm)
        sig = source(x, perm)
        if which == "theta":
            return jnp.dot(sig, fr["T"].astype(complex)) * fr["theta"]
        if which == "10":
            c = fr["Z"] @ sig
            return c @ fr["coframe"]
        c = jnp.conj(fr["Z"]) @ sig
        return c @ jnp.conj(fr["coframe"])

    return fn


def decompose_one_form(sigma, frames: FrameField) -> OneFormField:
    """Components of sigma by pairing with (T, Z_a, Zbar_a).

    ``sigma`` is a CovectorField, a JAX map (x, perm) -> covector, or an
    array (N, 2n) of nodal covectors.
    """
    source = None
    if isinstance(sigma, CovectorField):
        cf = sigma
        source = lambda x, perm: cf.real_coords(x)  # noqa: E731
        vals = cf.evaluate(frames.nodes.nodes)
    elif callable(sigma):
        source = sigma
        z = frames.nodes.nodes
        vals = chunked(jax.jit(jax.vmap(sigma)))(_to_x(z), _pivots(frames.M, z))
    else:
        vals = np.asarray(sigma, dtype=complex)
    lam = np.einsum("nx,nx->n", vals, frames.T)
    hol = np.einsum("nx,nax->na", vals, frames.Z)
    anti = np.einsum("nx,nax->na", vals, np.conj(frames.Z))
    return OneFormField(frames, lam, hol, anti, source)


def reconstruction_residual(sigma_nodes: np.ndarray, field: OneFormField) -> float:
    """Max over nodes of |sigma - reassembled| on tangent vectors (normal part removed)."""
    fr = field.frames
    N = fr.normal / np.sum(fr.normal**2, axis=1, keepdims=True)
    # the coframe annihilates the normal vector grad u / |grad u|^2; drop that part of sigma
    sn = np.einsum("nx,nx->n", sigma_nodes, N)
    gn = fr.normal
    tangential = sigma_nodes - sn[:, None] * gn
    return float(np.max(np.abs(tangential - field.covector())))


# -- dbar_b on (0,1)-forms ----------------------------------------------------------------


def _require_n3(frames):
    if frames.n < 3:
        raise DimensionUnsupported("needs n >= 3 (no (0,2)-forms on H for n = 2)")


def dbar_b_components(field: OneFormField) -> np.ndarray:
    """(dsigma)(Zbar_a, Zbar_b), a < b, at nodes: shape (N, m(m-1)/2)."""
    fr = field.frames
    if field.source is None:
        raise ValueError("field has no ambient source to differentiate")
    src01 = _part_source(fr, field.source, "01")
    eng = fr.M.engine
    m = fr.n - 1

    def comp(x, perm):
        D = jax.jacfwd(lambda y: src01(y, perm), holomorphic=False)(x)  # (b, a) = d_a s_b
        ds = D.T - D
        Zb = jnp.conj(eng.frame_fn(x, perm)["Z"])
        out = [Zb[a] @ ds @ Zb[b] for a in range(m) for b in range(a + 1, m)]
        return jnp.stack(out)

    z = fr.nodes.nodes
    return chunked(jax.jit(jax.vmap(comp)))(_to_x(z), _pivots(fr.M, z))


def dbar_b_closedness(sigma01: OneFormField, frames: FrameField = None, space=None) -> float:
    """Relative discrete (0,2)-norm of dbar_b sigma^(0,1): ||dbar_b s|| / ||s||."""
    fr = sigma01.frames if frames is None else frames
    _require_n3(fr)
    s01 = sigma01.part("01")
    c = dbar_b_components(s01)
    w = fr.nodes.weights
    num = np.sqrt(np.sum(w[:, None] * np.abs(c) ** 2))
    den = s01.norm()
    if den == 0:
        return 0.0
    return float(num / den)


# -- solve -------------------------------------------------------------------------


@dataclass
class DbarSolution:
    coeffs: np.ndarray  # complex coefficients of f
    residual: float  # relative ||i dbar_b f - sigma|| / ||sigma||
    kernel: np.ndarray  # (K, k) orthonormal coefficient vectors spanning ker dbar_b
    singular_values: np.ndarray


def dbar_b_solve(
    sigma01: OneFormField,
    space: DiscreteFunctionSpace,
    frames: FrameField = None,
    tol: float = 1e-6,
    kernel_tol: float = 1e-8,
) -> DbarSolution:
    """Minimum-norm least squares for i dbar_b f = sigma^(0,1) over the space.

    Directions with singular value below ``kernel_tol * s_max`` are treated as
    the kernel (constants and CR functions); the solution is orthogonal to them.
    """
    w = np.sqrt(space.weights)
    m = space.n - 1
    A = 1j * space.Zbf * w[:, None, None]  # (N, m, K)
    A = A.reshape(-1, space.dim)
    b = (sigma01.antihol * w[:, None]).reshape(-1)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    keep = s > kernel_tol * s[0]
    coeffs = Vh[keep].conj().T @ ((U[:, keep].conj().T @ b) / s[keep])
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(A @ coeffs - b) / nb) if nb > 0 else 0.0
    kernel = Vh[~keep].conj().T
    if res > tol:
        raise ResidualAboveTolerance(f"attained relative residual {res:.3e} exceeds {tol:.1e}")
    return DbarSolution(coeffs, res, kernel, s)


def assemble_potential(f_coeffs) -> np.ndarray:
    """u = (f + conj f) / 2; the basis is real so this is the real part of the coefficients."""
    return np.real(np.asarray(f_coeffs)).astype(complex)


# -- (1,1)-forms -------------------------------------------------------------------------


@dataclass
class RicciFormData:
    """r_{a bbar} per node for the form i r_{a bbar} theta^a ^ theta^bbar."""

    r: np.ndarray  # (N, m, m)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.r - np.conj(np.swapaxes(self.r, 1, 2)))))


def i_ddbar_b(space: DiscreteFunctionSpace, invariants: PseudoHermitianInvariants, coeffs) -> np.ndarray:
    """Nodal r for i d_b dbar_b u: the Hermitian part (u_{a bbar} + u_{bbar a}) / 2."""
    cj = covariant_jets(space, invariants)
    c = np.asarray(coeffs)
    ab = np.einsum("nabk,k->nab", cj.f_abbar, c)  # u_{a bbar}
    ba = np.einsum("nbak,k->nab", cj.f_abarb, c)  # u_{bbar a} indexed [a, b]
    return 0.5 * (ab + ba)


def manufactured_ricci(space, invariants, u_star_coeffs) -> RicciFormData:
    return RicciFormData(i_ddbar_b(space, invariants, u_star_coeffs))


def _trace_free(r: np.ndarray) -> np.ndarray:
    m = r.shape[-1]
    tr = np.einsum("naa->n", r)
    return r - tr[:, None, None] * np.eye(m)[None] / m


@dataclass
class PEResidual:
    trace_free: float
    full: float

    def __float__(self):
        return self.trace_free


def pe_residual(u_coeffs, ric: RicciFormData, space: DiscreteFunctionSpace, invariants, factor: float = 1.0) -> PEResidual:
    """Relative L^2 mismatch of factor * i d_b dbar_b u against ric on H.

    The primary number compares trace-free parts; ``full`` includes the trace.
    Relative to max(||ric||, ||factor * i d_b dbar_b u||); 0 when both vanish.
    """
    _require_n3(space.frames)
    ru = factor * i_ddbar_b(space, invariants, u_coeffs)
    w = space.weights

    def nrm(x):
        return float(np.sqrt(np.sum(w[:, None, None] * np.abs(x) ** 2)))

    out = []
    for f in (_trace_free, lambda x: x):
        d = nrm(f(ru) - f(ric.r))
        den = max(nrm(f(ric.r)), nrm(f(ru)))
        out.append(0.0 if den == 0 else d / den)
    return PEResidual(*out)


# -- pipeline -------------------------------------------------------------------------


@dataclass
class PEReport:
    closedness: float
    solve_residual: float
    recovery_error: float
    pe_residual: float
    pe_residual_full: float
    kernel_dim: int
    kernel_orthogonality: float
    reality_defect: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def manufactured_pipeline(
    space: DiscreteFunctionSpace,
    invariants: PseudoHermitianInvariants,
    u_star: ComplexPolynomial,
    factor_n_plus_1: bool = False,
    tol: float = 1e-6,
) -> PEReport:
    """Run decompose -> closedness -> solve -> Re -> residual on data built from u*.

    sigma = i dbar u* / c with c = n + 1 when the factor is enabled, so the
    recovered u satisfies c i d_b dbar_b u = i d_b dbar_b u*.
    """
    fr = space.frames
    _require_n3(fr)
    c = (space.n + 1) if factor_n_plus_1 else 1.0
    sigma = CovectorField.dbar_of(u_star, 1j / c)
    field = decompose_one_form(sigma, fr)
    s01 = field.part("01")
    closed = dbar_b_closedness(s01)
    sol = dbar_b_solve(s01, space, tol=tol)
    u = assemble_potential(sol.coeffs)
    ustar_c = space.coefficients_of(u_star) / c
    # recovery modulo span(kernel, conj kernel)
    K = np.concatenate([sol.kernel, np.conj(sol.kernel)], axis=1)
    if K.shape[1]:
        Q, _ = np.linalg.qr(K)
        proj = lambda v: v - Q @ (Q.conj().T @ v)  # noqa: E731
    else:
        proj = lambda v: v  # noqa: E731
    d = proj(u - ustar_c)
    rec = float(np.linalg.norm(d) / max(np.linalg.norm(proj(ustar_c)), 1e-300))
    ric = manufactured_ricci(space, invariants, space.coefficients_of(u_star))
    pr = pe_residual(u, ric, space, invariants, factor=c)
    korth = float(np.max(np.abs(sol.kernel.conj().T @ sol.coeffs))) if sol.kernel.size else 0.0
    return PEReport(
        closedness=closed,
        solve_residual=sol.residual,
        recovery_error=rec,
        pe_residual=pr.trace_free,
        pe_residual_full=pr.full,
        kernel_dim=int(sol.kernel.shape[1]),
        kernel_orthogonality=korth,
        reality_defect=ric.hermitian_defect(),
    )
