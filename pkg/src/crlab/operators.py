"""Galerkin discretization of the CR operators on M.

Functions are expanded in an orthonormal basis of real-valued restricted
polynomials.  Operator matrices hold ``<Op e_l, e_k>`` computed by
quadrature from nodewise-exact derivatives; first- and second-order
operators use the weak (integrated by parts) form so every matrix is the
Galerkin projection of the continuous operator.

Since the basis is real, a real function has a real coefficient vector and
the conjugate operator Op-bar has matrix ``conj(Op)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from . import jets
from .jets import ComplexPolynomial
from .pseudohermitian import (
    FrameField,
    Hypersurface,
    NodeSet,
    PseudoHermitianInvariants,
    _pivots,
    _to_x,
    chunked,
)

import jax
import jax.numpy as jnp


class RankCollapse(RuntimeError):
    pass


class DimensionUnsupported(ValueError):
    pass


# -- real polynomial spanning set ------------------------------------------------


def real_spanning_set(n: int, degree: int):
    """Exponent pairs and kinds for z^a zbar^a, Re and Im of z^a zbar^b (a < b).

    Returns ``(alpha, beta, kind)`` with kind 0 = real part, 1 = imaginary part.
    """
    exps = [tuple(e) for e in jets.all_exponents(n, degree)]
    alpha, beta, kind = [], [], []
    seen = set()
    for e in exps:
        a, b = e[:n], e[n:]
        if (a, b) in seen or (b, a) in seen:
            continue
        seen.add((a, b))
        if a == b:
            alpha.append(a), beta.append(b), kind.append(0)
        else:
            lo, hi = (a, b) if a < b else (b, a)
            alpha += [lo, lo]
            beta += [hi, hi]
            kind += [0, 1]
    return np.array(alpha, dtype=int), np.array(beta, dtype=int), np.array(kind, dtype=int)


def make_basis_fn(n: int, alpha, beta, kind):
    """JAX function x -> real values of the spanning set at x in R^{2n}."""
    alpha = jnp.asarray(alpha)
    beta = jnp.asarray(beta)
    is_im = jnp.asarray(kind == 1)
    dmax = int(max(np.max(alpha, initial=0), np.max(beta, initial=0)))
    idx = jnp.arange(n)

    def fn(x):
        z = x[:n] + 1j * x[n:]
        zp = jnp.stack([z**k for k in range(dmax + 1)], axis=1)  # (n, d+1)
        zb = jnp.conj(zp)
        vals = jnp.prod(zp[idx, alpha] * zb[idx, beta], axis=1)
        return jnp.where(is_im, jnp.imag(vals), jnp.real(vals))

    return fn


def _wirtinger_to_real(n: int) -> np.ndarray:
    """W with d/dreal_r = sum_v W[r, v] d/dw_v, w = (z, zbar)."""
    I = np.eye(n)
    return np.block([[I, I], [1j * I, -1j * I]])


def basis_jets(z, alpha, beta, kind, C=None, chunk: int = 1024):
    """Values, real gradients and real Hessians of Re/Im z^alpha zbar^beta at points.

    Exact exponent arithmetic; with ``C`` the result is transformed to the
    basis e_k = sum_j C[j, k] s_j.  Shapes (N, K), (N, K, 2n), (N, K, 2n, 2n).
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[1]
    E = np.concatenate([alpha, beta], axis=1)
    nm = len(E)
    W = _wirtinger_to_real(n)
    im = kind == 1
    eye = np.eye(2 * n, dtype=int)
    # first- and second-derivative exponent tables
    c1 = E.astype(float)  # (nm, 2n)
    e1 = np.maximum(E[:, None, :] - eye[None], 0)  # (nm, 2n, 2n)
    c2 = E[:, :, None] * (E[:, None, :] - eye[None])  # (nm, 2n, 2n)
    e2 = np.maximum(E[:, None, None, :] - eye[None, :, None, :] - eye[None, None, :, :], 0)
    K = nm if C is None else C.shape[1]
    N = len(z)
    vals = np.empty((N, K))
    grad = np.empty((N, K, 2 * n))
    hess = np.empty((N, K, 2 * n, 2 * n))

    def part(x):
        mask = im.reshape((1, nm) + (1,) * (x.ndim - 2))
        return np.where(mask, x.imag, x.real)

    for s in range(0, N, chunk):
        zc = z[s : s + chunk]
        v = jets.monomial_values(zc, E)  # (P, nm)
        d1 = jets.monomial_values(zc, e1.reshape(-1, 2 * n)).reshape(len(zc), nm, 2 * n) * c1[None]
        d2 = jets.monomial_values(zc, e2.reshape(-1, 2 * n)).reshape(len(zc), nm, 2 * n, 2 * n) * c2[None]
        g = np.einsum("rv,pmv->pmr", W, d1)
        h = np.einsum("rv,pmvw,sw->pmrs", W, d2, W)
        v, g, h = part(v), part(g), part(h)
        if C is not None:
            v = v @ C
            g = np.einsum("pmr,mk->pkr", g, C)
            h = np.einsum("pmrs,mk->pkrs", h, C)
        vals[s : s + chunk], grad[s : s + chunk], hess[s : s + chunk] = v, g, h
    return vals, grad, hess


def spanning_polynomials(n: int, alpha, beta, kind) -> list[ComplexPolynomial]:
    out = []
    for a, b, k in zip(alpha, beta, kind):
        p = ComplexPolynomial.monomial(n, a, b)
        out.append(p.real_part() if k == 0 else p.imag_part())
    return out


# -- function space -------------------------------------------------------------------


@dataclass
class DiscreteFunctionSpace:
    """Orthonormal real basis e_k = sum_j C[j, k] s_j of restricted polynomials."""

    M: Hypersurface
    nodes: NodeSet
    frames: FrameField
    degree: int
    C: np.ndarray  # (spanning, K) real
    spanning: tuple  # (alpha, beta, kind)
    gram_eigenvalues: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    @property
    def n(self) -> int:
        return self.M.n

    @property
    def weights(self) -> np.ndarray:
        return self.nodes.weights

    @cached_property
    def basis_fn(self):
        """JAX map x -> (K,) orthonormal basis values."""
        raw = make_basis_fn(self.n, *self.spanning)
        C = jnp.asarray(self.C)
        return lambda x: raw(x) @ C

    @cached_property
    def _jets(self):
        alpha, beta, kind = self.spanning
        return basis_jets(self.nodes.nodes, alpha, beta, kind, self.C)

    @property
    def values(self) -> np.ndarray:
        return self._jets[0]

    @property
    def grad(self) -> np.ndarray:
        return self._jets[1]

    @property
    def hess(self) -> np.ndarray:
        return self._jets[2]

    def gram(self) -> np.ndarray:
        V = self.values
        return V.T @ (self.weights[:, None] * V)

    def inner(self, f_nodes, g_nodes) -> complex:
        """Quadrature L^2 product sum w f conj(g)."""
        return np.sum(self.weights * f_nodes * np.conj(g_nodes))

    def project(self, f_nodes) -> np.ndarray:
        """Coefficients of the L^2 projection of nodal values."""
        return self.values.T @ (self.weights * np.asarray(f_nodes))

    def evaluate(self, coeffs) -> np.ndarray:
        return self.values @ np.asarray(coeffs)

    def coefficients_of(self, p: ComplexPolynomial) -> np.ndarray:
        return self.project(p(self.nodes.nodes))

    def projector(self) -> np.ndarray:
        """Nodal projection matrix onto the space (N x N)."""
        V = self.values
        return V @ (V.T * self.weights[None, :])

    # first derivatives along frame fields, (N, m, K) or (N, K)
    @cached_property
    def Zf(self) -> np.ndarray:
        return np.einsum("nax,nkx->nak", self.frames.Z, self.grad)

    @cached_property
    def Zbf(self) -> np.ndarray:
        return np.einsum("nax,nkx->nak", np.conj(self.frames.Z), self.grad)

    @cached_property
    def Tf(self) -> np.ndarray:
        return np.einsum("nx,nkx->nk", self.frames.T, self.grad)

    def second(self, V, W, dW) -> np.ndarray:
        """V(W f) for all basis f: V, W (N, 2n) complex, dW (N, 2n, 2n) [comp, dir]."""
        t1 = np.einsum("nx,nkxy,ny->nk", V, self.hess, W)
        dWV = np.einsum("nby,ny->nb", dW, V)
        t2 = np.einsum("nb,nkb->nk", dWV, self.grad)
        return t1 + t2


def build_space(M: Hypersurface, nodes: NodeSet, frames: FrameField, degree: int) -> DiscreteFunctionSpace:
    if degree < 1:
        raise ValueError("degree must be >= 1")
    alpha, beta, kind = real_spanning_set(M.n, degree)
    V = basis_jets(nodes.nodes, alpha, beta, kind)[0]
    if len(nodes) < 4 * len(alpha):
        raise ValueError(f"need at least {4 * len(alpha)} nodes for degree {degree} (got {len(nodes)})")
    G = V.T @ (nodes.weights[:, None] * V)
    s, U = np.linalg.eigh(G)
    keep = s > 1e-10 * max(s[-1], 1e-300)
    if not np.any(keep):
        raise RankCollapse("no basis directions survive")
    s, U = s[keep][::-1], U[:, keep][:, ::-1]
    # deterministic sign: largest component positive
    piv = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[piv, np.arange(U.shape[1])])[None, :]
    C = U / np.sqrt(s)[None, :]
    return DiscreteFunctionSpace(M, nodes, frames, degree, C, (alpha, beta, kind), s)


# -- operator matrices ---------------------------------------------------------------


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    symmetry: str = "none"  # "hermitian" | "none"
    source: str = ""

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.matrix @ other.matrix, "none", f"{self.source}*{other.source}")
        return self.matrix @ other

    @property
    def shape(self):
        return self.matrix.shape

    def hermitian_defect(self) -> float:
        A = self.matrix
        return float(np.linalg.norm(A - A.conj().T) / max(np.linalg.norm(A), 1e-300))

    def apply(self, coeffs) -> np.ndarray:
        return self.matrix @ np.asarray(coeffs)


def _gram_of(space, F, G=None) -> np.ndarray:
    """sum_w F[:, l] conj(G[:, k]) as a (K, K) matrix [k, l]; F, G (N, K) or (N, m, K)."""
    G = F if G is None else G
    w = space.weights
    if F.ndim == 2:
        return np.einsum("n,nk,nl->kl", w, np.conj(G), F)
    return np.einsum("n,nak,nal->kl", w, np.conj(G), F)


def op_T(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> OperatorMatrix:
    M = np.einsum("n,nk,nl->kl", space.weights, space.values, space.Tf)
    return OperatorMatrix(M, "none", "T")


@dataclass(frozen=True)
class FormOperator:
    """Map from coefficients to nodal components of a form: (N, m, K)."""

    nodal: np.ndarray
    space: DiscreteFunctionSpace
    source: str = ""

    def apply(self, coeffs) -> np.ndarray:
        return np.einsum("nak,k->na", self.nodal, np.asarray(coeffs))

    def adjoint_apply(self, form) -> np.ndarray:
        """Quadrature adjoint: coefficients k -> sum_w sum_a form conj(op e_k)."""
        return np.einsum("n,nak,na->k", self.space.weights, np.conj(self.nodal), np.asarray(form))

    def normal(self) -> np.ndarray:
        return _gram_of(self.space, self.nodal)


def form_inner(space, s1, s2) -> complex:
    return np.sum(space.weights[:, None] * s1 * np.conj(s2))


def op_dbar_b(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> FormOperator:
    """dbar_b f = sum (Zbar_a f) theta^abar, nodal components."""
    return FormOperator(space.Zbf, space, "dbar_b")


def op_d_b(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> FormOperator:
    return FormOperator(space.Zf, space, "d_b")


def op_dbar_b_star(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None):
    """Quadrature adjoint of dbar_b as a function of nodal (0,1)-form components."""
    D = op_dbar_b(space)
    return D.adjoint_apply


def op_box_b(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> OperatorMatrix:
    """Kohn Laplacian on functions, dbar_b* dbar_b."""
    return OperatorMatrix(_gram_of(space, space.Zbf), "hermitian", "box_b")


def op_box_b_bar(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> OperatorMatrix:
    return OperatorMatrix(_gram_of(space, space.Zf), "hermitian", "box_b_bar")


def op_sublaplacian(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None) -> OperatorMatrix:
    return OperatorMatrix(_gram_of(space, space.Zbf) + _gram_of(space, space.Zf), "hermitian", "sublaplacian")


# -- nodewise covariant derivatives ---------------------------------------------


@dataclass
class CovariantJets:
    """Second covariant derivatives of the basis at nodes, h = identity gauge.

    ``f_ab[n, a, b, k]`` means Z_b Z_a f minus connection terms, i.e. f_{a b}
    with a differentiated first.  Likewise f_ab_, f_a_b, f_a_b_ with bars on
    the marked indices.
    """

    f_ab: np.ndarray
    f_abbar: np.ndarray
    f_abarb: np.ndarray
    f_abarbbar: np.ndarray

    def sublaplacian(self) -> np.ndarray:
        """Delta_b f = -sum (f_{a abar} + f_{abar a}), (N, K)."""
        t = np.einsum("naak->nk", self.f_abbar) + np.einsum("naak->nk", self.f_abarb)
        return -t

    def hessian_norm2(self) -> np.ndarray:
        s = 0
        for X in (self.f_ab, self.f_abbar, self.f_abarb, self.f_abarbbar):
            s = s + np.sum(np.abs(X) ** 2, axis=(1, 2))
        return s


def covariant_jets(space: DiscreteFunctionSpace, invariants: PseudoHermitianInvariants) -> CovariantJets:
    key = ("cov", id(invariants))
    if key in space._cache:
        return space._cache[key]
    fr = space.frames
    m = space.n - 1
    Z = fr.Z
    Zb = np.conj(Z)
    dZ = fr.dZ
    dZb = np.conj(dZ)
    om = invariants.omega  # [N, b, a, c]: omega_b^a(E_c), E = (T, Z.., Zbar..)
    omZ = om[:, :, :, 1 : 1 + m]  # omega_b^g(Z_a) -> [n, b, g, a]
    omZb = om[:, :, :, 1 + m :]
    N, K = space.values.shape
    f_ab = np.empty((N, m, m, K), complex)
    f_abbar = np.empty_like(f_ab)
    f_abarb = np.empty_like(f_ab)
    f_abarbbar = np.empty_like(f_ab)
    Zf, Zbf = space.Zf, space.Zbf
    for a in range(m):
        for b in range(m):
            # f_{ab} = Z_b Z_a f - omega_a^g(Z_b) Z_g f
            f_ab[:, a, b] = space.second(Z[:, b], Z[:, a], dZ[:, a]) - np.einsum("ng,ngk->nk", omZ[:, a, :, b], Zf)
            # f_{a bbar} = Zbar_b Z_a f - omega_a^g(Zbar_b) Z_g f
            f_abbar[:, a, b] = space.second(Zb[:, b], Z[:, a], dZ[:, a]) - np.einsum(
                "ng,ngk->nk", omZb[:, a, :, b], Zf
            )
            # f_{abar b} = Z_b Zbar_a f - conj(omega_a^g(Zbar_b)) Zbar_g f
            f_abarb[:, a, b] = space.second(Z[:, b], Zb[:, a], dZb[:, a]) - np.einsum(
                "ng,ngk->nk", np.conj(omZb[:, a, :, b]), Zbf
            )
            # f_{abar bbar} = Zbar_b Zbar_a f - conj(omega_a^g(Z_b)) Zbar_g f
            f_abarbbar[:, a, b] = space.second(Zb[:, b], Zb[:, a], dZb[:, a]) - np.einsum(
                "ng,ngk->nk", np.conj(omZ[:, a, :, b]), Zbf
            )
    out = CovariantJets(f_ab, f_abbar, f_abarb, f_abarbbar)
    space._cache[key] = out
    return out


def nodal_sublaplacian(space, invariants) -> np.ndarray:
    return covariant_jets(space, invariants).sublaplacian()


# -- third-order operators (n = 2) ---------------------------------------------------


def _require_n2(space):
    if space.n != 2:
        raise DimensionUnsupported(f"operator defined for n = 2 only (got n = {space.n})")


@dataclass(frozen=True)
class OneFormOperator:
    """Nodal components of a 1-form valued operator on {theta, theta^a, theta^abar}."""

    theta: np.ndarray  # (N, K)
    hol: np.ndarray  # (N, m, K)
    antihol: np.ndarray  # (N, m, K)

    def apply(self, coeffs):
        c = np.asarray(coeffs)
        return self.theta @ c, np.einsum("nak,k->na", self.hol, c), np.einsum("nak,k->na", self.antihol, c)


def op_L(space: DiscreteFunctionSpace, frames: Optional[FrameField] = None, invariants=None) -> OneFormOperator:
    """L f = d_b^c f + (Delta_b f) theta with d_b^c f = i (dbar_b f - d_b f)."""
    _require_n2(space)
    if invariants is None:
        raise ValueError("op_L needs invariants for the nodal sub-Laplacian")
    lap = nodal_sublaplacian(space, invariants)
    return OneFormOperator(lap, -1j * space.Zf, 1j * space.Zbf)


def op_paneitz(space: DiscreteFunctionSpace, frames=None, invariants=None, torsion: bool = True) -> OperatorMatrix:
    """P = Delta_b^2 + T^2 + 4 Im (A^{11} f_1)_{,1} in weak form (n = 2)."""
    _require_n2(space)
    lap = nodal_sublaplacian(space, invariants)
    w = space.weights
    P = np.einsum("n,nk,nl->kl", w, np.conj(lap), lap) - np.einsum("n,nk,nl->kl", w, np.conj(space.Tf), space.Tf)
    if torsion:
        P = P + paneitz_torsion_term(space, invariants)
    return OperatorMatrix(P, "hermitian", "paneitz")


def paneitz_torsion_term(space, invariants) -> np.ndarray:
    """Weak form of 4 Im (A^{11} f_1)_{,1}: -4 Im int A^{11} f_1 g_1 on real basis."""
    A11_up = np.conj(invariants.A[:, 0, 0])  # A^{11} = A_{1bar 1bar} = conj(A_{11})
    Zf = space.Zf[:, 0]
    w = space.weights
    X = np.einsum("n,n,nk,nl->kl", w, A11_up, Zf, Zf)
    # (2/i) int [-A^{11} f_1 g_1 + conj(...)] reduces to -4 Im for real f, g
    return -4 * np.imag(X) + 0j


def op_paneitz_composite(space, frames=None, invariants=None) -> OperatorMatrix:
    """Delta_b^2 + T^2 as products of Galerkin matrices (torsion-free reference)."""
    D = op_sublaplacian(space).matrix
    T = op_T(space).matrix
    return OperatorMatrix(D @ D + T @ T, "hermitian", "delta2+T2")


class _LaplaceField:
    """JAX evaluation of Delta_b e_k and the 1-form L e_k at arbitrary points."""

    def __init__(self, space: DiscreteFunctionSpace):
        self.space = space
        self.eng = space.M.engine
        self.basis = space.basis_fn

    def lap(self, x, perm):
        eng = self.eng
        m = eng.n - 1
        f = self.basis
        fr, om, A, resid, comp = eng._structure(x, perm)
        Z = fr["Z"]
        Zb = jnp.conj(Z)
        dZ = jax.jacfwd(lambda y: eng.frame_fn(y, perm)["Z"])(x)  # (m, 2n, 2n)
        g = jax.jacfwd(f)(x)  # (K, 2n)
        H = jax.hessian(f)(x)  # (K, 2n, 2n)
        Zf = g @ Z.T  # (K, m)
        Zbf = g @ Zb.T

        def second(V, W, dW):
            return jnp.einsum("x,kxy,y->k", V, H, W) + g @ (dW @ V)

        total = 0.0
        for a in range(m):
            # f_{a abar} + f_{abar a}
            t1 = second(Zb[a], Z[a], dZ[a]) - Zf @ om[a, :, 1 + m + a]
            t2 = second(Z[a], Zb[a], jnp.conj(dZ[a])) - Zbf @ jnp.conj(om[a, :, 1 + m + a])
            total = total + t1 + t2
        return -total, fr, Zf, Zbf

    def L_form(self, x, perm):
        """(K, 2n) ambient covectors L e_k = -i Zf theta^1 + i Zbf theta^1bar + lap theta."""
        lap, fr, Zf, Zbf = self.lap(x, perm)
        th1 = fr["coframe"][0]
        return (-1j * Zf[:, 0:1]) * th1[None, :] + (1j * Zbf[:, 0:1]) * jnp.conj(th1)[None, :] + lap[:, None] * fr[
            "theta"
        ][None, :]

    def dL_contract(self, x, perm):
        """Components of d(L e_k)(T, .) on (T, Z, Zbar): shape (K, 3)."""
        fr = self.eng.frame_fn(x, perm)
        D = jax.jacfwd(lambda y: self.L_form(y, perm))(x)  # (K, b, a) = d_a L_b
        dL = jnp.swapaxes(D, 1, 2) - D
        T = fr["T"].astype(complex)
        Z = fr["Z"][0]
        vT = jnp.einsum("a,kab,b->k", T, dL, T)
        vZ = jnp.einsum("a,kab,b->k", T, dL, Z)
        vZb = jnp.einsum("a,kab,b->k", T, dL, jnp.conj(Z))
        return jnp.stack([vT, vZ, vZb], axis=1)


def dL_contract_nodes(space: DiscreteFunctionSpace) -> np.ndarray:
    """(N, K, 3) components of d(L e_k)(T, .) on (T, Z_1, Zbar_1) at the nodes."""
    _require_n2(space)
    key = "dLT"
    if key not in space._cache:
        lf = _LaplaceField(space)
        z = space.nodes.nodes
        fn = chunked(jax.jit(jax.vmap(lf.dL_contract)))
        space._cache[key] = fn(_to_x(z), _pivots(space.M, z))
    return space._cache[key]


PTILDE_SCALE = -2.0


def op_paneitz_factored(space: DiscreteFunctionSpace, frames=None, raw: bool = False) -> OperatorMatrix:
    """Factored Paneitz matrix from d_b^* [(d L f)(T, .)].

    The (1,0) part of the contracted 2-form is paired against d_b e_k; the
    real part of the result, scaled by PTILDE_SCALE, is returned (``raw``
    skips the scaling and the real part).
    """
    _require_n2(space)
    g = dL_contract_nodes(space)  # (N, K, 3)
    w = space.weights
    X = np.einsum("n,nl,nk->kl", w, g[:, :, 1], np.conj(space.Zf[:, 0]))
    if raw:
        return OperatorMatrix(X, "none", "paneitz_factored_raw")
    return OperatorMatrix(PTILDE_SCALE * np.real(X) + 0j, "hermitian", "paneitz_factored")


# -- Q-curvature ----------------------------------------------------------------------

Q_PREFACTOR = 4.0 / 3.0


def q_curvature_coefficients(space, frames=None, invariants=None, parts: bool = False):
    """Galerkin coefficients of Q = (4/3)(Delta_b R - 2 Im A_{11,1bar1bar}).

    With ``parts`` the two scaled pieces are returned separately as well.
    """
    _require_n2(space)
    cj = covariant_jets(space, invariants)
    lap = cj.sublaplacian()  # (N, K), real basis so Delta_b e_k real up to rounding
    w = space.weights
    R = invariants.R
    lapR = np.einsum("n,n,nk->k", w, R, np.real(lap))
    A11 = invariants.A[:, 0, 0]
    tors = np.einsum("n,n,nk->k", w, A11, cj.f_abarbbar[:, 0, 0])
    a, b = Q_PREFACTOR * lapR, -2 * Q_PREFACTOR * np.imag(tors)
    if parts:
        return a + b, a, b
    return a + b


def q_curvature(space, frames=None, invariants=None) -> np.ndarray:
    """Q at the nodes (projected onto the space)."""
    return space.evaluate(q_curvature_coefficients(space, frames, invariants))


# -- exports -------------------------------------------------------------------------


def export_matrix(op, path, meta: Optional[dict] = None) -> Path:
    """Row-major little-endian float64 (re, im) pairs plus a .meta sidecar."""
    path = Path(path)
    A = np.asarray(op.matrix if isinstance(op, OperatorMatrix) else op, dtype=np.complex128)
    buf = np.empty(A.shape + (2,), dtype="<f8")
    buf[..., 0] = A.real
    buf[..., 1] = A.imag
    path.write_bytes(np.ascontiguousarray(buf).tobytes())
    lines = [
        "format = complex128-le-rowmajor-pairs",
        f"rows = {A.shape[0]}",
        f"cols = {A.shape[1]}",
    ]
    if isinstance(op, OperatorMatrix):
        lines += [f"symmetry = {op.symmetry}", f"source = {op.source}"]
    for k, v in sorted((meta or {}).items()):
        lines.append(f"{k} = {v}")
    Path(str(path) + ".meta").write_text("\n".join(lines) + "\n")
    return path


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    meta = {}
    for line in Path(str(path) + ".meta").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    r, c = int(meta["rows"]), int(meta["cols"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(r, c, 2)
    return raw[..., 0] + 1j * raw[..., 1]


def export_nodal_csv(path, nodes: NodeSet, values, name: str = "value") -> Path:
    """CSV of node coordinates, weights and the real part of one or more value columns."""
    path = Path(path)
    z = nodes.nodes
    n = z.shape[1]
    cols = [f"re_z{j+1},im_z{j+1}" for j in range(n)]
    lines = [",".join(cols + ["weight", name])]
    for zk, wk, vk in zip(z, nodes.weights, np.real(values)):
        parts = []
        for c in zk:
            parts += [repr(float(c.real)), repr(float(c.imag))]
        vals = [repr(float(v)) for v in np.atleast_1d(vk)]
        lines.append(",".join(parts + [repr(float(wk))] + vals))
    path.write_text("\n".join(lines) + "\n")
    return path
