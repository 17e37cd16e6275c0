"""Spectral reports, closed-range surrogates and the Paneitz integral audit."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .operators import (
    DiscreteFunctionSpace,
    FormOperator,
    OperatorMatrix,
    covariant_jets,
    op_paneitz,
)


class NotHermitian(ValueError):
    pass


class AllKernel(RuntimeError):
    pass


KERNEL_REL = 1e-7


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    gap: float
    kernel_tol: float
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)
    max_imag: float = 0.0

    def kernel_vectors(self) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("eigenvectors not kept")
        k = np.abs(self.eigenvalues) <= self.kernel_tol
        return self.eigenvectors[:, k]

    def summary(self) -> dict:
        return {"kernel_dim": self.kernel_dim, "gap": self.gap, "kernel_tol": self.kernel_tol}


def _matrix(op):
    return np.asarray(op.matrix if isinstance(op, OperatorMatrix) else op)


def eig_sym(op, kernel_tol: Optional[float] = None, herm_tol: float = 1e-6) -> SpectralReport:
    """Dense Hermitian eigensolve; kernel_tol defaults to 1e-7 * max |eigenvalue|."""
    A = _matrix(op)
    nrm = np.linalg.norm(A)
    if nrm > 0 and np.linalg.norm(A - A.conj().T) / nrm > herm_tol:
        raise NotHermitian(f"relative Hermitian defect {np.linalg.norm(A - A.conj().T) / nrm:.3e}")
    # imaginary parts of the eigenvalues of the raw matrix (diagnostic)
    H = 0.5 * (A + A.conj().T)
    lam, vec = np.linalg.eigh(H)
    max_imag = float(np.max(np.abs(np.linalg.eigvals(A).imag))) if A.size else 0.0
    if kernel_tol is None:
        kernel_tol = KERNEL_REL * (np.max(np.abs(lam)) if lam.size else 0.0)
    ker = np.abs(lam) <= kernel_tol
    above = lam[lam > kernel_tol]
    gap = float(above.min()) if above.size else float("nan")
    return SpectralReport(lam, int(ker.sum()), gap, float(kernel_tol), vec, max_imag)


def essential_positivity(P, kernel_tol: Optional[float] = None) -> tuple:
    """(lambda_1, kernel_dim): smallest eigenvalue above kernel_tol."""
    rep = eig_sym(P, kernel_tol)
    if rep.kernel_dim == len(rep.eigenvalues) or not np.isfinite(rep.gap):
        raise AllKernel("every eigenvalue lies below the kernel tolerance")
    return rep.gap, rep.kernel_dim


def singular_values(F) -> np.ndarray:
    """Singular values of F as a map between L^2 spaces (quadrature weighted)."""
    if isinstance(F, FormOperator):
        w = np.sqrt(F.space.weights)
        A = (F.nodal * w[:, None, None]).reshape(-1, F.nodal.shape[-1])
    else:
        A = _matrix(F)
    return np.linalg.svd(A, compute_uv=False)


def closedness_gap(F, kernel_tol: Optional[float] = None, return_kernel_dim: bool = False):
    """Smallest singular value above kernel_tol (default 1e-7 * largest)."""
    s = singular_values(F)
    if kernel_tol is None:
        kernel_tol = KERNEL_REL * (s.max() if s.size else 0.0)
    above = s[s > kernel_tol]
    if not above.size:
        raise AllKernel("all singular values below the kernel tolerance")
    gap = float(above.min())
    if return_kernel_dim:
        return gap, int(np.sum(s <= kernel_tol))
    return gap


def rayleigh_quotient(A, v) -> float:
    A = _matrix(A)
    return float(np.real(np.vdot(v, A @ v)) / np.real(np.vdot(v, v)))


def random_orthogonal_to(kernel: np.ndarray, dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Seeded real random vectors with the kernel components removed (columns)."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(dim, count)).astype(complex)
    if kernel.size:
        X = X - kernel @ (kernel.conj().T @ X)
    return X


# -- integral identity ----------------------------------------------------------------


HESSIAN_CONVENTIONS = ("full", "pure", "mixed")


@dataclass
class AuditEntry:
    lhs_nodal: float
    lhs_matrix: float
    rhs: float
    internal_rel: float
    frame_rel: float


@dataclass
class AuditReport:
    entries: list
    convention: str
    gradient_factor: float
    max_internal: float
    max_frame: float
    scale_note: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2, sort_keys=True)


def paneitz_integral_audit(
    fs,
    space: DiscreteFunctionSpace,
    invariants,
    P: Optional[OperatorMatrix] = None,
    convention: str = "full",
    gradient_factor: float = 2.0,
) -> AuditReport:
    """Compare int 2 (Pf) f against the frame formula

        int [3 (Delta_b f)^2 - |Hess_b f|^2 - R |grad_b f|^2 - 6 Im(A_{1bar1bar} f_1 f_1)]

    for real coefficient vectors ``fs`` (columns or a list).  ``convention``
    picks |Hess_b f|^2: 'full' sums |f_11|^2 + |f_11bar|^2 + |f_1bar1|^2 +
    |f_1bar1bar|^2, 'pure' keeps f_11 and f_1bar1bar, 'mixed' keeps the
    mixed pair.  ``gradient_factor`` sets |grad_b f|^2 = factor * |f_1|^2.

    Relative discrepancies are scaled by the sum of absolute term integrals,
    which stays meaningful when both sides vanish.
    """
    if convention not in HESSIAN_CONVENTIONS:
        raise ValueError(f"convention must be one of {HESSIAN_CONVENTIONS}")
    if P is None:
        P = op_paneitz(space, invariants=invariants)
    cj = covariant_jets(space, invariants)
    lap = cj.sublaplacian()
    w = space.weights
    R = invariants.R
    A11 = invariants.A[:, 0, 0]
    A_bb = np.conj(A11)  # A_{1bar 1bar}
    fs = [np.asarray(f) for f in (fs.T if isinstance(fs, np.ndarray) and fs.ndim == 2 else fs)]
    entries = []
    for c in fs:
        c = np.real(c).astype(float)
        Lf = lap @ c
        Tf = space.Tf @ c
        f1 = space.Zf[:, 0] @ c
        # nodal weak integrand of 2 <Pf, f>
        tors = -4 * np.imag(A_bb * f1 * f1)  # A^{11} = A_{1bar1bar}
        lhs_nodal = 2 * float(np.sum(w * (np.abs(Lf) ** 2 - np.abs(Tf) ** 2 + tors)))
        lhs_matrix = 2 * float(np.real(c @ P.matrix @ c))
        parts = {
            "ab": np.einsum("nk,k->n", cj.f_ab[:, 0, 0], c),
            "abbar": np.einsum("nk,k->n", cj.f_abbar[:, 0, 0], c),
            "abarb": np.einsum("nk,k->n", cj.f_abarb[:, 0, 0], c),
            "abarbbar": np.einsum("nk,k->n", cj.f_abarbbar[:, 0, 0], c),
        }
        keys = {"full": list(parts), "pure": ["ab", "abarbbar"], "mixed": ["abbar", "abarb"]}[convention]
        hess2 = sum(np.abs(parts[k]) ** 2 for k in keys)
        grad2 = gradient_factor * np.abs(f1) ** 2
        terms = [
            3 * np.real(Lf) ** 2,
            -hess2,
            -R * grad2,
            -6 * np.imag(A_bb * f1 * f1),
        ]
        ints = [float(np.sum(w * t)) for t in terms]
        rhs = sum(ints)
        scale = sum(abs(x) for x in ints) + abs(lhs_nodal)
        internal = abs(lhs_nodal - lhs_matrix) / max(abs(lhs_matrix), abs(lhs_nodal), 1e-300)
        if abs(lhs_matrix) == 0 and abs(lhs_nodal) == 0:
            internal = 0.0
        frame = abs(lhs_nodal - rhs) / scale if scale > 0 else 0.0
        entries.append(AuditEntry(lhs_nodal, lhs_matrix, rhs, internal, frame))
    return AuditReport(
        entries,
        convention,
        gradient_factor,
        max((e.internal_rel for e in entries), default=0.0),
        max((e.frame_rel for e in entries), default=0.0),
    )


# -- Q transformation law ---------------------------------------------------------------


@dataclass
class QLawReport:
    resolution: int
    degree: int
    residual: float  # |qhat - q - factor * P phi| / scale
    scale: float
    fitted_factor: float  # least-squares factor, nan when P phi vanishes
    law_factor: float
    q_norm: float
    qhat_norm: float
    p_phi_norm: float
    q_sup: float


def q_law_audit(M, phi, resolution: int, degree: int = 4, law_factor: float = 1.0) -> QLawReport:
    """Weak-form check of e^{2 phi} Qhat = Q + law_factor * P phi for thetahat = e^phi theta.

    Both sides are paired with the orthonormal basis of the unscaled space.
    Pairing Qhat with g against thetahat ^ dthetahat equals pairing
    e^{2 phi} Qhat with g against theta ^ dtheta, so no nodal division is
    needed.  The residual is divided by the sum of the norms of the separate
    pieces (both curvature parts of Qhat, Q and P phi): for CR pluriharmonic
    phi every side vanishes and only this scale is meaningful.
    """
    from .pseudohermitian import build_frames, compute_invariants, sample_nodes
    from .operators import build_space, q_curvature_coefficients

    if isinstance(phi, str):
        from .jets import parse_hermitian

        phi = parse_hermitian(phi, M.n)
    Mh = M.with_phi(phi)
    out = []
    for X in (M, Mh):
        ns = sample_nodes(X, resolution)
        fr = build_frames(X, ns)
        inv = compute_invariants(fr)
        out.append((build_space(X, ns, fr, degree), inv))
    (S, inv), (Sh, invh) = out
    q = q_curvature_coefficients(S, invariants=inv)
    qh, a, b = q_curvature_coefficients(Sh, invariants=invh, parts=True)
    # change of basis: e_k = sum_l <e_k, ehat_l>_hat ehat_l
    G = S.values.T @ (Sh.weights[:, None] * Sh.values)
    qh_e, a, b = G @ qh, G @ a, G @ b
    P = op_paneitz(S, invariants=inv).matrix
    Pphi = np.real(P @ S.project(np.real(phi(S.nodes.nodes))))
    r = qh_e - q - law_factor * Pphi
    scale = sum(float(np.linalg.norm(v)) for v in (a, b, q, law_factor * Pphi))
    pp = float(Pphi @ Pphi)
    fitted = float((qh_e - q) @ Pphi / pp) if pp > 1e-20 * max(scale, 1e-300) ** 2 else float("nan")
    return QLawReport(
        resolution,
        degree,
        float(np.linalg.norm(r) / scale) if scale > 0 else 0.0,
        scale,
        fitted,
        law_factor,
        float(np.linalg.norm(q)),
        float(np.linalg.norm(qh_e)),
        float(np.sqrt(pp)),
        float(np.max(np.abs(S.evaluate(q)))),
    )
