"""Hypersurfaces {u = 0}, boundary quadrature, adapted frames and
Tanaka-Webster invariants.

Frames are evaluated pointwise by JAX from the exact polynomial data of the
defining function, so derivatives of frame fields (connection forms,
curvature) are exact up to rounding.  Every field is defined on each level
set of ``u`` near ``M``; exterior derivatives of these ambient extensions
restrict correctly to ``M``.

Conventions (h = identity gauge):

* ``theta = s * exp(phi) * d^c u`` with ``s = +1`` for negative-inside and
  ``s = -1`` for positive-inside defining functions;
* ``d theta = i sum theta^a ^ theta^abar``, so ``d theta(Z_a, Zbar_b) = i delta``;
* ``d theta^a = theta^b ^ omega_b^a + A^a_cbar theta ^ theta^cbar``;
* ``R = sum (d omega_a^a - omega_a^c ^ omega_c^a)(Z_r, Zbar_r)``.

Vectors are complex arrays of length 2n in real coordinates
``(x_1..x_n, y_1..y_n)``; covectors likewise, and a 1-form evaluates on a
vector by the plain (bilinear) dot product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import jets
from .jets import ComplexPolynomial, HermitianPolynomial

import jax

jax.config.update("jax_enable_x64", True)
import jax.numpy as jnp  # noqa: E402


class NotRegular(ValueError):
    pass


class NotPseudoconvex(ValueError):
    pass


class RadialProjectionFailed(RuntimeError):
    pass


class DegenerateContact(RuntimeError):
    pass


class FitResidualTooLarge(RuntimeError):
    pass


INSIDE_SIGNS = ("negative_inside", "positive_inside")


@dataclass(frozen=True)
class Hypersurface:
    """M = {u = 0} in C^n with contact form exp(phi) d^c u (oriented by inside_sign)."""

    n: int
    u: HermitianPolynomial
    inside_sign: str = "negative_inside"
    phi: Optional[HermitianPolynomial] = None
    center: tuple = ()

    def __post_init__(self):
        if self.inside_sign not in INSIDE_SIGNS:
            raise ValueError(f"inside_sign must be one of {INSIDE_SIGNS}")
        if self.u.n != self.n:
            raise ValueError("defining function has the wrong number of variables")
        if not self.center:
            object.__setattr__(self, "center", tuple([0.0] * self.n))

    @property
    def sign(self) -> float:
        return 1.0 if self.inside_sign == "negative_inside" else -1.0

    @property
    def phi_poly(self) -> HermitianPolynomial:
        if self.phi is None:
            return HermitianPolynomial(self.n)
        return self.phi

    def with_phi(self, phi: Optional[HermitianPolynomial]) -> "Hypersurface":
        return Hypersurface(self.n, self.u, self.inside_sign, phi, self.center)

    @cached_property
    def engine(self) -> "FrameEngine":
        return FrameEngine(self)


# -- construction and validation ----------------------------------------------


def _probe_points(u: HermitianPolynomial, count: int = 64, seed: int = 0, center=None):
    """Random points pushed onto {u = 0} by Newton steps along the gradient."""
    n = u.n
    rng = np.random.default_rng(seed)
    c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    x = rng.normal(size=(count, 2 * n)) * 0.8
    x += np.concatenate([c.real, c.imag])
    for _ in range(60):
        z = x[:, :n] + 1j * x[:, n:]
        val = u(z)
        g = jets.real_gradient(u, z)
        gg = np.sum(g * g, axis=1)
        step = np.where(gg > 1e-300, val / np.maximum(gg, 1e-300), 0.0)
        x = x - step[:, None] * g
        if np.all(np.abs(val) < 1e-13):
            break
    z = x[:, :n] + 1j * x[:, n:]
    ok = np.abs(u(z)) < 1e-10
    return z[ok]


def levi_eigenvalues(u: HermitianPolynomial, z, sign: float = 1.0) -> np.ndarray:
    """Eigenvalues of sign * u_{j kbar} restricted to {a : sum a_j u_j = 0}."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    L = jets.levi_matrix(u, z)
    g = jets.gradient(u, z)
    out = []
    for Lk, gk in zip(L, g):
        # orthonormal basis of the complex tangent space (Hermitian complement of conj(g))
        q, _ = np.linalg.qr(np.column_stack([np.conj(gk), np.eye(u.n)]))
        B = q[:, 1 : u.n]
        H = sign * (B.T @ Lk @ np.conj(B))
        out.append(np.linalg.eigvalsh(0.5 * (H + H.conj().T)))
    return np.array(out)


def build_hypersurface(config: dict) -> Hypersurface:
    """Validated hypersurface from a ``[domain]`` mapping.

    Keys: ``n``, ``u`` (literal or HermitianPolynomial), ``inside_sign``,
    optional ``phi`` and ``center``.
    """
    n = int(config["n"])
    u = config["u"]
    if isinstance(u, str):
        u = jets.parse_hermitian(u, n)
    u = HermitianPolynomial.from_poly(u)
    phi = config.get("phi")
    if isinstance(phi, str):
        phi = jets.parse_hermitian(phi, n) if phi.strip() else None
    elif phi is not None:
        phi = HermitianPolynomial.from_poly(phi)
    center = tuple(config.get("center", ())) or tuple([0.0] * n)
    M = Hypersurface(n, u, config.get("inside_sign", "negative_inside"), phi, center)

    probes = _probe_points(u, center=center)
    if len(probes) == 0:
        raise NotRegular("could not locate points of {u = 0}")
    gnorm = np.linalg.norm(jets.real_gradient(u, probes), axis=1)
    if np.min(gnorm) <= 1e-8:
        raise NotRegular(f"gradient of u vanishes on M (min |grad u| = {np.min(gnorm):.3e})")
    if n >= 2:
        ev = levi_eigenvalues(u, probes, M.sign)
        if np.min(ev) <= 1e-8:
            raise NotPseudoconvex(f"Levi form not positive definite (min eigenvalue {np.min(ev):.3e})")
    return M


# -- quadrature ----------------------------------------------------------------------


def _orthant_rule(n: int, order: int):
    """Moduli r on the positive orthant of S^{n-1} with weights for the torus measure.

    Hyperspherical angles r_1 = cos a_1, r_2 = sin a_1 cos a_2, ... with
    Gauss-Legendre in each angle on [0, pi/2]; the weight includes the
    factor prod r_j from the circle fibres.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    a = 0.25 * np.pi * (g + 1.0)
    wa = 0.25 * np.pi * w
    grids = np.meshgrid(*([np.arange(order)] * (n - 1)), indexing="ij")
    idx = np.stack([gr.reshape(-1) for gr in grids], axis=1) if n > 1 else np.zeros((1, 0), int)
    ang = a[idx]
    W = np.prod(wa[idx], axis=1)
    r = np.ones((len(ang), n))
    s = np.ones(len(ang))
    for k in range(n - 1):
        r[:, k] = s * np.cos(ang[:, k])
        # measure of S^{n-1}: prod sin^{n-2-k}(a_k)
        W = W * np.sin(ang[:, k]) ** (n - 2 - k)
        s = s * np.sin(ang[:, k])
    r[:, n - 1] = s
    return r, W * np.prod(r, axis=1)


def sphere_rule(n: int, resolution: int):
    """Points and weights on the unit sphere S^{2n-1} in C^n.

    Moduli from a Gauss rule in hyperspherical angles, phases equispaced
    (``2 * resolution`` Gauss points per angle and ``2 * resolution + 1``
    phases, exact for trigonometric degree <= 2 * resolution in each phase).
    """
    r, wr = _orthant_rule(n, 2 * resolution)
    m = 2 * resolution + 1
    ang = 2 * np.pi * (np.arange(m) + 0.5) / m
    grids = np.meshgrid(*([ang] * n), indexing="ij")
    xi = np.stack([gr.reshape(-1) for gr in grids], axis=1)  # (m^n, n)
    z = (r[:, None, :] * np.exp(1j * xi[None, :, :])).reshape(-1, n)
    w = np.repeat(wr, xi.shape[0]) * (2 * np.pi / m) ** n
    return z, w


@dataclass(frozen=True)
class NodeSet:
    nodes: np.ndarray  # (N, n) complex points on M
    weights: np.ndarray  # (N,) volume of theta ^ (d theta)^{n-1}
    resolution: int = 0

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _radial_roots(M: Hypersurface, directions: np.ndarray, rmax: float = 50.0):
    """Root of u(c + r w) = 0 in r > 0 for each unit direction w (exactly one)."""
    u = M.u
    c = np.asarray(M.center, dtype=complex)
    deg = max(u.degree, 1)
    # u along each ray is a real polynomial of degree <= deg in r: interpolate exactly
    rs = np.linspace(0.0, 1.0, deg + 1)
    pts = c + rs[None, :, None] * directions[:, None, :]
    vals = u(pts).real  # (N, deg+1)
    coef = np.linalg.solve(np.vander(rs, deg + 1), vals.T).T  # highest power first
    lead = coef[:, 0]
    out = np.empty(len(directions))
    for k in range(len(directions)):
        roots = np.roots(coef[k]) if lead[k] != 0 or deg == 1 else np.roots(np.trim_zeros(coef[k], "f"))
        scale = max(1.0, np.max(np.abs(roots), initial=0.0))
        real = roots[(np.abs(roots.imag) < 1e-9 * scale) & (roots.real > 1e-12)].real
        real = np.unique(np.round(real[real < rmax], 12))
        if len(real) != 1:
            raise RadialProjectionFailed(
                f"ray {k} from center meets u = 0 in {len(real)} points (need exactly one)"
            )
        out[k] = real[0]
    # polish with Newton on the exact polynomial
    dw = np.concatenate([directions.real, directions.imag], axis=1)
    for _ in range(4):
        p = c + out[:, None] * directions
        f = u(p).real
        g = jets.real_gradient(u, p)
        out = out - f / np.sum(g * dw, axis=1)
    return out


def sample_nodes(M: Hypersurface, resolution: int) -> NodeSet:
    """Quadrature on M by radial projection of a sphere rule about M.center.

    Weights carry the density of theta ^ (d theta)^{n-1} for the contact form
    of M (including the conformal factor).
    """
    n = M.n
    w_dirs, w_sph = sphere_rule(n, resolution)
    c = np.asarray(M.center, dtype=complex)
    rho = _radial_roots(M, w_dirs)
    z = c + rho[:, None] * w_dirs
    g = jets.real_gradient(M.u, z)
    wr = np.concatenate([w_dirs.real, w_dirs.imag], axis=1)
    gw = np.abs(np.sum(g * wr, axis=1))
    gn = np.linalg.norm(g, axis=1)
    if np.any(gw <= 1e-12 * gn):
        raise RadialProjectionFailed("a ray is tangent to M")
    area = rho ** (2 * n - 1) * gn / gw * w_sph
    density = M.engine.volume_density(z)
    return NodeSet(z, area * density, resolution)


# -- frames ---------------------------------------------------------------------


def _to_x(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def _pivots(M: Hypersurface, z: np.ndarray) -> np.ndarray:
    """Per-node permutation putting the largest |u_j| first (local frame chart)."""
    g = np.abs(jets.gradient(M.u, z))
    m = np.argmax(g, axis=1)
    perm = np.empty((len(z), M.n), dtype=np.int64)
    for k, mk in enumerate(m):
        perm[k] = [mk] + [j for j in range(M.n) if j != mk]
    return perm


CHUNK = 256


def chunked(fn, size: int = CHUNK):
    """Apply a vmapped function over leading-axis chunks, gathering numpy pytrees."""

    def run(*args):
        N = args[0].shape[0]
        parts = []
        for s in range(0, N, size):
            out = fn(*[a[s : s + size] for a in args])
            parts.append(jax.tree_util.tree_map(np.asarray, out))
        return jax.tree_util.tree_map(lambda *xs: np.concatenate(xs), *parts)

    return run


class FrameEngine:
    """JAX-evaluated adapted frame, coframe, connection and curvature."""

    def __init__(self, M: Hypersurface):
        self.M = M
        n = M.n
        self.n = n
        u = M.u
        self._u = u.to_jax()
        self._ud = [u.d(j + 1).to_jax() for j in range(n)]
        self._lev = [[u.d(j + 1).dbar(k + 1).to_jax() for k in range(n)] for j in range(n)]
        self._phi = M.phi_poly.to_jax() if M.phi is not None else None
        self._fit = _structure_fit_matrix(n)
        self._jit_cache = {}

    # scalar pieces ---------------------------------------------------------------
    def _phi_val(self, x):
        if self._phi is None:
            return jnp.zeros(())
        return jnp.real(self._phi(x))

    def theta_fn(self, x):
        n = self.n
        uj = jnp.stack([f(x) for f in self._ud])
        # Euclidean gradient: u_x = 2 Re u_j, u_y = -2 Im u_j
        gx, gy = 2 * jnp.real(uj), -2 * jnp.imag(uj)
        c = jnp.concatenate([-gy, gx])
        return self.M.sign * jnp.exp(self._phi_val(x)) * c

    def frame_fn(self, x, perm):
        """theta, T, Z (n-1, 2n), coframe (n-1, 2n), normal at a point x."""
        n = self.n
        s = self.M.sign
        uj = jnp.stack([f(x) for f in self._ud])
        L = jnp.stack([jnp.stack([f(x) for f in row]) for row in self._lev])
        ephi = jnp.exp(self._phi_val(x))
        theta = self.theta_fn(x)
        grad = jnp.concatenate([2 * jnp.real(uj), -2 * jnp.imag(uj)])

        # holomorphic tangent vectors a with sum a_j u_j = 0
        P = jnp.eye(n)[perm]  # rows e_{perm[k]}
        um = uj[perm[0]]
        A = [um * P[k] - uj[perm[k]] * P[0] for k in range(1, n)]
        hfac = 2 * s * ephi

        def herm(a, b):
            return hfac * jnp.dot(a, L @ jnp.conj(b))

        Zs = []
        for a in A:
            for q in Zs:
                a = a - herm(a, q) * q
            a = a / jnp.sqrt(jnp.real(herm(a, a)))
            Zs.append(a)
        Zc = jnp.stack(Zs)  # (n-1, n) holomorphic components
        Z = jnp.concatenate([Zc / 2, -1j * Zc / 2], axis=1)  # real-coordinate components

        # Reeb field: du(T) = 0, theta(T) = 1, d theta(T, Z_a) = 0
        Dt = jax.jacfwd(self.theta_fn)(x)  # Dt[b, a] = d_a theta_b
        dtheta = Dt.T - Dt  # (d theta)_{ab} = d_a theta_b - d_b theta_a
        rows = [grad, theta]
        rhs = [0.0, 1.0]
        for k in range(n - 1):
            v = dtheta @ Z[k]
            rows += [jnp.real(v), jnp.imag(v)]
            rhs += [0.0, 0.0]
        T = jnp.linalg.solve(jnp.stack(rows), jnp.array(rhs))

        nrm = grad / jnp.dot(grad, grad)
        V = jnp.column_stack([T.astype(complex)] + [Z[k] for k in range(n - 1)]
                             + [jnp.conj(Z[k]) for k in range(n - 1)] + [nrm.astype(complex)])
        dual = jnp.linalg.inv(V)
        coframe = dual[1:n]  # theta^alpha
        return {"theta": theta, "T": T, "Z": Z, "coframe": coframe, "normal": grad, "V": V, "dual": dual}

    # structure equations --------------------------------------------------------
    def _structure(self, x, perm):
        n = self.n
        fr = self.frame_fn(x, perm)
        dco = jax.jacfwd(lambda y: self.frame_fn(y, perm)["coframe"])(x)  # (n-1, 2n, 2n): [al, b, a]
        dth = jnp.swapaxes(dco, 1, 2) - dco  # (d theta^al)_{ab}
        T, Z = fr["T"], fr["Z"]
        Zb = jnp.conj(Z)
        E = jnp.concatenate([T[None, :].astype(complex), Z, Zb])  # frame rows
        comp = jnp.einsum("ia,kab,jb->kij", E, dth, E)  # dtheta^k(E_i, E_j)
        rhs = _structure_rhs(comp, n)
        sol = self._fit[0] @ rhs
        resid = self._fit[1] @ rhs
        om, A = _unpack_structure(sol, n)
        return fr, om, A, resid, comp

    def connection_fn(self, x, perm):
        """omega_b^a as ambient covectors, shape (n-1, n-1, 2n)."""
        n = self.n
        fr, om, A, resid, _ = self._structure(x, perm)
        # om[b, a, c]: omega_b^a evaluated on frame vector c in (T, Z_1.., Zbar_1..)
        dual = fr["dual"][: 2 * n - 1]  # coframe (theta, theta^a, theta^abar) on TM
        return jnp.einsum("bac,cx->bax", om, dual)

    def _curvature(self, x, perm):
        n = self.n
        fr, om, A, resid, comp = self._structure(x, perm)
        Dw = jax.jacfwd(lambda y: self.connection_fn(y, perm))(x)  # (b, a, x, y) = d_y omega_x
        dom = jnp.swapaxes(Dw, 2, 3) - Dw
        w = self.connection_fn(x, perm)
        wedge = jnp.einsum("bcx,cay->baxy", w, w) - jnp.einsum("bcy,cax->baxy", w, w)
        Pi = dom - wedge
        Z = fr["Z"]
        Rt = jnp.einsum("rx,baxy,sy->bars", Z, Pi, jnp.conj(Z))  # R_b^a_{r sbar}
        ric = jnp.einsum("aars->rs", Rt)
        R = jnp.real(jnp.trace(ric))
        return fr, om, A, resid, ric, R

    # batched public API ------------------------------------------------------------
    def _batched(self, name, fn):
        if name not in self._jit_cache:
            self._jit_cache[name] = chunked(jax.jit(jax.vmap(fn)))
        return self._jit_cache[name]

    def frames(self, z: np.ndarray) -> dict:
        z = np.asarray(z, dtype=complex)
        f = self._batched("frames", self.frame_fn)
        out = f(_to_x(z), _pivots(self.M, z))
        return {k: np.asarray(v) for k, v in out.items()}

    def frame_jacobians(self, z: np.ndarray) -> dict:
        """Derivatives of T and Z along real coordinates: arrays [..., component, direction]."""
        z = np.asarray(z, dtype=complex)

        def jac(x, perm):
            d = jax.jacfwd(lambda y: self.frame_fn(y, perm), holomorphic=False)(x)
            return {"T": d["T"], "Z": d["Z"], "theta": d["theta"]}

        f = self._batched("jac", jac)
        out = f(_to_x(z), _pivots(self.M, z))
        return {k: np.asarray(v) for k, v in out.items()}

    def invariants_raw(self, z: np.ndarray) -> dict:
        z = np.asarray(z, dtype=complex)

        def inv(x, perm):
            fr, om, A, resid, ric, R = self._curvature(x, perm)
            return {"omega": om, "A": A, "resid": resid, "ricci": ric, "R": R}

        f = self._batched("inv", inv)
        out = f(_to_x(z), _pivots(self.M, z))
        return {k: np.asarray(v) for k, v in out.items()}

    def structure_raw(self, z: np.ndarray) -> dict:
        """Connection and torsion only (no curvature)."""
        z = np.asarray(z, dtype=complex)

        def st(x, perm):
            fr, om, A, resid, comp = self._structure(x, perm)
            return {"omega": om, "A": A, "resid": resid}

        f = self._batched("struct", st)
        return f(_to_x(z), _pivots(self.M, z))

    def volume_density(self, z: np.ndarray) -> np.ndarray:
        """|theta ^ (d theta)^{n-1}| per unit Euclidean area of M."""
        n = self.n
        fr = self.frames(z)
        g = fr["normal"]
        N = len(g)
        stack = np.concatenate([g[:, :, None], np.broadcast_to(np.eye(2 * n), (N, 2 * n, 2 * n))], axis=2)
        q, _ = np.linalg.qr(stack)
        E = q[:, :, 1 : 2 * n]  # orthonormal bases of TM
        F = np.einsum("nix,nxj->nij", fr["dual"][:, : 2 * n - 1], E)
        return math.factorial(n - 1) * np.abs(np.linalg.det(F))


# -- structure-equation least squares ----------------------------------------------
#
# Unknowns (complex): om[b, a, c] = omega_b^a(E_c) for frame vectors
# E = (T, Z_1..Z_m, Zbar_1..Zbar_m), m = n - 1, and A[a, c] = A^a_cbar.


def _n_unknowns(m: int) -> int:
    return m * m * (2 * m + 1) + m * m


def _unpack_structure(sol, n):
    m = n - 1
    k = m * m * (2 * m + 1)
    re, im = sol[: _n_unknowns(m)], sol[_n_unknowns(m) :]
    z = re + 1j * im
    om = z[:k].reshape(m, m, 2 * m + 1)
    A = z[k:].reshape(m, m)
    return om, A


def _structure_rows(m: int):
    """Rows (as complex coefficient dicts) of the linear structure equations.

    Returns a list of (coeffs over complex unknowns, conj-coeffs, rhs-selector).
    Each equation reads  sum c_i X_i + sum d_i conj(X_i) = rhs.
    """
    nu = _n_unknowns(m)

    def om_idx(b, a, c):
        return (b * m + a) * (2 * m + 1) + c

    def A_idx(a, c):
        return m * m * (2 * m + 1) + a * m + c

    T = 0
    Zi = lambda g: 1 + g  # noqa: E731
    Zb = lambda g: 1 + m + g  # noqa: E731
    eqs = []  # (lin, conjlin, ('comp', k, i, j) or None, weight)

    for a in range(m):
        for b in range(m):
            for g in range(m):
                # dtheta^a(Z_b, Zbar_g) = omega_b^a(Zbar_g)
                eqs.append(({om_idx(b, a, Zb(g)): 1.0}, {}, ("comp", a, Zi(b), Zb(g))))
                # dtheta^a(Z_b, Z_g) = omega_b^a(Z_g) - omega_g^a(Z_b)
                if b < g:
                    eqs.append(({om_idx(b, a, Zi(g)): 1.0, om_idx(g, a, Zi(b)): -1.0}, {}, ("comp", a, Zi(b), Zi(g))))
                # dtheta^a(Zbar_b, Zbar_g) = 0
                if b < g:
                    eqs.append(({}, {}, ("comp", a, Zb(b), Zb(g))))
            # dtheta^a(T, Z_b) = -omega_b^a(T)
            eqs.append(({om_idx(b, a, T): -1.0}, {}, ("comp", a, T, Zi(b))))
            # dtheta^a(T, Zbar_b) = A^a_bbar
            eqs.append(({A_idx(a, b): 1.0}, {}, ("comp", a, T, Zb(b))))
    # metric compatibility: omega_b^a + conj(omega_a^b) = 0 (h = identity)
    for a in range(m):
        for b in range(m):
            eqs.append(({om_idx(b, a, T): 1.0}, {om_idx(a, b, T): 1.0}, None))
            for g in range(m):
                eqs.append(({om_idx(b, a, Zi(g)): 1.0}, {om_idx(a, b, Zb(g)): 1.0}, None))
                eqs.append(({om_idx(b, a, Zb(g)): 1.0}, {om_idx(a, b, Zi(g)): 1.0}, None))
    return eqs, nu


def _structure_fit_matrix(n: int):
    """Pseudo-inverse mapping stacked [Re rhs; Im rhs] to [Re X; Im X], plus residual projector."""
    m = n - 1
    eqs, nu = _structure_rows(m)
    ne = len(eqs)
    # real form: for X = p + i q, c X + d conj(X) = (c + d) p + i (c - d) q
    M = np.zeros((2 * ne, 2 * nu))
    for r, (lin, conj, _) in enumerate(eqs):
        keys = set(lin) | set(conj)
        for i in keys:
            c = complex(lin.get(i, 0.0))
            d = complex(conj.get(i, 0.0))
            cp, cq = c + d, 1j * (c - d)
            M[r, i] += cp.real
            M[r, nu + i] += cq.real
            M[ne + r, i] += cp.imag
            M[ne + r, nu + i] += cq.imag
    pinv = np.linalg.pinv(M)
    resid = np.eye(2 * ne) - M @ pinv
    return jnp.asarray(pinv), jnp.asarray(resid)


def _structure_rhs(comp, n):
    m = n - 1
    eqs, _ = _structure_rows(m)
    vals = []
    for _, _, sel in eqs:
        if sel is None:
            vals.append(jnp.zeros((), dtype=complex))
        else:
            _, k, i, j = sel
            vals.append(comp[k, i, j])
    v = jnp.stack(vals)
    return jnp.concatenate([jnp.real(v), jnp.imag(v)])


# -- public dataclasses ------------------------------------------------------------


@dataclass(frozen=True)
class FrameField:
    M: Hypersurface
    nodes: NodeSet
    theta: np.ndarray  # (N, 2n) real
    T: np.ndarray  # (N, 2n) real
    Z: np.ndarray  # (N, n-1, 2n) complex
    coframe: np.ndarray  # (N, n-1, 2n) complex
    normal: np.ndarray  # (N, 2n) real
    dZ: np.ndarray = field(repr=False, default=None)  # (N, n-1, 2n, 2n) [.., comp, dir]
    dT: np.ndarray = field(repr=False, default=None)  # (N, 2n, 2n)

    @property
    def n(self) -> int:
        return self.M.n

    @property
    def h(self) -> np.ndarray:
        """Levi metric in this frame (identity by construction)."""
        m = self.n - 1
        return np.broadcast_to(np.eye(m), (len(self.theta), m, m))

    def dtheta(self) -> np.ndarray:
        """d theta as (N, 2n, 2n) matrices from the exact jacobian of theta."""
        D = self.dtheta_jac
        return np.swapaxes(D, 1, 2) - D

    @cached_property
    def dtheta_jac(self) -> np.ndarray:
        return self.M.engine.frame_jacobians(self.nodes.nodes)["theta"]

    def coords(self, X: np.ndarray):
        """(dz, dzbar) components of real-coordinate vectors X (..., 2n)."""
        n = self.n
        return X[..., :n] + 1j * X[..., n:], X[..., :n] - 1j * X[..., n:]


def build_frames(M: Hypersurface, nodes: NodeSet) -> FrameField:
    z = nodes.nodes
    fr = M.engine.frames(z)
    if not np.all(np.isfinite(fr["T"])):
        raise DegenerateContact("Reeb system singular at some node")
    jac = M.engine.frame_jacobians(z)
    return FrameField(
        M=M,
        nodes=nodes,
        theta=fr["theta"],
        T=fr["T"],
        Z=fr["Z"],
        coframe=fr["coframe"],
        normal=fr["normal"],
        dZ=jac["Z"],
        dT=jac["T"],
    )


@dataclass(frozen=True)
class PseudoHermitianInvariants:
    R: np.ndarray  # (N,) scalar curvature
    A: np.ndarray  # (N, n-1, n-1) torsion A_{ab} (lower indices)
    omega: np.ndarray  # (N, n-1, n-1, 2n-1): omega_b^a on (T, Z.., Zbar..)
    ricci: np.ndarray  # (N, n-1, n-1)
    residual: np.ndarray  # (N,) structure-equation fit residual

    @property
    def torsion_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.A) ** 2, axis=(1, 2)))


def compute_invariants(
    frames: FrameField, max_residual: float = 1e-4, curvature: bool = True
) -> PseudoHermitianInvariants:
    """Connection, torsion and (optionally) curvature at the frame nodes.

    With ``curvature=False`` R and the Ricci tensor are left as NaN.
    """
    eng = frames.M.engine
    if curvature:
        raw = eng.invariants_raw(frames.nodes.nodes)
    else:
        raw = dict(eng.structure_raw(frames.nodes.nodes))
        N, m = len(frames.T), frames.n - 1
        raw["R"] = np.full(N, np.nan)
        raw["ricci"] = np.full((N, m, m), np.nan + 0j)
    resid = np.linalg.norm(raw["resid"], axis=1)
    if np.max(resid) > max_residual:
        raise FitResidualTooLarge(f"structure-equation residual {np.max(resid):.3e}")
    # A^a_bbar -> A_{ab} = conj(A^a_bbar) in the unitary gauge
    A = np.conj(raw["A"])
    return PseudoHermitianInvariants(
        R=raw["R"], A=A, omega=raw["omega"], ricci=raw["ricci"], residual=resid
    )
