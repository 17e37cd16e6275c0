"""Polynomials in (z, conj(z)) with exact Wirtinger calculus.

A polynomial in ``n`` complex variables is stored as an integer exponent
matrix of shape ``(m, 2n)`` -- holomorphic exponents first, then
antiholomorphic ones -- together with a complex coefficient vector.

Real coordinates follow ``z_j = x_j + i y_j`` and real covectors on
``R^{2n}`` are ordered ``(dx_1..dx_n, dy_1..dy_n)``.  The complex structure
is fixed by ``d^c u (xi) = du(J xi)`` with ``d^c u = i (dbar u - d u)``,
which makes ``J d/dx = -d/dy``.  With this choice

    d d^c u = DDC_FACTOR * i ddbar u,      DDC_FACTOR = 2.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

import numpy as np

DDC_FACTOR = 2.0

_DROP_REL = 1e-15


def _as_points(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != n:
        raise ValueError(f"expected points with last axis {n}, got shape {z.shape}")
    return z


class ComplexPolynomial:
    """Sparse polynomial sum_k c_k z^alpha_k conj(z)^beta_k."""

    __slots__ = ("n", "exps", "coeffs")

    def __init__(self, n: int, exps=None, coeffs=None, *, normalize: bool = True):
        self.n = int(n)
        if exps is None:
            exps = np.zeros((0, 2 * self.n), dtype=np.int64)
            coeffs = np.zeros(0, dtype=complex)
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, 2 * self.n)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if exps.shape[0] != coeffs.shape[0]:
            raise ValueError("exponent rows and coefficients differ in length")
        if np.any(exps < 0):
            raise ValueError("negative exponent")
        if normalize:
            exps, coeffs = _collect(exps, coeffs)
        self.exps = exps
        self.coeffs = coeffs
        self.exps.setflags(write=False)
        self.coeffs.setflags(write=False)

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, n: int, c: complex) -> "ComplexPolynomial":
        return cls(n, np.zeros((1, 2 * n), dtype=np.int64), [c])

    @classmethod
    def monomial(cls, n: int, alpha: Sequence[int], beta: Sequence[int], c: complex = 1.0):
        e = np.concatenate([np.asarray(alpha), np.asarray(beta)]).reshape(1, 2 * n)
        return cls(n, e, [c])

    @classmethod
    def z(cls, n: int, j: int) -> "ComplexPolynomial":
        """The coordinate z_j (1-based)."""
        a = [0] * n
        a[j - 1] = 1
        return cls.monomial(n, a, [0] * n)

    @classmethod
    def zbar(cls, n: int, j: int) -> "ComplexPolynomial":
        b = [0] * n
        b[j - 1] = 1
        return cls.monomial(n, [0] * n, b)

    @classmethod
    def from_terms(cls, n: int, terms: dict) -> "ComplexPolynomial":
        """Build from ``{(alpha, beta): coeff}``."""
        if not terms:
            return cls(n)
        exps = [tuple(a) + tuple(b) for (a, b) in terms]
        return cls(n, exps, list(terms.values()))

    # -- views ----------------------------------------------------------------
    @property
    def terms(self) -> dict:
        out = {}
        for e, c in zip(self.exps, self.coeffs):
            out[(tuple(int(v) for v in e[: self.n]), tuple(int(v) for v in e[self.n :]))] = complex(c)
        return out

    @property
    def degree(self) -> int:
        if len(self.coeffs) == 0:
            return 0
        return int(self.exps.sum(axis=1).max())

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __repr__(self) -> str:
        return f"ComplexPolynomial(n={self.n}, {format_polynomial(self)!r})"

    # -- arithmetic -------------------------------------------------------------
    def _check(self, other: "ComplexPolynomial"):
        if other.n != self.n:
            raise ValueError("polynomials in different numbers of variables")

    def _lift(self, other):
        if isinstance(other, ComplexPolynomial):
            self._check(other)
            return other
        return ComplexPolynomial.constant(self.n, complex(other))

    def __add__(self, other):
        other = self._lift(other)
        return ComplexPolynomial(
            self.n, np.vstack([self.exps, other.exps]), np.concatenate([self.coeffs, other.coeffs])
        )

    __radd__ = __add__

    def __neg__(self):
        return ComplexPolynomial(self.n, self.exps, -self.coeffs, normalize=False)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, ComplexPolynomial):
            c = complex(other)
            if c == 0:
                return ComplexPolynomial(self.n)
            return ComplexPolynomial(self.n, self.exps, self.coeffs * c)
        self._check(other)
        if self.is_zero() or other.is_zero():
            return ComplexPolynomial(self.n)
        exps = (self.exps[:, None, :] + other.exps[None, :, :]).reshape(-1, 2 * self.n)
        coeffs = (self.coeffs[:, None] * other.coeffs[None, :]).reshape(-1)
        return ComplexPolynomial(self.n, exps, coeffs)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = ComplexPolynomial.constant(self.n, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> "ComplexPolynomial":
        """Pointwise complex conjugate: swaps the roles of z and conj(z)."""
        n = self.n
        e = np.hstack([self.exps[:, n:], self.exps[:, :n]])
        return ComplexPolynomial(n, e, np.conj(self.coeffs))

    def real_part(self) -> "ComplexPolynomial":
        return (self + self.conj()) * 0.5

    def imag_part(self) -> "ComplexPolynomial":
        return (self - self.conj()) * (-0.5j)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        d = self - self._lift(other)
        return d.is_zero() or float(np.max(np.abs(d.coeffs))) <= atol

    # -- calculus ---------------------------------------------------------------
    def wirtinger(self, which: str, index: int) -> "ComplexPolynomial":
        """d/dz_index (``which='holo'``) or d/dconj(z_index) (``'anti'``), 1-based."""
        if not 1 <= index <= self.n:
            raise IndexError(f"variable index {index} outside 1..{self.n}")
        if which not in ("holo", "anti"):
            raise ValueError("which must be 'holo' or 'anti'")
        col = index - 1 if which == "holo" else self.n + index - 1
        p = self.exps[:, col]
        keep = p > 0
        exps = self.exps[keep].copy()
        exps[:, col] -= 1
        return ComplexPolynomial(self.n, exps, self.coeffs[keep] * p[keep])

    def d(self, index: int) -> "ComplexPolynomial":
        return self.wirtinger("holo", index)

    def dbar(self, index: int) -> "ComplexPolynomial":
        return self.wirtinger("anti", index)

    def real_partial(self, k: int) -> "ComplexPolynomial":
        """Derivative along the real coordinate k (0-based over x_1..x_n, y_1..y_n)."""
        n = self.n
        if k < n:
            return self.d(k + 1) + self.dbar(k + 1)
        j = k - n + 1
        return (self.d(j) - self.dbar(j)) * 1j

    # -- evaluation ---------------------------------------------------------------
    def __call__(self, z) -> np.ndarray:
        return self.evaluate(z)

    def evaluate(self, z) -> np.ndarray:
        z = _as_points(z, self.n)
        shape = z.shape[:-1]
        zf = z.reshape(-1, self.n)
        if self.is_zero():
            return np.zeros(shape, dtype=complex)
        vals = monomial_values(zf, self.exps) @ self.coeffs
        return vals.reshape(shape)

    def to_jax(self):
        """Return a JAX-traceable function of a real point x in R^{2n}."""
        import jax.numpy as jnp

        n = self.n
        exps = np.asarray(self.exps)
        coeffs = np.asarray(self.coeffs)
        maxdeg = int(exps.max()) if exps.size else 0

        def f(x):
            z = x[:n] + 1j * x[n:]
            w = jnp.concatenate([z, jnp.conj(z)])
            pows = [jnp.ones_like(w)]
            for _ in range(maxdeg):
                pows.append(pows[-1] * w)
            table = jnp.stack(pows)  # (maxdeg+1, 2n)
            if exps.shape[0] == 0:
                return jnp.zeros((), dtype=complex)
            mon = jnp.prod(table[exps, jnp.arange(2 * n)[None, :]], axis=1)
            return jnp.dot(mon, coeffs)

        return f


class HermitianPolynomial(ComplexPolynomial):
    """A real-valued polynomial: coefficient(a, b) == conj(coefficient(b, a))."""

    __slots__ = ()

    def __init__(self, n: int, exps=None, coeffs=None, *, normalize: bool = True, tol: float = 1e-12):
        super().__init__(n, exps, coeffs, normalize=normalize)
        bad = hermitian_violations(self, tol)
        if bad:
            raise ValueError(f"not Hermitian: term {bad[0]} has no matching conjugate term")

    @classmethod
    def from_poly(cls, p: ComplexPolynomial, tol: float = 1e-12) -> "HermitianPolynomial":
        if isinstance(p, HermitianPolynomial):
            return p
        return cls(p.n, p.exps, p.coeffs, normalize=False, tol=tol)

    @classmethod
    def hermitize(cls, p: ComplexPolynomial) -> "HermitianPolynomial":
        """Real part of an arbitrary polynomial."""
        r = p.real_part()
        return cls(r.n, r.exps, r.coeffs, normalize=False)

    def evaluate(self, z) -> np.ndarray:
        return super().evaluate(z).real

    def evaluate_complex(self, z) -> np.ndarray:
        return super().evaluate(z)


def _collect(exps: np.ndarray, coeffs: np.ndarray):
    if exps.shape[0] == 0:
        return exps.copy(), coeffs.copy()
    uniq, inv = np.unique(exps, axis=0, return_inverse=True)
    summed = np.zeros(uniq.shape[0], dtype=complex)
    np.add.at(summed, inv.reshape(-1), coeffs)
    scale = np.max(np.abs(summed)) if summed.size else 0.0
    keep = np.abs(summed) > _DROP_REL * scale
    if scale == 0.0:
        keep[:] = False
    return uniq[keep], summed[keep]


def hermitian_violations(p: ComplexPolynomial, tol: float = 1e-12) -> list:
    """Terms whose conjugate partner is missing or mismatched."""
    terms = p.terms
    scale = max([abs(c) for c in terms.values()], default=0.0)
    bad = []
    for (a, b), c in terms.items():
        partner = terms.get((b, a), 0.0)
        if abs(c - np.conj(partner)) > tol * max(scale, 1.0):
            bad.append(format_term(a, b, c))
    return bad


def monomial_values(z: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """Matrix of z^alpha conj(z)^beta, shape (points, monomials)."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    w = np.concatenate([z, np.conj(z)], axis=-1)
    maxdeg = int(exps.max()) if exps.size else 0
    table = np.empty((maxdeg + 1,) + w.shape, dtype=complex)
    table[0] = 1.0
    for k in range(1, maxdeg + 1):
        table[k] = table[k - 1] * w
    out = np.ones((w.shape[0], exps.shape[0]), dtype=complex)
    for v in range(2 * n):
        out *= table[exps[:, v], :, v].T
    return out


def all_exponents(n: int, degree: int) -> np.ndarray:
    """All (alpha, beta) with |alpha| + |beta| <= degree, graded order."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            out.append(prefix)
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], degree, 2 * n)
    arr = np.array(out, dtype=np.int64).reshape(-1, 2 * n)
    order = np.lexsort(tuple(arr[:, ::-1].T) + (arr.sum(axis=1),))
    return arr[order]


def hermitian_monomials(n: int, degree: int) -> list[HermitianPolynomial]:
    """Real spanning set: z^a zb^a, Re(z^a zb^b), Im(z^a zb^b) for a != b."""
    exps = all_exponents(n, degree)
    seen = set()
    out = []
    for e in exps:
        a, b = tuple(e[:n]), tuple(e[n:])
        if (a, b) in seen:
            continue
        seen.add((a, b))
        seen.add((b, a))
        m = ComplexPolynomial.monomial(n, a, b)
        if a == b:
            out.append(HermitianPolynomial.from_poly(m))
        else:
            out.append(HermitianPolynomial.from_poly(m.real_part()))
            out.append(HermitianPolynomial.from_poly(m.imag_part()))
    return out


# -- forms ---------------------------------------------------------------------


def i_ddbar(u: ComplexPolynomial) -> list[list[ComplexPolynomial]]:
    """Entries u_{j kbar} of i ddbar u (the factor i is implicit in the form)."""
    n = u.n
    return [[u.d(j + 1).dbar(k + 1) for k in range(n)] for j in range(n)]


def levi_matrix(u: ComplexPolynomial, z) -> np.ndarray:
    """Complex Hessian u_{j kbar} evaluated at points, shape (..., n, n)."""
    z = _as_points(z, u.n)
    H = i_ddbar(u)
    return np.stack([np.stack([H[j][k](z) for k in range(u.n)], -1) for j in range(u.n)], -2)


def gradient(u: ComplexPolynomial, z) -> np.ndarray:
    """Holomorphic gradient (u_1..u_n) at points."""
    z = _as_points(z, u.n)
    return np.stack([u.d(j + 1)(z) for j in range(u.n)], -1)


def real_gradient(u: ComplexPolynomial, z) -> np.ndarray:
    """Euclidean gradient in (x, y) ordering, for real-valued u."""
    g = gradient(u, z)
    return np.concatenate([2 * g.real, -2 * g.imag], axis=-1)


def dc_polynomials(u: ComplexPolynomial) -> list[ComplexPolynomial]:
    """Components of d^c u = i(dbar u - d u) on (dx_1..dx_n, dy_1..dy_n)."""
    n = u.n
    cx = [(u.dbar(j + 1) - u.d(j + 1)) * 1j for j in range(n)]
    cy = [u.d(j + 1) + u.dbar(j + 1) for j in range(n)]
    return cx + cy


def dc_form(u: ComplexPolynomial, z) -> np.ndarray:
    """Real covector d^c u at points, shape (..., 2n)."""
    z = _as_points(z, u.n)
    return np.stack([c(z).real for c in dc_polynomials(u)], -1)


def exterior_derivative(covector: Sequence[ComplexPolynomial]) -> list[list[ComplexPolynomial]]:
    """Antisymmetric matrix (d a)_{kl} = d_k a_l - d_l a_k in real coordinates."""
    m = len(covector)
    out = [[None] * m for _ in range(m)]
    for k in range(m):
        for l in range(m):
            out[k][l] = covector[l].real_partial(k) - covector[k].real_partial(l)
    return out


def two_form_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Real-coordinate matrix of i * sum c_{jk} dz_j ^ dzbar_k.

    ``coeffs`` has shape (..., n, n).  The form evaluated on real vectors X, Y
    is ``X^T M Y``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[-1]
    # dz_j(e_a): e_{x_j} -> 1, e_{y_j} -> i
    E = np.concatenate([np.eye(n), 1j * np.eye(n)], axis=0)  # (2n, n)
    A = E @ coeffs @ np.conj(E).T  # sum c dz_j(X) dzbar_k(Y)
    M = 1j * (A - np.swapaxes(A, -1, -2))
    return M.real


def ddbar_real_matrix(u: ComplexPolynomial, z) -> np.ndarray:
    """Real 2-form matrix of i ddbar u at points."""
    return two_form_matrix(levi_matrix(u, z))


def bordered_matrix(u: ComplexPolynomial, z) -> np.ndarray:
    """[[u, u_{jbar}], [u_i, u_{i jbar}]] at points, shape (..., n+1, n+1)."""
    z = _as_points(z, u.n)
    n = u.n
    shape = z.shape[:-1]
    B = np.empty(shape + (n + 1, n + 1), dtype=complex)
    B[..., 0, 0] = u.evaluate(z) if not isinstance(u, HermitianPolynomial) else u.evaluate_complex(z)
    for j in range(n):
        B[..., 0, j + 1] = u.dbar(j + 1)(z)
        B[..., j + 1, 0] = u.d(j + 1)(z)
    B[..., 1:, 1:] = levi_matrix(u, z)
    return B


def bordered_det(u: ComplexPolynomial, z, g_ambient=None) -> np.ndarray:
    """Determinant of the bordered complex Hessian of u at points."""
    if g_ambient is not None:
        g = np.asarray(g_ambient, dtype=complex)
        if np.min(np.linalg.eigvalsh(0.5 * (g + np.conj(np.swapaxes(g, -1, -2))))) <= 0:
            raise ValueError("ambient metric is not positive definite")
    return np.linalg.det(bordered_matrix(u, z))


# -- formatting ------------------------------------------------------------------


def _format_coeff(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return repr(float(c.real))
    if c.real == 0:
        return f"({float(c.imag)!r}i)"
    sign = "+" if c.imag >= 0 else "-"
    return f"({float(c.real)!r}{sign}{abs(float(c.imag))!r}i)"


def format_term(alpha: Iterable[int], beta: Iterable[int], c: complex) -> str:
    parts = [_format_coeff(c)]
    for j, a in enumerate(alpha):
        if a:
            parts.append(f"z{j + 1}" + (f"^{a}" if a > 1 else ""))
    for j, b in enumerate(beta):
        if b:
            parts.append(f"conj(z{j + 1})" + (f"^{b}" if b > 1 else ""))
    return " * ".join(parts)


def format_polynomial(p: ComplexPolynomial) -> str:
    if p.is_zero():
        return "0"
    return " + ".join(format_term(a, b, c) for (a, b), c in p.terms.items())


# -- literal parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)(?P<imag>i)?"
    r"|(?P<conj>conj\(\s*z(?P<cidx>\d+)\s*\))"
    r"|(?P<abs>\|\s*z(?P<aidx>\d+)\s*\|)"
    r"|z(?P<zidx>\d+)"
    r"|(?P<i>i)(?![A-Za-z0-9])"
    r"|(?P<op>[-+*^()]))"
)


class PolynomialSyntaxError(ValueError):
    """Malformed polynomial literal; ``pos`` is the character offset."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at column {pos + 1}")
        self.pos = pos


def _tokenize(text: str):
    pos = 0
    toks = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise PolynomialSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}", pos)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        toks.append((m, start))
        pos = m.end()
    return toks


def parse_polynomial(text: str, n: int) -> ComplexPolynomial:
    """Parse a literal such as ``"0.5 * z1^2 * conj(z1) + |z2|^2 - 1"``.

    Grammar (whitespace-insensitive)::

        expr   := ['+'|'-'] term (('+'|'-') term)*
        term   := factor ('*' factor)*
        factor := atom ['^' INT]
        atom   := NUMBER ['i'] | 'i' | 'z'K | 'conj(z'K')' | '|z'K'|' | '(' expr ')'

    ``|zK|`` stands for the modulus, so only even powers ``|zK|^2m`` are
    polynomial; odd powers are rejected.
    """
    toks = _tokenize(text)
    state = {"k": 0}

    def peek():
        return toks[state["k"]] if state["k"] < len(toks) else (None, len(text))

    def take():
        t = peek()
        state["k"] += 1
        return t

    def expect_op(op):
        m, pos = take()
        if m is None or m.group("op") != op:
            raise PolynomialSyntaxError(f"expected {op!r}", pos)

    def var_index(s, pos):
        j = int(s)
        if not 1 <= j <= n:
            raise PolynomialSyntaxError(f"variable z{j} outside z1..z{n}", pos)
        return j

    def atom():
        m, pos = take()
        if m is None:
            raise PolynomialSyntaxError("unexpected end of literal", pos)
        if m.group("num") is not None:
            v = float(m.group("num"))
            return ComplexPolynomial.constant(n, 1j * v if m.group("imag") else v), None
        if m.group("i") is not None:
            return ComplexPolynomial.constant(n, 1j), None
        if m.group("zidx") is not None:
            return ComplexPolynomial.z(n, var_index(m.group("zidx"), pos)), None
        if m.group("conj") is not None:
            return ComplexPolynomial.zbar(n, var_index(m.group("cidx"), pos)), None
        if m.group("abs") is not None:
            return None, var_index(m.group("aidx"), pos)
        if m.group("op") == "(":
            e = expr()
            expect_op(")")
            return e, None
        raise PolynomialSyntaxError(f"unexpected {m.group(0).strip()!r}", pos)

    def factor():
        base, absidx = atom()
        m, pos = peek()
        power = 1
        if m is not None and m.group("op") == "^":
            take()
            m2, pos2 = take()
            if m2 is None or m2.group("num") is None or m2.group("imag") or not m2.group("num").isdigit():
                raise PolynomialSyntaxError("exponent must be a non-negative integer", pos2)
            power = int(m2.group("num"))
        if absidx is not None:
            if power % 2:
                raise PolynomialSyntaxError(f"odd power of |z{absidx}| is not polynomial", pos)
            sq = ComplexPolynomial.z(n, absidx) * ComplexPolynomial.zbar(n, absidx)
            return sq ** (power // 2)
        return base**power

    def term():
        out = factor()
        while True:
            m, _ = peek()
            if m is not None and m.group("op") == "*":
                take()
                out = out * factor()
            else:
                return out

    def expr():
        m, _ = peek()
        sign = 1.0
        if m is not None and m.group("op") in ("+", "-"):
            take()
            sign = -1.0 if m.group("op") == "-" else 1.0
        out = term() * sign
        while True:
            m, _ = peek()
            if m is not None and m.group("op") in ("+", "-"):
                take()
                t = term()
                out = out + t if m.group("op") == "+" else out - t
            else:
                return out

    if not text.strip():
        raise PolynomialSyntaxError("empty literal", 0)
    result = expr()
    m, pos = peek()
    if m is not None:
        raise PolynomialSyntaxError(f"trailing input {m.group(0).strip()!r}", pos)
    return result


def parse_hermitian(text: str, n: int) -> HermitianPolynomial:
    """Parse a literal that must define a real-valued polynomial."""
    p = parse_polynomial(text, n)
    bad = hermitian_violations(p)
    if bad:
        raise ValueError(f"non-Hermitian literal: offending term {bad[0]}")
    return HermitianPolynomial.from_poly(p)
