"""
Ternary quadratic forms over Z: discriminants, the split/non-split sign chi_p,
exact p-adic local densities, solubility, rational points and counts of points
of bounded height on a single conic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

from .arith import (divisors, factor_integer_items, fraction_valuation, jacobi,
                    valuation)
from .errors import (InternalError, InvalidArgument, RankError, ResourceLimit,
                     Unsupported)

Point = tuple[int, int, int]


@dataclass(frozen=True)
class TernaryQuadraticForm:
    """Q = a x0^2 + b x0x1 + c x1^2 + d x0x2 + e x1x2 + f x2^2"""

    a: int
    b: int
    c: int
    d: int
    e: int
    f: int

    def __post_init__(self):
        for name in "abcdef":
            object.__setattr__(self, name, int(getattr(self, name)))

    @classmethod
    def parse(cls, text: str) -> "TernaryQuadraticForm":
        parts = text.replace(",", " ").split()
        if len(parts) != 6:
            raise InvalidArgument(f"a form needs 6 integers 'a b c d e f', got {len(parts)}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise InvalidArgument(f"non-integer coefficient in {text!r}") from exc

    @classmethod
    def diagonal(cls, a: int, b: int, c: int) -> "TernaryQuadraticForm":
        return cls(a, 0, b, 0, 0, c)

    @classmethod
    def from_hessian(cls, H) -> "TernaryQuadraticForm":
        H = [[int(x) for x in row] for row in H]
        if H[0][0] % 2 or H[1][1] % 2 or H[2][2] % 2:
            raise InvalidArgument("Hessian needs even diagonal")
        return cls(H[0][0] // 2, H[0][1], H[1][1] // 2, H[0][2], H[1][2], H[2][2] // 2)

    def coeffs(self) -> tuple[int, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    def __str__(self):
        return " ".join(map(str, self.coeffs()))

    def __call__(self, x0, x1, x2):
        return (self.a * x0 * x0 + self.b * x0 * x1 + self.c * x1 * x1
                + self.d * x0 * x2 + self.e * x1 * x2 + self.f * x2 * x2)

    def norm(self) -> int:
        return max(abs(c) for c in self.coeffs())

    def hessian(self) -> list[list[int]]:
        a, b, c, d, e, f = self.coeffs()
        return [[2 * a, b, d], [b, 2 * c, e], [d, e, 2 * f]]

    def gram(self) -> list[list[Fraction]]:
        return [[Fraction(x, 2) for x in row] for row in self.hessian()]

    def gradient(self, x) -> tuple[int, int, int]:
        H = self.hessian()
        return tuple(sum(H[i][j] * x[j] for j in range(3)) for i in range(3))

    def compose(self, A) -> "TernaryQuadraticForm":
        """The form y -> Q(A y) for an integer matrix A."""
        H = self.hessian()
        At = [[A[j][i] for j in range(3)] for i in range(3)]
        HA = [[sum(H[i][k] * A[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
        H2 = [[sum(At[i][k] * HA[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
        return TernaryQuadraticForm.from_hessian(H2)

    def scale(self, lam: int) -> "TernaryQuadraticForm":
        return TernaryQuadraticForm(*(lam * c for c in self.coeffs()))


def disc_ternary(Q: TernaryQuadraticForm) -> int:
    """-(1/2) det of the Hessian, equivalently -4 det(Gram)."""
    a, b, c, d, e, f = Q.coeffs()
    det_h = (2 * a * (4 * c * f - e * e) - b * (2 * b * f - d * e) + d * (b * e - 2 * c * d))
    assert det_h % 2 == 0
    return -det_h // 2


def rank_mod_p(Q: TernaryQuadraticForm, p: int) -> int:
    """Rank of the Gram matrix over F_p for odd p."""
    if p == 2:
        raise Unsupported("rank mod 2 of a quadratic form is not the Gram rank")
    return _rank_mod(Q.hessian(), p)


def _rank_mod(M, p: int) -> int:
    rows = [[int(x) % p for x in row] for row in M]
    rank = 0
    ncols = len(rows[0])
    for col in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = pow(rows[rank][col], -1, p)
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                k = rows[r][col] * inv % p
                rows[r] = [(x - k * y) % p for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def padic_diagonalize(Q: TernaryQuadraticForm, p: int) -> list[Fraction]:
    """Diagonal entries of a form equivalent to Q over Z_p (p odd).

    Every transformation used is invertible over the p-local integers, so
    the valuations and unit classes of the result describe Q itself.
    """
    if p == 2:
        raise Unsupported("p-adic diagonalization needs odd p")
    M = Q.gram()
    n = 3

    def val(x):
        return math.inf if x == 0 else fraction_valuation(x, p)

    for k in range(n):
        best = None
        for i in range(k, n):
            for j in range(i, n):
                v = val(M[i][j])
                if v != math.inf and (best is None or v < best[0]
                                      or (v == best[0] and i == j and best[1] != best[2])):
                    best = (v, i, j)
        if best is None:
            break
        v, i, j = best
        if i != j:
            if val(M[i][i]) > v:
                # x_i -> x_i + x_j puts a unit multiple of p^v on the diagonal
                for r in range(n):
                    M[r][i] += M[r][j]
                for r in range(n):
                    M[i][r] += M[j][r]
        if i != k:
            M[i], M[k] = M[k], M[i]
            for row in M:
                row[i], row[k] = row[k], row[i]
        piv = M[k][k]
        for r in range(k + 1, n):
            if M[r][k]:
                ratio = M[r][k] / piv
                for cidx in range(n):
                    M[r][cidx] -= ratio * M[k][cidx]
                for ridx in range(n):
                    M[ridx][r] -= ratio * M[ridx][k]
    return [M[i][i] for i in range(n)]


def _unit_mod(x: Fraction, p: int) -> int:
    x = Fraction(x)
    return x.numerator * pow(x.denominator, -1, p) % p


def chi_p(Q: TernaryQuadraticForm, p: int) -> int:
    """+1 if the rank-2 reduction of Q mod p is a pair of F_p-rational lines, else -1."""
    if p == 2:
        raise Unsupported("chi_p needs odd p")
    if rank_mod_p(Q, p) != 2:
        raise RankError(f"Q has rank {rank_mod_p(Q, p)} mod {p}, need 2")
    diag = padic_diagonalize(Q, p)
    units = [u for u in diag if u != 0 and fraction_valuation(u, p) == 0]
    assert len(units) == 2
    return jacobi(-_unit_mod(units[0] * units[1], p), p)


@dataclass(frozen=True)
class LocalDensityReport:
    p: int
    sigma: Fraction
    method: str
    chi: int | None
    v_delta: int


def sigma_p_closed(Q: TernaryQuadraticForm, p: int) -> LocalDensityReport:
    """Exact local density for odd p when Q has rank at least 2 mod p."""
    if p == 2:
        raise Unsupported("p = 2: use sigma_p_oracle")
    delta = disc_ternary(Q)
    if delta == 0:
        raise InvalidArgument("degenerate form")
    v = valuation(delta, p)
    if v == 0:
        return LocalDensityReport(p, 1 - Fraction(1, p * p), "closed-form", None, 0)
    r = rank_mod_p(Q, p)
    if r < 2:
        raise Unsupported(f"rank {r} mod {p}: use sigma_p_oracle")
    chi = chi_p(Q, p)
    q = Fraction(1, p)
    head = (1 - q) * (1 + chi)
    if v % 2:
        sigma = (1 - q) * ((1 + chi) + Fraction(v - 1, 2) * head)
    else:
        sigma = (1 - q) * ((1 + chi) + Fraction(v - 2, 2) * head + (1 - chi * q))
    return LocalDensityReport(p, sigma, "closed-form", chi, v)


MAX_ORACLE_DEPTH = 64


def sigma_p_oracle(Q: TernaryQuadraticForm, p: int, n: int) -> Fraction:
    """N*(p^n) / p^(2n): primitive solutions of Q = 0 mod p^n, by Hensel digit recursion."""
    if n < 1:
        raise InvalidArgument("depth must be at least 1")
    if n > MAX_ORACLE_DEPTH:
        raise ResourceLimit(f"depth {n} exceeds {MAX_ORACLE_DEPTH}")
    quad = Q.coeffs()
    total = 0
    for r in _residues(p):
        if r == (0, 0, 0):
            continue
        total += _lift_count(quad, (0, 0, 0), 0, p, n, r)
    return Fraction(total, p ** (2 * n))


def _residues(p):
    return [(i, j, k) for i in range(p) for j in range(p) for k in range(p)]


def _poly_value(quad, lin, const, x):
    a, b, c, d, e, f = quad
    x0, x1, x2 = x
    return (a * x0 * x0 + b * x0 * x1 + c * x1 * x1 + d * x0 * x2 + e * x1 * x2
            + f * x2 * x2 + lin[0] * x0 + lin[1] * x1 + lin[2] * x2 + const)


def _poly_grad(quad, lin, x):
    a, b, c, d, e, f = quad
    x0, x1, x2 = x
    return (2 * a * x0 + b * x1 + d * x2 + lin[0],
            b * x0 + 2 * c * x1 + e * x2 + lin[1],
            d * x0 + e * x1 + 2 * f * x2 + lin[2])


def _lift_count(quad, lin, const, p, n, r):
    """Number of x mod p^n with x = r mod p and P(x) = 0 mod p^n."""
    if P_value_mod(quad, lin, const, r, p) != 0:
        return 0
    grad = _poly_grad(quad, lin, r)
    if any(g % p for g in grad):
        return p ** (2 * (n - 1))
    if n == 1:
        return 1
    # P(r + p z) = P(r) + p grad.z + p^2 quad(z)
    new_quad = tuple(p * p * c for c in quad)
    new_lin = tuple(p * g for g in grad)
    new_const = _poly_value(quad, lin, const, r)
    return _count_z(new_quad, new_lin, new_const, p, n, n - 1)


def P_value_mod(quad, lin, const, x, p):
    return _poly_value(quad, lin, const, x) % p


def _count_z(quad, lin, const, p, n, m):
    """Number of z mod p^m with P(z) = 0 mod p^n, where P mod p^n depends on z mod p^m."""
    coeffs = list(quad) + list(lin) + [const]
    nz = [x for x in coeffs if x]
    c = min(valuation(x, p) for x in nz) if nz else math.inf
    if c >= n:
        return p ** (3 * m)
    # P = p^c P'; need P' = 0 mod p^(n-c), z mod p^m with m >= n - c
    pc = p ** c
    quad = tuple(x // pc for x in quad)
    lin = tuple(x // pc for x in lin)
    const //= pc
    n2 = n - c
    extra = m - n2
    assert extra >= 0
    sub = 0
    for r in _residues(p):
        sub += _lift_count(quad, lin, const, p, n2, r)
    return sub * p ** (3 * extra)


def sigma_p(Q: TernaryQuadraticForm, p: int) -> LocalDensityReport:
    """Closed form when available, otherwise the oracle at a stabilized depth."""
    if p != 2:
        try:
            return sigma_p_closed(Q, p)
        except Unsupported:
            pass
    delta = disc_ternary(Q)
    v = valuation(delta, p)
    depth = v + (3 if p == 2 else 2)
    val = sigma_p_oracle(Q, p, depth)
    while True:
        nxt = sigma_p_oracle(Q, p, depth + 1)
        if nxt == val:
            break
        depth += 1
        val = nxt
    return LocalDensityReport(p, val, "oracle", None, v)


def mp_count(A: int, B: int, p: int) -> int:
    """Number of (x0, x1, x2) mod p with x2 != 0 and A x0^2 + B x1^2 = x2^2."""
    if p == 2 or (2 * A * B) % p == 0:
        raise InvalidArgument(f"need p not dividing 2AB, got p={p}, A={A}, B={B}")
    return (p - 1) * (p - jacobi(-A * B, p))


# ------------------------------------------------------------- solubility

def hilbert_symbol(a: int, b: int, p: int) -> int:
    """Hilbert symbol (a, b)_p for nonzero integers; p = -1 is the real place."""
    if a == 0 or b == 0:
        raise InvalidArgument("Hilbert symbol of 0")
    if p == -1:
        return -1 if a < 0 and b < 0 else 1
    alpha, u = valuation(a, p), a // p ** valuation(a, p)
    beta, v = valuation(b, p), b // p ** valuation(b, p)
    if p == 2:
        def eps(x):
            return ((x - 1) // 2) % 2

        def omega(x):
            return ((x * x - 1) // 8) % 2

        e = (eps(u) * eps(v) + alpha * omega(v) + beta * omega(u)) % 2
        return -1 if e else 1
    sign = -1 if (alpha * beta * ((p - 1) // 2)) % 2 else 1
    return sign * jacobi(u, p) ** beta * jacobi(v, p) ** alpha


def _squarefree_part(n: int) -> int:
    sign = -1 if n < 0 else 1
    out = 1
    for p, e in factor_integer_items(n):
        if e % 2:
            out *= p
    return sign * out


def rational_diagonal(Q: TernaryQuadraticForm) -> tuple[int, int, int]:
    """Squarefree integers (a, b, c) with Q equivalent over Q to a x^2 + b y^2 + c z^2."""
    M = [row[:] for row in Q.gram()]
    n = 3
    diag = []
    for k in range(n):
        if M[k][k] == 0:
            j = next((j for j in range(k + 1, n) if M[j][j] != 0), None)
            if j is not None:
                M[j], M[k] = M[k], M[j]
                for row in M:
                    row[j], row[k] = row[k], row[j]
            else:
                j = next((j for j in range(k + 1, n) if M[k][j] != 0), None)
                if j is not None:
                    for r in range(n):
                        M[r][k] += M[r][j]
                    for r in range(n):
                        M[k][r] += M[j][r]
        piv = M[k][k]
        diag.append(piv)
        if piv == 0:
            continue
        for r in range(k + 1, n):
            if M[r][k]:
                ratio = M[r][k] / piv
                for cidx in range(n):
                    M[r][cidx] -= ratio * M[k][cidx]
                for ridx in range(n):
                    M[ridx][r] -= ratio * M[ridx][k]
    out = []
    for x in diag:
        if x == 0:
            out.append(0)
        else:
            out.append(_squarefree_part(x.numerator * x.denominator))
    return tuple(out)


def is_soluble(Q: TernaryQuadraticForm) -> bool:
    """Hasse-Minkowski: real indefiniteness plus Hilbert symbols at the bad primes."""
    if disc_ternary(Q) == 0:
        raise InvalidArgument("degenerate form")
    a, b, c = rational_diagonal(Q)
    if (a > 0) == (b > 0) == (c > 0):
        return False
    primes = {2} | {p for p, _ in factor_integer_items(a * b * c)}
    return all(hilbert_symbol(-a * c, -b * c, p) == 1 for p in primes)


# ------------------------------------------------------------ rational points

def canonical(x: Sequence[int]) -> Point:
    """Primitive integer representative with positive first nonzero coordinate."""
    g = math.gcd(*x)
    if g == 0:
        raise InvalidArgument("the zero vector is not a projective point")
    y = [int(v) // g for v in x]
    first = next(v for v in y if v)
    if first < 0:
        y = [-v for v in y]
    return tuple(y)


SMALL_SEARCH_RADIUS = 40


def _box_solutions(Q: TernaryQuadraticForm, R: int) -> list[Point]:
    """All canonical points with max(|x0|,|x1|) <= R, any x2, via the quadratic in x2."""
    a, b, c, d, e, f = Q.coeffs()
    rng = np.arange(-R, R + 1, dtype=np.int64)
    x0, x1 = np.meshgrid(rng, rng, indexing="ij")
    x0 = x0.ravel()
    x1 = x1.ravel()
    lin = d * x0 + e * x1
    const = a * x0 * x0 + b * x0 * x1 + c * x1 * x1
    found = set()
    if f == 0:
        ok = lin != 0
        num = -const[ok]
        den = lin[ok]
        good = num % den == 0
        for u, v, z in zip(x0[ok][good], x1[ok][good], (num[good] // den[good])):
            if (u, v) != (0, 0):
                found.add(canonical((int(u), int(v), int(z))))
        zero = (lin == 0) & (const == 0)
        for u, v in zip(x0[zero], x1[zero]):
            if (u, v) != (0, 0):
                found.add(canonical((int(u), int(v), 0)))
        found.add((0, 0, 1))
    else:
        disc = lin * lin - 4 * f * const
        ok = disc >= 0
        root = np.sqrt(disc[ok].astype(np.float64)).round().astype(np.int64)
        for delta in (-1, 0, 1):
            r = root + delta
            hit = (r >= 0) & (r * r == disc[ok])
            for u, v, rr, li in zip(x0[ok][hit], x1[ok][hit], r[hit], lin[ok][hit]):
                for sgn in (1, -1):
                    num = -int(li) + sgn * int(rr)
                    if num % (2 * f) == 0:
                        z = num // (2 * f)
                        if (u, v, z) != (0, 0, 0):
                            found.add(canonical((int(u), int(v), z)))
    return sorted(found)


def _box_fits_int64(Q: TernaryQuadraticForm, R: int) -> bool:
    return 8 * (Q.norm() * R) ** 2 < 2 ** 50


def find_point(Q: TernaryQuadraticForm) -> Point | None:
    """A rational point of smallest max-norm found, or None if Q has no rational point.

    Small forms use an exhaustive search ordered by height; forms too large
    for that fall back to Legendre descent.
    """
    if not is_soluble(Q):
        return None
    R = SMALL_SEARCH_RADIUS
    if _box_fits_int64(Q, R):
        pts = [x for x in _box_solutions(Q, R) if max(map(abs, x)) <= R]
        if pts:
            return min(pts, key=lambda x: (max(map(abs, x)), x))
    x = _descent_point(Q)
    if x is None or Q(*x) != 0:
        raise InternalError(f"no point found on the soluble form {Q}")
    return x


def _descent_point(Q: TernaryQuadraticForm) -> Point | None:
    from sympy.solvers.diophantine.diophantine import diop_ternary_quadratic
    X, Y, Z = sympy.symbols("X Y Z", integer=True)
    expr = Q(X, Y, Z)
    if Q.f == 0:
        return (0, 0, 1)
    sol = diop_ternary_quadratic(expr)
    if sol is None or sol[0] is None:
        return None
    return canonical([int(v) for v in sol])


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def transition_matrix(xi: Sequence[int]) -> list[list[int]]:
    """Unimodular integer matrix whose middle column is the primitive vector xi."""
    x, y, z = (int(v) for v in xi)
    if math.gcd(x, y, z) != 1:
        raise InvalidArgument(f"{tuple(xi)} is not primitive")
    if (x, y, z) == (0, 1, 0):
        return [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    g, p, q = _xgcd(x, y)
    if g == 0:
        # xi = (0, 0, +-1)
        return [[1, 0, 0], [0, 0, 1], [0, z, 0]]
    xp, yp = x // g, y // g
    _, r, s = _xgcd(g, z)
    cols = [[x, y, z], [-q, p, 0], [-xp * s, -yp * s, r]]
    A = [[cols[1][i], cols[0][i], cols[2][i]] for i in range(3)]
    det = sympy.Matrix(A).det()
    assert abs(det) == 1
    return A


@dataclass(frozen=True)
class HeightSpec:
    """H(x) = max |A_inf x| on primitive integer representatives."""

    A_inf: tuple = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    exact: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = tuple(tuple(Fraction(v) for v in row) for row in self.A_inf)
        if sympy.Matrix(A).det() == 0:
            raise InvalidArgument("height transform must be invertible")
        object.__setattr__(self, "exact", A)

    @classmethod
    def diagonal(cls, w0, w1, w2) -> "HeightSpec":
        return cls(((w0, 0, 0), (0, w1, 0), (0, 0, w2)))

    def float_matrix(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.exact])

    def __call__(self, x: Sequence[int]) -> Fraction:
        return max(abs(sum(row[j] * x[j] for j in range(3))) for row in self.exact)

    def compose(self, U) -> "HeightSpec":
        """The height y -> H(U y)."""
        A = self.exact
        return HeightSpec(tuple(tuple(sum(A[i][k] * U[k][j] for k in range(3))
                                      for j in range(3)) for i in range(3)))


def _boundary_min(MP, MQ, MR) -> float:
    """Lower bound for min ||u^2 MP + uv MQ + v^2 MR||_inf on max(|u|,|v|) = 1.

    On an edge the norm is the upper envelope of |phi_i(w)| for quadratics phi_i,
    so its minimum sits at an endpoint, a vertex of some phi_i, or a crossing
    |phi_i| = |phi_j|. All candidates are evaluated; a relative margin absorbs
    rounding.
    """
    best = math.inf
    scale = float(np.abs(MP).max() + np.abs(MQ).max() + np.abs(MR).max())
    # edge u = 1: phi = MP + w MQ + w^2 MR; edge v = 1: phi = w^2 MP + w MQ + MR.
    # The other two edges follow from Phi(-u,-v) = Phi(u,v).
    for c0, c1, c2 in ((MP, MQ, MR), (MR, MQ, MP)):
        cands = [-1.0, 1.0]
        for i in range(3):
            if c2[i] != 0:
                cands.append(-c1[i] / (2 * c2[i]))
            for j in range(i + 1, 3):
                for sign in (1.0, -1.0):
                    q = [c2[i] - sign * c2[j], c1[i] - sign * c1[j], c0[i] - sign * c0[j]]
                    if q[0] != 0:
                        roots = np.roots(q)
                        cands.extend(float(r.real) for r in roots)
                    elif q[1] != 0:
                        cands.append(-q[2] / q[1])
        w = np.array([x for x in cands if -1.0 <= x <= 1.0])
        vals = np.abs(np.outer(np.ones_like(w), c0) + np.outer(w, c1) + np.outer(w * w, c2)).max(axis=1)
        best = min(best, float(vals.min()))
    lower = best - 1e-9 * scale
    if not lower > 0:
        raise ResourceLimit("could not certify the parameter box")
    return 0.999 * lower


def _hnf_lattice(b: int, e: int, g: int) -> tuple[int, int, int]:
    """Basis (h11, h12), (0, h22) of {(u, v) : b u + e v = 0 mod g} when gcd(b, e, g) = 1."""
    h11, x, _ = _xgcd(e, g)
    h22 = g // h11
    h12 = (-x * b) % h22 if h22 > 1 else 0
    return h11, h12, h22


def _split_modulus(g: int, c0: int) -> tuple[int, int]:
    """g = g1 * g2 with g2 supported on the primes of c0 and gcd(g1, c0) = 1."""
    g1, g2 = g, 1
    for p, _ in factor_integer_items(c0) if c0 else []:
        while g1 % p == 0:
            g1 //= p
            g2 *= p
    return g1, g2


MAX_RESIDUES = 4_000_000


def _residues_mod_prime_power(coef, p: int, j: int):
    """Pairs (u, v) mod p^j, not both divisible by p, with p^j | L(u,v) and p^j | R(u,v).

    Built digit by digit, so the work tracks the size of the answer rather than p^(2j).
    """
    a, b, d, e, f = coef
    U = np.zeros(1, dtype=object)
    V = np.zeros(1, dtype=object)
    m = 1
    digits = np.array([(x, y) for x in range(p) for y in range(p)], dtype=object)
    for i in range(j):
        U = (U[:, None] + m * digits[None, :, 0]).ravel()
        V = (V[:, None] + m * digits[None, :, 1]).ravel()
        m *= p
        if i == 0:
            keep = (U % p != 0) | (V % p != 0)
            U, V = U[keep], V[keep]
        keep = ((b * U + e * V) % m == 0) & ((a * U * U + d * U * V + f * V * V) % m == 0)
        U, V = U[keep], V[keep]
        if len(U) > MAX_RESIDUES:
            raise ResourceLimit(f"too many residue classes mod {p}^{j}")
    return U, V, m


def _residues_mod(coef, g2: int):
    """CRT-combined residue pairs mod g2 satisfying the divisibility conditions."""
    U = np.zeros(1, dtype=object)
    V = np.zeros(1, dtype=object)
    mod = 1
    for p, j in factor_integer_items(g2):
        Up, Vp, m = _residues_mod_prime_power(coef, p, j)
        # x = U mod `mod`, x = Up mod m
        t = pow(mod, -1, m)
        U = (U[:, None] + mod * (((Up[None, :] - U[:, None]) * t) % m)).ravel()
        V = (V[:, None] + mod * (((Vp[None, :] - V[:, None]) * t) % m)).ravel()
        mod *= m
        if len(U) > MAX_RESIDUES:
            raise ResourceLimit(f"too many residue classes mod {g2}")
    return U, V


def _parametrization(Q, H, A):
    """Q and H pulled back along A, and the quadratic map (u, v) -> A_inf y(u, v)."""
    Qp = Q.compose(A)
    a, b, c, d, e, f = Qp.coeffs()
    assert c == 0
    Hexact = H.compose(A)
    M = Hexact.float_matrix()
    MP = M @ np.array([b, -a, 0], dtype=float)
    MQ = M @ np.array([e, -d, b], dtype=float)
    MR = M @ np.array([0, -f, e], dtype=float)
    return Qp, Hexact, MP, MQ, MR


def _reduce_gauge(MP, MQ, MR, max_iter: int = 200):
    """Unimodular T, columns a reduced basis of Z^2 for the gauge ||Phi(z)||_inf.

    Only speed depends on the result: a skew parametrization makes the scanned
    box much larger than the region it contains.
    """
    def F(z):
        u, v = z
        return float(np.abs(u * u * MP + u * v * MQ + v * v * MR).max())

    def phi_coeffs(b1, b2):
        # Phi(b2 - k b1) = c0 + c1 k + c2 k^2 componentwise
        u1, v1 = b1
        u2, v2 = b2
        c0 = u2 * u2 * MP + u2 * v2 * MQ + v2 * v2 * MR
        c2 = u1 * u1 * MP + u1 * v1 * MQ + v1 * v1 * MR
        c1 = -(2 * u1 * u2 * MP + (u1 * v2 + u2 * v1) * MQ + 2 * v1 * v2 * MR)
        return c0, c1, c2

    b1, b2 = (1, 0), (0, 1)
    for _ in range(max_iter):
        if F(b2) < F(b1):
            b1, b2 = b2, b1
        c0, c1, c2 = phi_coeffs(b1, b2)
        cands = set()
        for i in range(3):
            if c2[i] != 0:
                cands.add(-c1[i] / (2 * c2[i]))
                cands.update(float(r.real) for r in np.roots([c2[i], c1[i], c0[i]]))
        best_k, best = 0, F(b2)
        for x in cands:
            if not math.isfinite(x) or abs(x) > 2 ** 52:
                continue
            for k in (math.floor(x), math.floor(x) + 1):
                val = F((b2[0] - k * b1[0], b2[1] - k * b1[1]))
                if val < best:
                    best_k, best = k, val
        if best_k == 0:
            break
        b2 = (b2[0] - best_k * b1[0], b2[1] - best_k * b1[1])
    T = ((b1[0], b2[0]), (b1[1], b2[1]))
    if abs(T[0][0] * T[1][1] - T[0][1] * T[1][0]) != 1:
        raise InternalError("gauge reduction lost unimodularity")
    return T


def points(Q: TernaryQuadraticForm, H: HeightSpec | None, B, as_array: bool = False):
    """Sorted canonical rational points on Q = 0 with H <= B (an (n, 3) array if as_array).

    A rational point is moved to (0:1:0); lines through it parametrize the conic
    by binary quadratics y(u, v). For each divisor g of the resultant G the pairs
    (u, v) with gcd of y equal to g lie in an explicit union of lattice cosets and
    in a box whose size follows from a certified lower bound on |y(u, v)|.
    """
    H = H or HeightSpec()
    if B < 1 or not is_soluble(Q):
        return np.zeros((0, 3), dtype=np.int64) if as_array else []
    xi = find_point(Q)
    A = transition_matrix(xi)
    Qp, Hexact, MP, MQ, MR = _parametrization(Q, H, A)
    T = _reduce_gauge(MP, MQ, MR)
    if T != ((1, 0), (0, 1)):
        # a unimodular change of (y0, y2) moves (u, v) to T (u, v)
        That = [[T[0][0], 0, T[0][1]], [0, 1, 0], [T[1][0], 0, T[1][1]]]
        A = [[sum(A[i][k] * That[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
        Qp, Hexact, MP, MQ, MR = _parametrization(Q, H, A)
    a, b, c, d, e, f = Qp.coeffs()
    G = a * e * e - b * d * e + f * b * b
    if G == 0:
        raise InternalError("degenerate parametrization")
    lam = _boundary_min(MP, MQ, MR)
    c0 = math.gcd(b, e)
    coef = (a, b, d, e, f)
    residue_cache = {}
    found = []
    for g in divisors(G):
        R = math.isqrt(int(float(B) * g / lam) + 1) + 1
        g1, g2 = _split_modulus(g, c0)
        h11, h12, h22 = _hnf_lattice(b, e, g1)
        if g2 > 1:
            if g2 not in residue_cache:
                residue_cache[g2] = _residues_mod(coef, g2)
            Ur, Vr = residue_cache[g2]
            if len(Ur) == 0:
                continue
            t = g1 * pow(g1, -1, g2)
            Ur, Vr = Ur * t, Vr * t
        else:
            Ur = np.zeros(1, dtype=object)
            Vr = np.zeros(1, dtype=object)
        H11, H12, H22 = g2 * h11, g2 * h12, g2 * h22
        # reduce coset representatives modulo the lattice basis
        jr = Ur // H11
        Ur = Ur - jr * H11
        Vr = (Vr - jr * H12) % H22
        found.extend(_scan(Qp, Hexact, B, g, R, Ur.astype(np.int64), Vr.astype(np.int64),
                           H11, H12, H22, MP, MQ, MR))
    if not found:
        return np.zeros((0, 3), dtype=np.int64) if as_array else []
    X = _canonical_rows(A, np.concatenate(found))
    distinct = len(np.unique(X, axis=0)) if X.dtype != object else len(set(map(tuple, X.tolist())))
    if distinct != len(X):
        raise InternalError("a point was counted twice")
    if as_array:
        return X
    return sorted(tuple(int(c) for c in row) for row in X.tolist())


def _apply(A, y):
    return [sum(A[i][j] * y[j] for j in range(3)) for i in range(3)]


def _scan(Qp, H, B, g, R, Ur, Vr, H11, H12, H22, MP, MQ, MR):
    """Points u = Ur + j H11, v = Vr + j H12 + k H22 with |u| <= R, 0 <= v <= R."""
    a, b, _, d, e, f = Qp.coeffs()
    C = max(abs(a), abs(b), abs(d), abs(e), abs(f), 1)
    big = 3 * C * R * R >= 2 ** 62 or H22 + R >= 2 ** 62
    jlo, jhi = -(R // H11) - 1, R // H11 + 1
    js = np.arange(jlo, jhi + 1, dtype=np.int64)
    ks = np.arange(0, R // H22 + 2, dtype=np.int64)
    # flatten (residue, j) pairs, then expand over k in chunks
    nres = len(Ur)
    out = []
    pair_chunk = max(1, 4_000_000 // len(ks))
    total_pairs = nres * len(js)
    for start in range(0, total_pairs, pair_chunk):
        idx = np.arange(start, min(total_pairs, start + pair_chunk), dtype=np.int64)
        ri, ji = idx // len(js), js[idx % len(js)]
        u = Ur[ri] + ji * H11
        inside = np.abs(u) <= R
        u, ri, ji = u[inside], ri[inside], ji[inside]
        if len(u) == 0:
            continue
        base = (Vr[ri] + ji * H12) % H22
        u = np.repeat(u, len(ks))
        v = np.repeat(base, len(ks)) + np.tile(ks, len(base)) * H22
        keep = (v <= R) & ((v > 0) | (u == 1))
        u, v = u[keep], v[keep]
        keep = np.gcd(u, v) == 1
        u, v = u[keep], v[keep]
        if big:
            u, v = u.astype(object), v.astype(object)
            Lv = b * u + e * v
            Rv = a * u * u + d * u * v + f * v * v
            gg = np.array([math.gcd(int(x), int(y)) for x, y in zip(Lv, Rv)], dtype=object)
        else:
            Lv = b * u + e * v
            Rv = a * u * u + d * u * v + f * v * v
            gg = np.gcd(Lv, Rv)
        keep = gg == g
        u, v = u[keep], v[keep]
        if len(u) == 0:
            continue
        uf, vf = u.astype(float), v.astype(float)
        vals = np.outer(uf * uf, MP) + np.outer(uf * vf, MQ) + np.outer(vf * vf, MR)
        hgt = np.abs(vals).max(axis=1) / g
        # rounding in hgt is far below this margin; only points inside it get an exact test
        err = 1e-10 * (uf * uf * np.abs(MP).max() + np.abs(uf * vf) * np.abs(MQ).max()
                       + vf * vf * np.abs(MR).max()) / g + 1e-10
        Bf = float(B)
        sure = hgt + err < Bf
        unsure = np.abs(hgt - Bf) <= err
        for idx in np.flatnonzero(unsure):
            y = _y_of(a, b, d, e, f, g, int(u[idx]), int(v[idx]))
            sure[idx] = H(y) <= B
        u, v = u[sure], v[sure]
        if len(u) == 0:
            continue
        if not big:
            Lv = b * u + e * v
            y0 = u * Lv // g
            y1 = -(a * u * u + d * u * v + f * v * v) // g
            y2 = v * Lv // g
            out.append(np.stack([y0, y1, y2], axis=1))
        else:
            out.append(np.array([_y_of(a, b, d, e, f, g, int(uu), int(vv))
                                 for uu, vv in zip(u, v)], dtype=object).reshape(-1, 3))
    return out


def _y_of(a, b, d, e, f, g, u, v):
    L = b * u + e * v
    return (u * L // g, -(a * u * u + d * u * v + f * v * v) // g, v * L // g)


def _canonical_rows(A, Y) -> np.ndarray:
    """Rows A y, already primitive, with the first nonzero coordinate made positive."""
    Amax = max(abs(x) for row in A for x in row)
    if Y.dtype != object and Amax * (int(np.abs(Y).max()) if len(Y) else 0) * 3 < 2 ** 62:
        X = Y @ np.array(A, dtype=np.int64).T
    else:
        X = Y.astype(object) @ np.array(A, dtype=object).T
    first = np.where(X[:, 0] != 0, X[:, 0], np.where(X[:, 1] != 0, X[:, 1], X[:, 2]))
    X = np.where((first < 0)[:, None], -X, X)
    return X


def count_points(Q: TernaryQuadraticForm, H: HeightSpec | None, B) -> int:
    """Number of rational points on Q = 0 of height at most B; 0 when Q is insoluble."""
    return len(points(Q, H, B, as_array=True))


def brute_force_points(Q: TernaryQuadraticForm, B: int) -> list[Point]:
    """Canonical points with max-norm <= B by direct search; an oracle for tests."""
    if B < 1:
        return []
    if not _box_fits_int64(Q, B):
        raise ResourceLimit("brute force box too large for int64")
    return [x for x in _box_solutions(Q, B) if max(map(abs, x)) <= B]


# ------------------------------------------------------- archimedean density

def omega_inf(Q: TernaryQuadraticForm, H: HeightSpec | None = None, quad_steps: int = 4096) -> float:
    """Real density of the conic for the height H, by the midpoint rule on a periodic
    parametrization of the real locus. Zero when the real locus is empty."""
    H = H or HeightSpec()
    G = np.array([[float(x) for x in row] for row in Q.gram()])
    lam, V = np.linalg.eigh(G)
    if np.all(lam > 0) or np.all(lam < 0):
        return 0.0
    pos = lam > 0
    lone = int(np.flatnonzero(pos)[0]) if pos.sum() == 1 else int(np.flatnonzero(~pos)[0])
    others = [i for i in range(3) if i != lone]
    order = others + [lone]
    lam = lam[order]
    V = V[:, order]
    scale = 1.0 / np.sqrt(np.abs(lam))
    phi = (np.arange(quad_steps) + 0.5) * (2 * np.pi / quad_steps)
    cos, sin = np.cos(phi), np.sin(phi)
    gam = V @ np.vstack([cos * scale[0], sin * scale[1], np.full_like(phi, scale[2])])
    dgam = V @ np.vstack([-sin * scale[0], cos * scale[1], np.zeros_like(phi)])
    grad = 2 * G @ gam
    det = np.abs(np.einsum("ij,ij->j", np.cross(gam.T, dgam.T).T, grad))
    hgt = np.abs(H.float_matrix() @ gam).max(axis=0)
    integrand = det / ((grad * grad).sum(axis=0) * hgt)
    return float(integrand.sum() * (2 * np.pi / quad_steps))


@dataclass(frozen=True)
class PeyreProduct:
    omega_inf: float
    finite: Fraction
    p_max: int

    @property
    def value(self) -> float:
        return self.omega_inf * float(self.finite)


def peyre_product(Q: TernaryQuadraticForm, H: HeightSpec | None = None, p_max: int = 50,
                  quad_steps: int = 4096) -> PeyreProduct:
    """omega_inf times the product of sigma_p over p <= p_max, without the global constant."""
    if not is_soluble(Q):
        return PeyreProduct(0.0, Fraction(0), p_max)
    finite = Fraction(1)
    for p in sympy.primerange(2, p_max + 1):
        finite *= sigma_p(Q, int(p)).sigma
    return PeyreProduct(omega_inf(Q, H, quad_steps), finite, p_max)
