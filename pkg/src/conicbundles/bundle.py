"""
Conic bundle surfaces Q(s,t;x) = sum_{i,j} f_ij(s,t) x_i x_j in F(0,a1,a2):
discriminant, smoothness, intersection theory, heights, classification of
singular fibres into split and non-split, and del Pezzo criteria.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import sympy

from .arith import (BinaryForm, NumberField, NumberFieldElement, det_bareiss,
                    factor_binary_form, form_gcd, nf_is_square, resultant)
from .conic import TernaryQuadraticForm
from .errors import DegenerateSurface, InternalError, InvalidArgument, ParseError

PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class BundleSurface:
    """A surface of bidegree (e, 2) in F(a0, a1, a2) with a0 = 0."""

    a: tuple[int, int, int]
    e: int
    forms: tuple[BinaryForm, ...]  # f00, f01, f02, f11, f12, f22

    def __post_init__(self):
        a = tuple(int(x) for x in self.a)
        object.__setattr__(self, "a", a)
        if len(a) != 3 or a[0] != 0 or min(a) < 0:
            raise InvalidArgument(f"twists must be (0, a1, a2) with a1, a2 >= 0, got {a}")
        if self.e < max(-2 * x for x in a) or self.e < 0:
            raise InvalidArgument(f"e = {self.e} does not give an effective divisor")
        if len(self.forms) != 6:
            raise InvalidArgument("need six forms f00 f01 f02 f11 f12 f22")
        for (i, j), f in zip(PAIRS, self.forms):
            want = a[i] + a[j] + self.e
            if f.degree != want:
                raise InvalidArgument(f"f{i}{j} must have degree {want}, got {f.degree}")

    @classmethod
    def from_matrix(cls, a, e, f) -> "BundleSurface":
        return cls(tuple(a), e, tuple(f[i][j] for i, j in PAIRS))

    def f(self, i: int, j: int) -> BinaryForm:
        if i > j:
            i, j = j, i
        return self.forms[PAIRS.index((i, j))]

    def gram(self) -> list[list[BinaryForm]]:
        return [[self.f(i, j) for j in range(3)] for i in range(3)]

    def fibre(self, s: int, t: int) -> TernaryQuadraticForm:
        v = [f(s, t) for f in self.forms]
        return TernaryQuadraticForm(v[0], 2 * v[1], v[3], 2 * v[2], 2 * v[4], v[5])

    def shear(self, k: int) -> "BundleSurface":
        """The surface with every f_ij replaced by f_ij(s, t + k s)."""
        return BundleSurface(self.a, self.e, tuple(f.shear(k) for f in self.forms))

    def scale(self, lam: int) -> "BundleSurface":
        return BundleSurface(self.a, self.e, tuple(lam * f for f in self.forms))

    def to_text(self) -> str:
        lines = [f"a: {' '.join(map(str, self.a))}", f"e: {self.e}"]
        for (i, j), f in zip(PAIRS, self.forms):
            body = "0" if f.is_zero() else " ".join(map(str, f.coeffs))
            lines.append(f"f {i} {j} : {body}")
        return "\n".join(lines) + "\n"


def parse_surface(text: str) -> BundleSurface:
    """Read the line-oriented surface format; errors name the offending line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line))
    if len(rows) != 8:
        raise ParseError(f"expected 8 non-comment lines (a, e, six forms), found {len(rows)}")

    def ints(lineno, tokens):
        try:
            return [int(x) for x in tokens]
        except ValueError:
            raise ParseError(f"line {lineno}: expected integers, got {' '.join(tokens)!r}")

    lineno, line = rows[0]
    head, _, rest = line.partition(":")
    if head.strip() != "a":
        raise ParseError(f"line {lineno}: expected 'a: a0 a1 a2'")
    a = ints(lineno, rest.split())
    if len(a) != 3:
        raise ParseError(f"line {lineno}: expected 3 twists, got {len(a)}")
    lineno, line = rows[1]
    head, _, rest = line.partition(":")
    if head.strip() != "e" or len(rest.split()) != 1:
        raise ParseError(f"line {lineno}: expected 'e: <integer>'")
    e = ints(lineno, rest.split())[0]
    forms = []
    for (lineno, line), (i, j) in zip(rows[2:], PAIRS):
        head, _, rest = line.partition(":")
        htoks = head.split()
        if htoks != ["f", str(i), str(j)]:
            raise ParseError(f"line {lineno}: expected 'f {i} {j} : ...', got {head.strip()!r}")
        d = a[i] + a[j] + e
        coeffs = ints(lineno, rest.split())
        if coeffs == [0]:
            forms.append(BinaryForm.zero(d))
            continue
        if len(coeffs) != d + 1:
            raise ParseError(f"line {lineno}: f{i}{j} has degree {d} and needs {d + 1} "
                             f"coefficients, got {len(coeffs)}")
        forms.append(BinaryForm(d, tuple(coeffs)))
    try:
        return BundleSurface(tuple(a), e, tuple(forms))
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from exc


# ------------------------------------------------------------- discriminant

def _det3(M):
    return (M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
            - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
            + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]))


def discriminant(S: BundleSurface) -> BinaryForm:
    """Delta_pi = det (f_ij); the discriminant Delta of the text is -4 times this."""
    deg = 2 * sum(S.a) + 3 * S.e
    G = S.gram()
    D = _det3(G)
    if D.is_zero():
        raise DegenerateSurface("the discriminant vanishes identically")
    assert D.degree == deg
    return D


def full_discriminant(S: BundleSurface) -> BinaryForm:
    return -4 * discriminant(S)


def smoothness_check(S: BundleSurface) -> bool:
    """Delta_pi nonzero and squarefree, and the f_ij without common factor."""
    try:
        D = discriminant(S)
    except DegenerateSurface:
        return False
    if any(e > 1 for _, e in factor_binary_form(D).factors):
        return False
    return form_gcd(S.forms) <= 0


# ----------------------------------------------------------------- geometry

def anticanonical(S: BundleSurface) -> tuple[int, int]:
    """-K_X = M + (2 - a0 - a1 - a2 - e) F as (coefficient of M, coefficient of F)."""
    return (1, 2 - sum(S.a) - S.e)


@dataclass(frozen=True)
class IntersectionNumbers:
    F2: int
    MF: int
    M2: int
    KX2: int


def intersection_numbers(S: BundleSurface) -> IntersectionNumbers:
    M2 = 2 * sum(S.a) + S.e
    deg_delta = 2 * sum(S.a) + 3 * S.e
    KX2 = 8 - deg_delta
    # consistency with -K = M + cF: K^2 = M^2 + 2c*MF
    c = anticanonical(S)[1]
    assert M2 + 4 * c == KX2
    return IntersectionNumbers(0, 2, M2, KX2)


def height(S: BundleSurface, point: Sequence[int]) -> Fraction:
    """Anticanonical height of (s, t; x0, x1, x2) on integer coprime representatives."""
    s, t, *x = (int(v) for v in point)
    if math.gcd(s, t) != 1:
        raise InvalidArgument(f"(s, t) = ({s}, {t}) is not coprime")
    m = max(abs(s), abs(t))
    top = max(m ** S.a[i] * abs(x[i]) for i in range(3))
    return Fraction(top, 1) / Fraction(m) ** (sum(S.a) + S.e - 2) if sum(S.a) + S.e >= 2 \
        else Fraction(top * m ** (2 - sum(S.a) - S.e))


def fibre_height_weights(S: BundleSurface, s: int, t: int) -> tuple[Fraction, Fraction, Fraction]:
    """Diagonal of the archimedean transform of the fibre height over (s, t)."""
    m = Fraction(max(abs(s), abs(t)))
    b = 2 - S.a[1] - S.a[2] - S.e
    return tuple(m ** b * m ** S.a[i] for i in range(3))


# ------------------------------------------------------- fibre classification

@dataclass(frozen=True)
class FibreReport:
    factor: BinaryForm          # Delta_p in the sheared frame, Delta_p(1,0) != 0
    degree: int
    field_modulus: tuple        # monic model of Delta_p, lowest degree first
    b: int                      # Delta_p(1,0)
    singular_index: int
    delta: BinaryForm           # delta_p in the sheared frame
    split: bool
    shear: int
    factor_original: BinaryForm
    delta_original: BinaryForm
    kernel: tuple = field(compare=False, default=())

    def field(self) -> NumberField:
        return NumberField(self.field_modulus, check=False)

    def theta(self) -> NumberFieldElement:
        """theta_p = theta~ / b, a root of Delta_p(x, 1)."""
        K = self.field()
        return K.gen() / self.b


def choose_shear(D: BinaryForm) -> int:
    k = 0
    while D(1, k) == 0:
        k += 1
    return k


def monic_model(F: BinaryForm) -> tuple[int, ...]:
    """Coefficients (lowest first) of b^(n-1) F(x/b, 1) with b = F(1,0)."""
    n = F.degree
    b = F.coeffs[0]
    # F(x,1) = sum c_k x^(n-k); b^(n-1) c_k (x/b)^(n-k) = c_k b^(k-1) x^(n-k)
    out = [0] * (n + 1)
    for k, c in enumerate(F.coeffs):
        if k == 0:
            out[n] = 1
        else:
            out[n - k] = c * b ** (k - 1)
    return tuple(out)


def _kernel_vector(M):
    """Kernel vector of a rank-2 3x3 matrix over a field, first nonzero entry 1."""
    n = 3
    A = [row[:] for row in M]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, n) if not A[i][c].is_zero()), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = A[r][c].inverse()
        A[r] = [x * inv for x in A[r]]
        for i in range(n):
            if i != r and not A[i][c].is_zero():
                k = A[i][c]
                A[i] = [x - k * y for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    if r != 2:
        raise InternalError(f"Gram matrix at a root has rank {r}, expected 2")
    free = next(c for c in range(n) if c not in pivots)
    K = M[0][0].field
    v = [K.zero() for _ in range(n)]
    v[free] = K.one()
    for row, c in enumerate(pivots):
        v[c] = -A[row][free]
    first = next(x for x in v if not x.is_zero())
    inv = first.inverse()
    return [x * inv for x in v]


def classify_fibres(S: BundleSurface) -> list[FibreReport]:
    """Split/non-split classification of every singular closed fibre."""
    D = discriminant(S)
    k = choose_shear(D)
    Ssh = S.shear(k)
    Dsh = discriminant(Ssh)
    fac = factor_binary_form(Dsh)
    if any(e > 1 for _, e in fac.factors):
        raise InvalidArgument("surface is not smooth: repeated factor in the discriminant")
    reports = []
    for Fp, _ in fac.factors:
        b = Fp.coeffs[0]
        assert b != 0
        modulus = monic_model(Fp)
        K = NumberField(modulus)
        theta = K.gen() / b
        G = [[_eval_at(Ssh.f(i, j), theta) for j in range(3)] for i in range(3)]
        v = _kernel_vector(G)
        ip = next(i for i in range(3) if not v[i].is_zero())
        j, l = [i for i in range(3) if i != ip]
        delta = 4 * (Ssh.f(j, l) * Ssh.f(j, l) - Ssh.f(j, j) * Ssh.f(l, l))
        dval = _eval_at(delta, theta)
        if dval.is_zero():
            raise InternalError("delta_p vanishes at theta_p")
        split = nf_is_square(dval)
        reports.append(FibreReport(
            factor=Fp, degree=Fp.degree, field_modulus=modulus, b=b,
            singular_index=ip, delta=delta, split=split, shear=k,
            factor_original=Fp.shear(-k), delta_original=delta.shear(-k),
            kernel=tuple(tuple(x.coords) for x in v)))
    reports.sort(key=lambda r: (r.degree, r.factor_original.coeffs))
    return reports


def _eval_at(F: BinaryForm, theta: NumberFieldElement) -> NumberFieldElement:
    v = F(theta, theta.field.one())
    return v if isinstance(v, NumberFieldElement) else theta.field(v)


@dataclass(frozen=True)
class SurfaceInvariants:
    deg_delta: int
    KX2: int
    minus_K: tuple[int, int]
    rho: int
    complexity: int
    split_points: tuple[FibreReport, ...]
    nonsplit_points: tuple[FibreReport, ...]
    intersections: IntersectionNumbers


def invariants(S: BundleSurface) -> SurfaceInvariants:
    if not smoothness_check(S):
        raise InvalidArgument("surface is not smooth")
    reports = classify_fibres(S)
    split = tuple(r for r in reports if r.split)
    nonsplit = tuple(r for r in reports if not r.split)
    deg_delta = discriminant(S).degree
    assert sum(r.degree for r in reports) == deg_delta
    inter = intersection_numbers(S)
    return SurfaceInvariants(
        deg_delta=deg_delta, KX2=inter.KX2, minus_K=anticanonical(S),
        rho=2 + len(split), complexity=sum(r.degree for r in nonsplit),
        split_points=split, nonsplit_points=nonsplit, intersections=inter)


# ------------------------------------------------------------ del Pezzo tests

MODEL_SHAPES = {5: ((0, 0, 0), 1), 4: ((0, 1, 1), 0), 3: ((0, 0, 1), 1),
                 2: ((0, 0, 0), 2), 1: ((0, 1, 1), 1)}


@dataclass(frozen=True)
class Verdict:
    verdict: str  # yes | no | indeterminate
    reason: str


def is_del_pezzo(S: BundleSurface, d: int) -> Verdict:
    if d not in MODEL_SHAPES:
        raise InvalidArgument(f"degree must be in 1..5, got {d}")
    a, e = MODEL_SHAPES[d]
    if (S.a, S.e) != (a, e):
        return Verdict("no", f"model-mismatch: degree {d} lives in F{a} with e = {e}")
    if not smoothness_check(S):
        return Verdict("no", "not smooth")
    if d == 5:
        return Verdict("yes", "every smooth surface of this shape")
    if d == 4:
        if S.f(0, 0).is_zero():
            return Verdict("no", "f00 = 0, so -K is trivial on x1 = x2 = 0")
        return Verdict("yes", "f00 != 0")
    if d == 3:
        return _dp3(S)
    if d == 2:
        return _dp2(S)
    return Verdict("indeterminate", "degree 1 criterion is not implemented")


def _dp3(S: BundleSurface) -> Verdict:
    f00, f01, f11 = S.f(0, 0), S.f(0, 1), S.f(1, 1)
    q1 = BinaryForm(2, (f00.coeffs[0], 2 * f01.coeffs[0], f11.coeffs[0]))
    q2 = BinaryForm(2, (f00.coeffs[1], 2 * f01.coeffs[1], f11.coeffs[1]))
    if q1.is_zero() or q2.is_zero():
        return Verdict("no", "one of the two quadratics vanishes identically")
    r = resultant(q1, q2)
    if r == 0:
        return Verdict("no", "the two quadratics share a root")
    return Verdict("yes", f"resultant {r} != 0")


def dp2_quadrics(S: BundleSurface) -> list[TernaryQuadraticForm]:
    """The ternary quadrics a, b, c with Q = a s^2 + b st + c t^2."""
    out = []
    for k in range(3):
        v = {(i, j): S.f(i, j).coeffs[k] for i, j in PAIRS}
        out.append(TernaryQuadraticForm(v[0, 0], 2 * v[0, 1], v[1, 1], 2 * v[0, 2],
                                        2 * v[1, 2], v[2, 2]))
    return out


MONOMIALS4 = [m for m in itertools.product(range(5), repeat=3) if sum(m) == 4]
MONOMIALS4.sort(reverse=True)
MONOMIALS2 = [m for m in itertools.product(range(3), repeat=3) if sum(m) == 2]
MONOMIALS2.sort(reverse=True)


def _quadric_terms(Q: TernaryQuadraticForm) -> dict:
    a, b, c, d, e, f = Q.coeffs()
    return {(2, 0, 0): a, (1, 1, 0): b, (0, 2, 0): c, (1, 0, 1): d, (0, 1, 1): e, (0, 0, 2): f}


def macaulay_resultant(quadrics: Sequence[TernaryQuadraticForm]) -> int | None:
    """Resultant of three ternary quadrics via the 15x15 Macaulay matrix.

    Returns None when the extraneous minor vanishes.
    """
    index = {m: i for i, m in enumerate(MONOMIALS4)}
    rows = []
    for m in MONOMIALS4:
        # assign to the first variable whose square divides m
        i = next(i for i in range(3) if m[i] >= 2)
        shift = list(m)
        shift[i] -= 2
        row = [0] * 15
        for mono, coef in _quadric_terms(quadrics[i]).items():
            target = tuple(shift[k] + mono[k] for k in range(3))
            row[index[target]] += coef
        rows.append(row)
    full = det_bareiss(rows)
    # non-reduced monomials: divisible by at least two of x_i^2
    extra = [index[m] for m in MONOMIALS4 if sum(1 for k in range(3) if m[k] >= 2) >= 2]
    minor = det_bareiss([[rows[r][c] for c in extra] for r in extra])
    if minor == 0:
        return None
    if full % minor:
        raise InternalError("extraneous factor does not divide the Macaulay determinant")
    return full // minor


def quadrics_common_zero(quadrics: Sequence[TernaryQuadraticForm]) -> bool:
    """True iff the quadrics share a zero in P^2 over the algebraic closure.

    Three quadrics have no common zero exactly when their degree-4 multiples
    span all quartic monomials.
    """
    index = {m: i for i, m in enumerate(MONOMIALS4)}
    rows = []
    for Q in quadrics:
        for sh in MONOMIALS2:
            row = [0] * 15
            for mono, coef in _quadric_terms(Q).items():
                row[index[tuple(sh[k] + mono[k] for k in range(3))]] += coef
            rows.append(row)
    return sympy.Matrix(rows).rank() < 15


def _dp2(S: BundleSurface, attempts: int = 8) -> Verdict:
    quadrics = dp2_quadrics(S)
    rng = random.Random(0)
    U = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    for attempt in range(attempts):
        qs = [Q.compose(U) for Q in quadrics]
        res = macaulay_resultant(qs)
        if res is not None:
            if res == 0:
                return Verdict("no", "the quadrics a, b, c have a common zero")
            return Verdict("yes", f"Macaulay resultant {res} != 0")
        U = _random_unimodular(rng)
    return Verdict("indeterminate", "Macaulay construction degenerate in every coordinate system tried")


def _random_unimodular(rng: random.Random):
    while True:
        L = [[1, 0, 0], [rng.randint(-3, 3), 1, 0], [rng.randint(-3, 3), rng.randint(-3, 3), 1]]
        Ut = [[1, rng.randint(-3, 3), rng.randint(-3, 3)], [0, 1, rng.randint(-3, 3)], [0, 0, 1]]
        M = [[sum(L[i][k] * Ut[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
        perm = rng.sample(range(3), 3)
        return [M[p] for p in perm]


# --------------------------------------------------------------- examples

def fermat_residual() -> BundleSurface:
    """3s y0^2 + 3t y1^2 + (s^3 + t^3) y2^2 in F(0,0,1), e = 1."""
    z1 = BinaryForm.zero(1)
    z2 = BinaryForm.zero(2)
    return BundleSurface((0, 0, 1), 1, (
        BinaryForm(1, (3, 0)), z1, z2,
        BinaryForm(1, (0, 3)), z2,
        BinaryForm(3, (1, 0, 0, 1))))
