"""
Exact arithmetic used everywhere else: Jacobi symbols, integer factorization,
binary forms with their resultants and factorizations, and arithmetic in
small number fields Q[x]/(m) including a squareness test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import sympy

from .errors import InvalidArgument, InvalidField, Unsupported

MAX_FACTOR_DEGREE = 16
MAX_FIELD_DEGREE = 8


# ---------------------------------------------------------------- integers

def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n."""
    if n <= 0 or n % 2 == 0:
        raise InvalidArgument(f"jacobi needs an odd positive modulus, got {n}")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def factor_integer(n: int) -> dict[int, int]:
    """Prime factorization of |n| as {prime: exponent}; units give {}."""
    if n == 0:
        raise InvalidArgument("cannot factor 0")
    return dict(_factorint(abs(int(n))))


@lru_cache(maxsize=65536)
def _factorint(n: int):
    return tuple(sorted((int(p), int(e)) for p, e in sympy.factorint(n).items()))


def factor_integer_items(n: int) -> tuple[tuple[int, int], ...]:
    if n == 0:
        raise InvalidArgument("cannot factor 0")
    return _factorint(abs(int(n)))


def is_prime(n: int) -> bool:
    return bool(sympy.isprime(n))


def valuation(n: int, p: int) -> int:
    """Largest k with p^k | n."""
    if n == 0:
        raise InvalidArgument("valuation of 0 is infinite")
    if p < 2:
        raise InvalidArgument(f"not a prime: {p}")
    n = abs(n)
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def fraction_valuation(x: Fraction, p: int) -> int:
    x = Fraction(x)
    return valuation(x.numerator, p) - valuation(x.denominator, p)


def radical(n: int) -> int:
    out = 1
    for p, _ in factor_integer_items(n):
        out *= p
    return out


def divisors(n: int) -> list[int]:
    """Positive divisors of |n| in increasing order."""
    divs = [1]
    for p, e in factor_integer_items(n):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def is_square_int(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def is_square_rational(x: Fraction) -> bool:
    x = Fraction(x)
    return is_square_int(x.numerator) and is_square_int(x.denominator)


def det_bareiss(rows: Sequence[Sequence[int]]) -> int:
    """Determinant of an integer matrix by fraction-free elimination."""
    m = [list(map(int, r)) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def det_fraction(rows: Sequence[Sequence]) -> Fraction:
    """Determinant over Q by Gaussian elimination."""
    m = [[Fraction(x) for x in r] for r in rows]
    n = len(m)
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            m[k], m[piv] = m[piv], m[k]
            det = -det
        det *= m[k][k]
        for i in range(k + 1, n):
            if m[i][k]:
                r = m[i][k] / m[k][k]
                for j in range(k, n):
                    m[i][j] -= r * m[k][j]
    return det


# ------------------------------------------------------------ binary forms

@dataclass(frozen=True)
class BinaryForm:
    """f(s,t) = sum_k coeffs[k] * s^(degree-k) * t^k with integer coefficients."""

    degree: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if self.degree < 0:
            raise InvalidArgument("negative degree")
        coeffs = tuple(int(c) for c in self.coeffs)
        if len(coeffs) != self.degree + 1:
            raise InvalidArgument(
                f"a form of degree {self.degree} needs {self.degree + 1} "
                f"coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_coeffs(cls, coeffs: Iterable[int]) -> "BinaryForm":
        coeffs = tuple(coeffs)
        return cls(len(coeffs) - 1, coeffs)

    @classmethod
    def zero(cls, degree: int) -> "BinaryForm":
        return cls(degree, (0,) * (degree + 1))

    @classmethod
    def constant(cls, c: int) -> "BinaryForm":
        return cls(0, (c,))

    @classmethod
    def linear(cls, a: int, b: int) -> "BinaryForm":
        """a*s + b*t"""
        return cls(1, (a, b))

    @classmethod
    def from_sympy(cls, expr, s, t, degree: int | None = None) -> "BinaryForm":
        poly = sympy.Poly(expr, s, t)
        if degree is None:
            degree = poly.total_degree() if not poly.is_zero else 0
        coeffs = [0] * (degree + 1)
        for (i, j), c in poly.terms():
            if i + j != degree:
                raise InvalidArgument(f"{expr} is not homogeneous of degree {degree}")
            if not c.is_integer:
                raise InvalidArgument("binary forms need integer coefficients")
            coeffs[j] = int(c)
        return cls(degree, tuple(coeffs))

    def to_sympy(self, s, t):
        d = self.degree
        return sum(c * s ** (d - k) * t ** k for k, c in enumerate(self.coeffs))

    def __call__(self, s, t):
        d = self.degree
        spow, tpow = [1], [1]
        for _ in range(d):
            spow.append(spow[-1] * s)
            tpow.append(tpow[-1] * t)
        acc = 0
        for k, c in enumerate(self.coeffs):
            if c:
                acc = acc + c * spow[d - k] * tpow[k]
        return acc

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self):
        return not self.is_zero()

    def __neg__(self):
        return BinaryForm(self.degree, tuple(-c for c in self.coeffs))

    def __add__(self, other: "BinaryForm") -> "BinaryForm":
        if self.is_zero() and self.degree != other.degree:
            return other
        if other.is_zero() and self.degree != other.degree:
            return self
        if self.degree != other.degree:
            raise InvalidArgument("cannot add forms of different degrees")
        return BinaryForm(self.degree,
                          tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "BinaryForm") -> "BinaryForm":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return BinaryForm(self.degree, tuple(other * c for c in self.coeffs))
        out = [0] * (self.degree + other.degree + 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return BinaryForm(self.degree + other.degree, tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "BinaryForm":
        out = BinaryForm.constant(1)
        for _ in range(k):
            out = out * self
        return out

    def content(self) -> int:
        return math.gcd(*self.coeffs) if self.degree else abs(self.coeffs[0])

    def leading(self) -> int:
        """First nonzero coefficient in the order c_0, c_1, ..."""
        return next((c for c in self.coeffs if c), 0)

    def dehomogenize(self) -> list[int]:
        """Coefficients of f(x, 1), highest power first."""
        return list(self.coeffs)

    def substitute(self, a: int, b: int, c: int, d: int) -> "BinaryForm":
        """f(a*s + b*t, c*s + d*t)."""
        ls = BinaryForm.linear(a, b)
        lt = BinaryForm.linear(c, d)
        out = BinaryForm.zero(self.degree)
        for k, coef in enumerate(self.coeffs):
            if coef:
                out = out + coef * (ls ** (self.degree - k) * lt ** k)
        return out

    def shear(self, k: int) -> "BinaryForm":
        """f(s, t + k*s)."""
        return self.substitute(1, 0, k, 1)

    def __str__(self):
        s, t = sympy.symbols("s t")
        return str(sympy.expand(self.to_sympy(s, t)))


def resultant(F: BinaryForm, G: BinaryForm) -> int:
    """Sylvester resultant of two binary forms of their formal degrees."""
    if F.is_zero() or G.is_zero():
        raise InvalidArgument("resultant of a zero form")
    m, n = F.degree, G.degree
    if m + n == 0:
        return 1
    size = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + list(F.coeffs) + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + list(G.coeffs) + [0] * (size - n - 1 - i))
    return det_bareiss(rows)


@dataclass(frozen=True)
class FactoredForm:
    content: int
    factors: tuple[tuple[BinaryForm, int], ...]

    def expand(self) -> BinaryForm:
        out = BinaryForm.constant(self.content)
        for f, e in self.factors:
            out = out * f ** e
        return out


_S, _T = sympy.symbols("s t")


def factor_binary_form(F: BinaryForm) -> FactoredForm:
    """Factor F over Q into primitive irreducible forms with positive leading coefficient."""
    if F.is_zero():
        raise InvalidArgument("cannot factor the zero form")
    if F.degree > MAX_FACTOR_DEGREE:
        raise Unsupported(f"degree {F.degree} exceeds the guard {MAX_FACTOR_DEGREE}")
    if F.degree == 0:
        return FactoredForm(F.coeffs[0], ())
    content, parts = sympy.factor_list(F.to_sympy(_S, _T), _S, _T)
    content = int(content)
    factors = []
    for expr, mult in parts:
        g = BinaryForm.from_sympy(expr, _S, _T)
        if g.leading() < 0:
            g = -g
            if mult % 2:
                content = -content
        factors.append((g, int(mult)))
    factors.sort(key=lambda fe: (fe[0].degree, fe[0].coeffs))
    out = FactoredForm(content, tuple(factors))
    assert out.expand() == F
    return out


def is_squarefree_form(F: BinaryForm) -> bool:
    return all(e == 1 for _, e in factor_binary_form(F).factors)


def form_gcd(forms: Sequence[BinaryForm]) -> int:
    """Degree of the gcd of a list of forms, ignoring zero forms; -1 if all zero."""
    nonzero = [f for f in forms if not f.is_zero()]
    if not nonzero:
        return -1
    g = nonzero[0].to_sympy(_S, _T)
    for f in nonzero[1:]:
        g = sympy.gcd(g, f.to_sympy(_S, _T))
    return int(sympy.Poly(g, _S, _T).total_degree())


# ------------------------------------------------- univariate rational polys
# Lists of Fractions, lowest degree first, no trailing zeros.

def _ptrim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def _pdivmod(a, b):
    a = _ptrim(a)
    b = _ptrim(b)
    if not b:
        raise ZeroDivisionError
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    a = [Fraction(x) for x in a]
    lb = Fraction(b[-1])
    while len(a) >= len(b) and a:
        c = a[-1] / lb
        k = len(a) - len(b)
        q[k] = c
        for i, bi in enumerate(b):
            a[i + k] -= c * bi
        a = _ptrim(a)
    return _ptrim(q), a


def _pmul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _ptrim(out)


def _psub(a, b):
    n = max(len(a), len(b))
    return _ptrim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)
                   for i in range(n)])


# ----------------------------------------------------------- number fields

class NumberField:
    """Q[x]/(m) for a monic irreducible integer polynomial m."""

    def __init__(self, modulus: Sequence[int], check: bool = True):
        # modulus given lowest degree first
        m = [int(c) for c in modulus]
        while len(m) > 1 and m[-1] == 0:
            m.pop()
        if len(m) < 2 or m[-1] != 1:
            raise InvalidField(f"modulus must be monic of degree >= 1: {modulus}")
        self.modulus = tuple(m)
        self.degree = len(m) - 1
        if check and self.degree > 1:
            x = sympy.Symbol("x")
            if not sympy.Poly(list(reversed(m)), x).is_irreducible:
                raise InvalidField(f"reducible modulus {self.modulus_str()}")

    def modulus_str(self) -> str:
        x = sympy.Symbol("x")
        return str(sympy.Poly(list(reversed(self.modulus)), x).as_expr())

    def __eq__(self, other):
        return isinstance(other, NumberField) and self.modulus == other.modulus

    def __hash__(self):
        return hash(self.modulus)

    def __repr__(self):
        return f"NumberField({self.modulus_str()})"

    def __call__(self, coords) -> "NumberFieldElement":
        if isinstance(coords, (int, Fraction)):
            coords = [coords]
        return NumberFieldElement(self, coords)

    def gen(self) -> "NumberFieldElement":
        if self.degree == 1:
            return self(-self.modulus[0])
        return self([0, 1])

    def zero(self):
        return self(0)

    def one(self):
        return self(1)

    def _reduce(self, a):
        a = [Fraction(x) for x in a]
        n = self.degree
        m = self.modulus
        for k in range(len(a) - 1, n - 1, -1):
            c = a[k]
            if c:
                for i in range(n + 1):
                    a[k - n + i] -= c * m[i]
        a = a[:n] + [Fraction(0)] * (n - len(a))
        return tuple(a[:n])


class NumberFieldElement:
    __slots__ = ("field", "coords")

    def __init__(self, field: NumberField, coords):
        self.field = field
        self.coords = field._reduce(coords)

    def _coerce(self, other):
        if isinstance(other, NumberFieldElement):
            if other.field != self.field:
                raise InvalidArgument("elements of different fields")
            return other
        return self.field(other)

    def __add__(self, other):
        other = self._coerce(other)
        return NumberFieldElement(self.field, [a + b for a, b in zip(self.coords, other.coords)])

    __radd__ = __add__

    def __neg__(self):
        return NumberFieldElement(self.field, [-a for a in self.coords])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return NumberFieldElement(self.field, _pmul(list(self.coords), list(other.coords)) or [0])

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = self.field.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("inverse of 0 in a number field")
        # extended Euclid on (a, m)
        r0, r1 = list(self.field.modulus), _ptrim(list(self.coords))
        s0, s1 = [], [Fraction(1)]
        r0 = [Fraction(x) for x in r0]
        while len(r1) > 1:
            q, r = _pdivmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, _psub(s0, _pmul(q, s1))
        c = r1[0]
        return NumberFieldElement(self.field, [x / c for x in s1] or [0])

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def is_zero(self) -> bool:
        return not any(self.coords)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field(other)
        return isinstance(other, NumberFieldElement) and self.field == other.field \
            and self.coords == other.coords

    def __hash__(self):
        return hash((self.field, self.coords))

    def is_rational(self) -> bool:
        return not any(self.coords[1:])

    def mult_matrix(self):
        """Matrix of multiplication by self in the power basis (columns = images)."""
        n = self.field.degree
        cols = []
        b = self
        x = self.field.gen() if n > 1 else None
        for _ in range(n):
            cols.append(b.coords)
            if x is not None:
                b = b * x
        return [[cols[j][i] for j in range(n)] for i in range(n)]

    def norm(self) -> Fraction:
        return det_fraction(self.mult_matrix())

    def __repr__(self):
        terms = [f"{c}*x^{i}" for i, c in enumerate(self.coords) if c]
        return " + ".join(terms) or "0"


def _kpoly_trim(p):
    p = list(p)
    while p and p[-1].is_zero():
        p.pop()
    return p


def _kpoly_mod(a, b):
    a = _kpoly_trim(a)
    b = _kpoly_trim(b)
    inv = b[-1].inverse()
    while len(a) >= len(b):
        c = a[-1] * inv
        k = len(a) - len(b)
        for i, bi in enumerate(b):
            a[i + k] = a[i + k] - c * bi
        a = _kpoly_trim(a)
    return a


def kpoly_gcd(a, b):
    """Monic gcd of polynomials over a number field (lists lowest degree first)."""
    a = _kpoly_trim(a)
    b = _kpoly_trim(b)
    while b:
        a, b = b, _kpoly_mod(a, b)
    if not a:
        return a
    inv = a[-1].inverse()
    return [c * inv for c in a]


def nf_sqrt(alpha: NumberFieldElement) -> NumberFieldElement | None:
    """A square root of alpha in its field, or None.

    Factors y^2 - alpha over K with Trager's norm method: shift y by k*theta
    until the norm resultant is squarefree, factor it over Q and pull the
    factors back to K by a gcd.
    """
    K = alpha.field
    if K.degree > MAX_FIELD_DEGREE:
        raise Unsupported(f"field degree {K.degree} exceeds {MAX_FIELD_DEGREE}")
    if alpha.is_zero():
        return K.zero()
    if K.degree == 1:
        q = alpha.coords[0]
        if not is_square_rational(q):
            return None
        return K(Fraction(math.isqrt(q.numerator), math.isqrt(q.denominator)))
    x, y = sympy.symbols("x y")
    m_expr = sum(c * x**i for i, c in enumerate(K.modulus))
    a_expr = sum(sympy.Rational(c.numerator, c.denominator) * x**i
                 for i, c in enumerate(alpha.coords))
    theta = K.gen()
    target = [-alpha, K.zero(), K.one()]
    for k in range(0, 64):
        norm = sympy.Poly(sympy.resultant(m_expr, (y - k * x) ** 2 - a_expr, x), y, domain="QQ")
        if sympy.degree(sympy.gcd(norm, norm.diff(y)), y) > 0:
            continue
        _, parts = norm.factor_list()
        for h, _ in parts:
            if h.degree() > K.degree:
                continue
            # h(y + k*theta) as a polynomial over K
            hc = [Fraction(int(c.p), int(c.q)) for c in reversed(h.all_coeffs())]
            shifted = [K.zero()]
            lin = [theta * k, K.one()]
            power = [K.one()]
            for c in hc:
                shifted = _kadd(shifted, [p * c for p in power])
                power = _kmul(power, lin)
            g = kpoly_gcd(shifted, target)
            if len(g) == 2:
                root = -g[0]
                if root * root != alpha:
                    raise AssertionError("Trager recovery produced a non-root")
                return root
        return None
    raise AssertionError("no squarefree norm found")


def _kadd(a, b):
    n = max(len(a), len(b))
    K = (a or b)[0].field
    return [(a[i] if i < len(a) else K.zero()) + (b[i] if i < len(b) else K.zero())
            for i in range(n)]


def _kmul(a, b):
    K = a[0].field
    out = [K.zero() for _ in range(len(a) + len(b) - 1)]
    for i, p in enumerate(a):
        for j, q in enumerate(b):
            out[i + j] = out[i + j] + p * q
    return out


def nf_is_square(alpha: NumberFieldElement) -> bool:
    """True iff x^2 - alpha has a root in the field of alpha."""
    return nf_sqrt(alpha) is not None
