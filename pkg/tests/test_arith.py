import random
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conicbundles.arith import (
    BinaryForm, NumberField, factor_binary_form, factor_integer, jacobi,
    nf_is_square, nf_sqrt, resultant, valuation,
)
from conicbundles.errors import InvalidArgument, InvalidField, Unsupported

S, T = sympy.symbols("s t")


def euler(a, p):
    r = pow(a % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


# jacobi

def test_jacobi_small_values():
    assert jacobi(1, 15) == 1
    # (2/3)(2/5) = (-1)(-1)
    assert euler(2, 3) * euler(2, 5) == 1
    assert jacobi(2, 15) == 1
    assert jacobi(3, 15) == 0


def test_jacobi_matches_euler_criterion():
    rng = random.Random(1)
    primes = list(sympy.primerange(3, 2000))
    for _ in range(50):
        p = rng.choice(primes)
        a = rng.randint(-10**6, 10**6)
        assert jacobi(a, p) == euler(a, p)


@pytest.mark.parametrize("n", [0, -3, 4, 10])
def test_jacobi_rejects_bad_modulus(n):
    with pytest.raises(InvalidArgument):
        jacobi(3, n)


@given(st.integers(-500, 500), st.integers(-500, 500), st.integers(0, 300))
def test_jacobi_multiplicative_in_numerator(a, b, k):
    n = 2 * k + 1
    assert jacobi(a, n) * jacobi(b, n) == jacobi(a * b, n)


@given(st.integers(-500, 500), st.integers(0, 60), st.integers(0, 60))
def test_jacobi_multiplicative_in_modulus(a, j, k):
    m, n = 2 * j + 1, 2 * k + 1
    assert jacobi(a, m * n) == jacobi(a, m) * jacobi(a, n)


@given(st.integers(-10**4, 10**4), st.integers(0, 200))
def test_jacobi_against_sympy(a, k):
    n = 2 * k + 1
    assert jacobi(a, n) == sympy.jacobi_symbol(a % n, n)


# factor_integer and valuation

def test_factor_integer_examples():
    assert factor_integer(12) == {2: 2, 3: 1}
    assert factor_integer(-1) == {}
    with pytest.raises(InvalidArgument):
        factor_integer(0)


def test_factor_integer_semiprime():
    rng = random.Random(7)
    p = sympy.nextprime(rng.randrange(2**31, 2**32))
    q = sympy.nextprime(rng.randrange(2**31, 2**32))
    f = factor_integer(p * q)
    assert sorted(f) == sorted({p, q})
    prod = 1
    for r, e in f.items():
        assert sympy.isprime(r)
        prod *= r ** e
    assert prod == p * q


def test_valuation_examples():
    assert valuation(12, 2) == 2
    assert valuation(12, 5) == 0
    with pytest.raises(InvalidArgument):
        valuation(0, 3)


@given(st.sampled_from([2, 3, 5, 7, 11]), st.integers(0, 30), st.integers(1, 10**6))
def test_valuation_construct_then_read(p, k, u):
    if u % p == 0:
        u += 1
    assert valuation(p ** k * u, p) == k
    assert valuation(-(p ** k) * u, p) == k


# resultant

def test_resultant_examples():
    assert resultant(BinaryForm.linear(1, 0), BinaryForm.linear(0, 1)) == 1
    assert resultant(BinaryForm.linear(1, -1), BinaryForm.linear(1, 1)) == 2
    with pytest.raises(InvalidArgument):
        resultant(BinaryForm.zero(2), BinaryForm.linear(1, 1))


def random_form(rng, deg, bound=5):
    while True:
        f = BinaryForm(deg, tuple(rng.randint(-bound, bound) for _ in range(deg + 1)))
        if f.coeffs[0] and f.coeffs[-1]:
            return f


def test_resultant_vanishes_iff_common_factor():
    rng = random.Random(3)
    seen_zero = 0
    for i in range(50):
        F = random_form(rng, rng.randint(1, 4))
        G = random_form(rng, rng.randint(1, 4))
        if i % 3 == 0:
            h = random_form(rng, 1, 3)
            F, G = F * h, G * h
        common = sympy.gcd(F.to_sympy(S, T), G.to_sympy(S, T))
        shared = sympy.Poly(common, S, T).total_degree() > 0
        assert (resultant(F, G) == 0) == shared
        seen_zero += shared
    assert seen_zero > 10


def sylvester_det(F, G):
    m, n = F.degree, G.degree
    rows = [[0] * i + list(F.coeffs) + [0] * (n - 1 - i) for i in range(n)]
    rows += [[0] * i + list(G.coeffs) + [0] * (m - 1 - i) for i in range(m)]
    return sympy.Matrix(rows).det()


def test_resultant_matches_root_product():
    # res(F, G) = lc(F)^deg G * prod G(alpha) over the roots of F(x, 1)
    rng = random.Random(11)
    for _ in range(30):
        F = random_form(rng, rng.randint(1, 4))
        G = random_form(rng, rng.randint(1, 4))
        assert resultant(F, G) == sylvester_det(F, G)
        roots = np.roots(F.coeffs)
        prod = F.coeffs[0] ** G.degree * np.prod([np.polyval(G.coeffs, r) for r in roots])
        assert abs(prod - resultant(F, G)) < 1e-6 * (1 + abs(resultant(F, G)))


@settings(max_examples=60)
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=5),
       st.lists(st.integers(-9, 9), min_size=2, max_size=5))
def test_resultant_antisymmetry(a, b):
    F, G = BinaryForm.from_coeffs(a), BinaryForm.from_coeffs(b)
    if F.is_zero() or G.is_zero():
        return
    sign = (-1) ** (F.degree * G.degree)
    assert resultant(F, G) == sign * resultant(G, F)


# factor_binary_form

def test_factor_difference_of_squares():
    out = factor_binary_form(BinaryForm.from_coeffs([1, 0, -1]))
    assert out.content == 1
    assert sorted(f.coeffs for f, _ in out.factors) == [(1, -1), (1, 1)]


def test_factor_sum_of_squares_is_irreducible():
    out = factor_binary_form(BinaryForm.from_coeffs([1, 0, 1]))
    assert out.content == 1
    assert out.factors == ((BinaryForm.from_coeffs([1, 0, 1]), 1),)


def test_factor_fermat_discriminant():
    F = BinaryForm.from_sympy(sympy.expand(9 * S * T * (S + T) * (S**2 - S * T + T**2)), S, T)
    out = factor_binary_form(F)
    assert out.content == 9
    got = {f.coeffs for f, e in out.factors}
    assert got == {(1, 0), (0, 1), (1, 1), (1, -1, 1)}
    assert out.expand() == F


def test_factor_guards():
    with pytest.raises(InvalidArgument):
        factor_binary_form(BinaryForm.zero(3))
    with pytest.raises(Unsupported):
        factor_binary_form(BinaryForm.from_coeffs([1] + [0] * 16 + [1]))


def test_factor_expand_roundtrip_random():
    rng = random.Random(5)
    for _ in range(200):
        deg = rng.randint(0, 8)
        F = BinaryForm(deg, tuple(rng.randint(-50, 50) for _ in range(deg + 1)))
        if F.is_zero():
            continue
        out = factor_binary_form(F)
        assert out.expand() == F
        for f, _ in out.factors:
            assert f.leading() > 0
            assert f.content() == 1
            assert sympy.Poly(f.to_sympy(S, T), S, T).is_irreducible


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=6), st.integers(-5, 5), st.integers(-5, 5))
def test_binary_form_homogeneity(c, s, t):
    F = BinaryForm.from_coeffs(c)
    for lam in (Fraction(2, 3), Fraction(-5, 2), 7):
        assert F(lam * s, lam * t) == lam ** F.degree * F(s, t)


# number fields

def test_field_rejects_reducible_modulus():
    with pytest.raises(InvalidField):
        NumberField([-1, 0, 1])


def test_is_square_rational_in_gaussian_field():
    K = NumberField([1, 0, 1])
    assert nf_is_square(K(4))


def test_generator_of_q_sqrt2_is_not_square():
    K = NumberField([-2, 0, 1])
    theta = K.gen()
    assert not nf_is_square(theta)
    # (a + b t)^2 = a^2 + 2 b^2 + 2ab t = t  has no rational solution:
    # 2ab = 1 forces a, b != 0, then a^2 + 2b^2 > 0
    a, b = sympy.symbols("a b")
    sols = sympy.solve([a**2 + 2 * b**2, 2 * a * b - 1], [a, b], dict=True)
    assert all(not (v.is_rational) for sol in sols for v in sol.values())


def test_minus_generator_is_square_in_cyclotomic_field():
    K = NumberField([1, -1, 1])
    theta = K.gen()
    assert (theta - 1) ** 2 == -theta
    assert nf_is_square(-theta)
    r = nf_sqrt(-theta)
    assert r * r == -theta


def test_square_of_random_elements_is_square():
    rng = random.Random(9)
    moduli = [[-2, 0, 1], [1, 0, 1], [1, -1, 1], [-2, 0, 0, 1], [2, 0, 0, 0, 1],
              [-3, 1, 0, 1], [1, 1, 1, 1, 1]]
    for i in range(100):
        K = NumberField(rng.choice(moduli))
        alpha = K([Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(K.degree)])
        assert nf_is_square(alpha * alpha)


def test_field_arithmetic_inverse():
    K = NumberField([-3, 1, 0, 1])
    a = K([1, 2, -1])
    assert a * a.inverse() == K.one()
    assert (a / a) == 1
