"""
Fibrewise point counts N(B), the density sum S(B), and the detector divisor
sum D(B) with its admissibility checks.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

from .arith import (BinaryForm, NumberField, factor_integer, jacobi, radical,
                    resultant)
from .bundle import (BundleSurface, FibreReport, classify_fibres, discriminant,
                     fibre_height_weights, invariants)
from .conic import HeightSpec, count_points, is_soluble, peyre_product, points
from .errors import InvalidArgument, ResourceLimit


class ExcludedPoint(InvalidArgument):
    """Some Delta_p vanishes at the requested base point."""


def flat_part(n: int, w: int) -> int:
    """The part of |n| built from primes not dividing w."""
    if n == 0:
        raise InvalidArgument("flat part of 0")
    if w < 1:
        raise InvalidArgument(f"modulus must be positive, got {w}")
    n = abs(n)
    g = math.gcd(n, w)
    while g > 1:
        n //= g
        g = math.gcd(n, g)
    return n


def one_f(n: int) -> Fraction:
    if n < 1:
        raise InvalidArgument(f"one_f needs a positive integer, got {n}")
    out = Fraction(1)
    for q in factor_integer(n):
        if q != 2:
            out *= Fraction(q - 2, q)
    return out


def jacobi_divisor_sum(delta: int, n: int) -> int:
    """sum over d | n of (delta / d), for odd n >= 1, via multiplicativity."""
    if n % 2 == 0:
        raise InvalidArgument("divisor sum needs an odd modulus; w must be even")
    total = 1
    for q, k in factor_integer(n).items():
        chi = jacobi(delta, q)
        total *= sum(chi ** j for j in range(k + 1))
    return total


@dataclass(frozen=True)
class DetectorValue:
    s: int
    t: int
    r: Fraction
    per_factor: tuple  # (Delta_p(s,t), flat part, one_f, divisor sum) per closed point


def _factor_data(S: BundleSurface, reports=None):
    reports = reports if reports is not None else classify_fibres(S)
    return [(r.factor_original, r.delta_original) for r in reports]


def detector_r(S: BundleSurface, st: tuple[int, int], w: int, reports=None) -> DetectorValue:
    s, t = st
    if math.gcd(s, t) != 1:
        raise InvalidArgument(f"(s, t) = ({s}, {t}) is not coprime")
    r = Fraction(1)
    per = []
    for Dp, dp in _factor_data(S, reports):
        n = Dp(s, t)
        if n == 0:
            raise ExcludedPoint(f"Delta_p = {Dp} vanishes at ({s}, {t})")
        flat = flat_part(n, w)
        of = one_f(flat)
        ds = jacobi_divisor_sum(dp(s, t), flat)
        per.append((n, flat, of, ds))
        r *= of * ds
    return DetectorValue(s, t, r, tuple(per))


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class CountConfig:
    B_values: tuple
    w: int
    congruence: tuple[int, int]
    region: tuple  # (s_lo, s_hi, t_lo, t_hi) as Fractions
    exclude: tuple = ()  # sympy expressions in s, t, x0, x1, x2
    base_modulus: int = 0
    power: int = 0

    def __post_init__(self):
        s0, t0 = self.congruence
        if math.gcd(s0, t0) != 1:
            raise InvalidArgument("congruence class (sigma, tau) must be coprime")
        if self.w < 2 or self.w % 2:
            raise InvalidArgument(f"modulus w must be even, got {self.w}")
        lo_s, hi_s, lo_t, hi_t = self.region
        if not (lo_s < hi_s and lo_t < hi_t):
            raise InvalidArgument("region must be a nonempty box")


@dataclass
class AdmissibilityReport:
    ok: bool
    sampled: int
    violations: list = field(default_factory=list)  # (condition, (s, t), detail)

    def summary(self) -> str:
        if self.ok:
            return f"admissible: 0 violations on {self.sampled} sampled points"
        cond, st, detail = self.violations[0]
        return (f"not admissible: {len(self.violations)} violations on {self.sampled} "
                f"points; first {cond} at {st}: {detail}")


def _real_linear_bounds(Dp: BinaryForm, s0: int, t0: int) -> float:
    """Largest box half-width around (s0, t0) on which Dp keeps its sign, from its real roots."""
    bounds = []
    coeffs = list(Dp.coeffs)
    # leading zeros of f(x, 1) mean powers of t divide Dp
    lead = 0
    while lead < len(coeffs) and coeffs[lead] == 0:
        lead += 1
    if lead:
        bounds.append(abs(t0))
    poly = coeffs[lead:]
    if len(poly) > 1:
        x = sympy.Symbol("x")
        for root in sympy.Poly(poly, x).real_roots():
            th = float(root.evalf(30))
            bounds.append(abs(s0 - th * t0) / (1 + abs(th)))
    return min(bounds) if bounds else math.inf


def _in_region(region, s, t, B) -> bool:
    lo_s, hi_s, lo_t, hi_t = region
    return B * lo_s <= s <= B * hi_s and B * lo_t <= t <= B * hi_t


def region_sign_check(S: BundleSurface, region, grid: int = 21, reports=None) -> bool:
    """Each Delta_p has constant nonzero sign on a grid over the box."""
    lo_s, hi_s, lo_t, hi_t = (float(v) for v in region)
    ss = np.linspace(lo_s, hi_s, grid)
    tt = np.linspace(lo_t, hi_t, grid)
    Sg, Tg = np.meshgrid(ss, tt)
    for Dp, _ in _factor_data(S, reports):
        vals = sum(c * Sg ** (Dp.degree - k) * Tg ** k for k, c in enumerate(Dp.coeffs))
        sg = np.sign(vals)
        if np.any(sg == 0) or np.any(sg != sg.flat[0]):
            return False
    return True


def lattice_points(cfg: CountConfig, B) -> list[tuple[int, int]]:
    """M*(P, B): coprime (s, t) in B * region congruent to (sigma, tau) mod w."""
    lo_s, hi_s, lo_t, hi_t = (Fraction(v) * Fraction(B) for v in cfg.region)
    w = cfg.w
    s0, t0 = cfg.congruence

    def progression(lo, hi, c):
        first = math.ceil(lo)
        first += (c - first) % w
        return range(first, math.floor(hi) + 1, w)

    out = []
    for s in progression(lo_s, hi_s, s0):
        for t in progression(lo_t, hi_t, t0):
            if math.gcd(s, t) == 1:
                out.append((s, t))
    return out


def admissibility_check(S: BundleSurface, cfg: CountConfig, samples: int = 2000,
                        seed: int = 0, reports=None) -> AdmissibilityReport:
    reports = reports if reports is not None else classify_fibres(S)
    data = _factor_data(S, reports)
    viol = []
    s0, t0 = cfg.congruence
    for Dp, _ in data:
        if Dp(s0, t0) == 0:
            viol.append(("base-vanishing", (s0, t0), f"Delta_p = {Dp} vanishes"))
    if not region_sign_check(S, cfg.region, reports=reports):
        viol.append(("sign", None, "some Delta_p changes sign on the region"))
    # sample from the largest configured bound
    B = max(cfg.B_values) if cfg.B_values else 1
    pts = lattice_points(cfg, B)
    rng = random.Random(seed)
    if len(pts) > samples:
        pts = rng.sample(pts, samples)
    for s, t in pts:
        for Dp, dp in data:
            n = Dp(s, t)
            if n == 0:
                viol.append(("vanishing", (s, t), f"Delta_p = {Dp} vanishes"))
                continue
            flat = flat_part(n, cfg.w)
            if flat % 2 == 0:
                viol.append(("jacobi", (s, t), "flat part is even"))
                continue
            j = jacobi(dp(s, t), flat)
            if j != 1:
                viol.append(("jacobi", (s, t), f"jacobi({dp(s, t)}, {flat}) = {j}"))
    return AdmissibilityReport(not viol, len(pts), viol)


def bad_modulus(S: BundleSurface, base: tuple[int, int], reports=None,
                include_norms: bool = False) -> int:
    """Radical of the product of the bad quantities for the congruence class.

    With include_norms the norms of delta_p(theta_p) (b_p s0 - theta~_p t0) are
    absorbed as well; they make the Jacobi condition provable but usually
    inflate w far beyond what small boxes can hold.
    """
    reports = reports if reports is not None else classify_fibres(S)
    s0, t0 = base
    D = discriminant(S)
    content = D.content()
    acc = 2 * content
    for r in reports:
        acc *= abs(r.b)
        acc *= abs(resultant(r.factor, r.delta))
        mod = r.field_modulus
        x = sympy.Symbol("x")
        acc *= abs(int(sympy.discriminant(sympy.Poly(list(reversed(mod)), x))))
        if include_norms:
            K = r.field()
            dval = r.delta(r.theta(), K.one())
            lin = r.b * s0 - K.gen() * (t0 - r.shear * s0)
            nm = (dval * lin).norm()
            acc *= abs(nm.numerator) * nm.denominator
        for coords in r.kernel:
            for c in coords:
                acc *= Fraction(c).denominator
    for r1, r2 in _pairs(reports):
        acc *= abs(resultant(r1.factor, r2.factor))
    return radical(acc)


def _pairs(seq):
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            yield seq[i], seq[j]


def build_admissible_config(S: BundleSurface, base: tuple[int, int], B_values=(256, 1024, 4096),
                            power: int = 2, max_power: int = 6, samples: int = 2000,
                            shrink: float = 0.9, include_norms: bool = False) -> CountConfig:
    s0, t0 = base
    if math.gcd(s0, t0) != 1:
        raise InvalidArgument("base point must be coprime")
    reports = classify_fibres(S)
    for r in reports:
        if r.factor_original(s0, t0) == 0:
            raise InvalidArgument(f"invalid base point: fibre over ({s0}, {t0}) is singular")
    if not is_soluble(S.fibre(s0, t0)):
        raise InvalidArgument(f"invalid base point: fibre over ({s0}, {t0}) has no rational point")
    half = min([_real_linear_bounds(r.factor_original, s0, t0) for r in reports]
               + [max(abs(s0), abs(t0))])
    rad = Fraction(shrink * half).limit_denominator(1000)
    region = (s0 - rad, s0 + rad, t0 - rad, t0 + rad)
    W = bad_modulus(S, base, reports, include_norms)
    last = None
    for l in range(power, max_power + 1):
        cfg = CountConfig(tuple(B_values), W ** l, (s0, t0), region, base_modulus=W, power=l)
        last = admissibility_check(S, cfg, samples=samples, reports=reports)
        if last.ok:
            return cfg
    raise ResourceLimit(f"no admissible power of w = {W} up to {max_power}: {last.summary()}")


# ------------------------------------------------------------------- sums

def divisor_sum_D(S: BundleSurface, cfg: CountConfig, B, reports=None) -> Fraction:
    reports = reports if reports is not None else classify_fibres(S)
    s0, t0 = cfg.congruence
    if any(r.factor_original(s0, t0) == 0 for r in reports):
        raise InvalidArgument("inadmissible congruence: some Delta_p vanishes at (sigma, tau)")
    total = Fraction(0)
    for st in lattice_points(cfg, B):
        total += detector_r(S, st, cfg.w, reports).r
    return total


def base_points(bound: int):
    """Coprime sign-normalized (s, t) with max(|s|, |t|) <= bound, sorted."""
    out = []
    for s in range(0, bound + 1):
        for t in range(-bound, bound + 1):
            if s == 0 and t != 1:
                continue
            if math.gcd(s, t) == 1:
                out.append((s, t))
    return out


def fibre_height(S: BundleSurface, s: int, t: int) -> HeightSpec:
    return HeightSpec.diagonal(*fibre_height_weights(S, s, t))


def _compile_excludes(exclude):
    syms = sympy.symbols("s t x0 x1 x2")
    out = []
    for e in exclude:
        expr = sympy.sympify(e) if isinstance(e, str) else e
        out.append(sympy.lambdify(syms, expr, modules=[{}, "math"]))
    return out


def fibre_count(S: BundleSurface, st, B, excludes=()) -> int:
    s, t = st
    if discriminant(S)(s, t) == 0:
        return 0
    Q = S.fibre(s, t)
    H = fibre_height(S, s, t)
    if not excludes:
        return count_points(Q, H, B)
    n = 0
    for x in points(Q, H, B):
        if not any(f(s, t, *x) == 0 for f in excludes):
            n += 1
    return n


def count_NB(S: BundleSurface, cfg: CountConfig | None, B, cutoff: int | None = None,
             workers: int = 1) -> int:
    """Points of height <= B on smooth fibres over base points of height <= cutoff."""
    if B < 1:
        return 0
    if cutoff is None:
        cutoff = math.isqrt(int(B))
    excl = tuple(cfg.exclude) if cfg is not None else ()
    pts = base_points(cutoff)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            parts = ex.map(_fibre_count_job, [(S, st, B, excl) for st in pts], chunksize=16)
            return sum(parts)
    fs = _compile_excludes(excl)
    return sum(fibre_count(S, st, B, fs) for st in pts)


def _fibre_count_job(args):
    S, st, B, excl = args
    return fibre_count(S, st, B, _compile_excludes(excl))


def density_sum_SB(S: BundleSurface, cfg: CountConfig | None, B, p_max: int = 50,
                   quad_steps: int = 1024) -> float:
    """Sum over base points of height <= B of the truncated adelic fibre densities."""
    if B < 1:
        return 0.0
    D = discriminant(S)
    total = 0.0
    for s, t in base_points(int(B)):
        if D(s, t) == 0:
            continue
        total += peyre_product(S.fibre(s, t), fibre_height(S, s, t), p_max, quad_steps).value
    return total
