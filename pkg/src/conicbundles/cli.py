"""Command-line front end: analyze, count, densities, detector and dp."""

from __future__ import annotations

import argparse
import hashlib
import math
import platform
import sys
import time
from fractions import Fraction

import numpy
import sympy

from . import __version__
from .arith import factor_binary_form, valuation
from .bundle import (BundleSurface, classify_fibres, discriminant, intersection_numbers,
                     invariants, is_del_pezzo, parse_surface, smoothness_check)
from .conic import (TernaryQuadraticForm, chi_p, disc_ternary, is_soluble, rank_mod_p,
                    sigma_p_closed, sigma_p_oracle)
from .count import (admissibility_check, base_points, build_admissible_config, count_NB,
                    density_sum_SB, divisor_sum_D, lattice_points)
from .dp import (classification_summary, minus_K_string, subgroup_classes,
                 table4_model, theorem11_consistency)
from .errors import ConicBundleError, InvalidArgument, Unsupported


def fmt_num(x, exact_digits: int = 60) -> str:
    """Decimal for ints and floats, numerator/denominator for short rationals.

    Rationals whose numerator or denominator exceed exact_digits digits are
    printed as decimals.
    """
    if isinstance(x, Fraction):
        if max(x.numerator.bit_length(), x.denominator.bit_length()) > 3.33 * exact_digits:
            return f"{float(x):.12g}"
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


class Manifest:
    def __init__(self, command: str, params: dict, input_text: str | None = None,
                 workers: int = 1):
        self.command = command
        self.params = params
        self.digest = hashlib.sha256(input_text.encode()).hexdigest() if input_text else "-"
        self.workers = workers
        self.start = time.perf_counter()

    def lines(self) -> list[str]:
        wall = time.perf_counter() - self.start
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        return [
            f"# command: {self.command}",
            f"# input_sha256: {self.digest}",
            f"# parameters: {params}",
            f"# versions: conicbundles {__version__}; python {platform.python_version()}; "
            f"sympy {sympy.__version__}; numpy {numpy.__version__}",
            f"# wall_time_s: {wall:.3f}",
            f"# workers: {self.workers}",
            "# primality: sympy.isprime (deterministic below 2^64, strong BPSW above)",
        ]


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InvalidArgument(f"cannot read {path}: {exc.strerror}") from exc


def _load_surface(path: str) -> tuple[BundleSurface, str]:
    text = _read(path)
    return parse_surface(text), text


def _emit(out, manifest: Manifest, body: list[str]):
    for line in manifest.lines():
        print(line, file=out)
    for line in body:
        print(line, file=out)


# ------------------------------------------------------------- analyze

def cmd_analyze(args, out) -> int:
    S, _ = _load_surface(args.surface)
    D = discriminant(S)
    fac = factor_binary_form(D)
    facs = " * ".join(f"({F})" + (f"^{e}" if e > 1 else "") for F, e in fac.factors)
    print(f"twists: {' '.join(map(str, S.a))}", file=out)
    print(f"e: {S.e}", file=out)
    print(f"delta_pi: {D}", file=out)
    print(f"deg_delta: {D.degree}", file=out)
    print(f"factorization: {fac.content} * {facs}", file=out)
    smooth = smoothness_check(S)
    print(f"smooth: {'true' if smooth else 'false'}", file=out)
    if not smooth:
        return 0
    inv = invariants(S)
    reports = sorted(inv.split_points + inv.nonsplit_points,
                     key=lambda r: (r.degree, r.factor_original.coeffs))
    if reports:
        print(f"shear_k: {reports[0].shear}", file=out)
    for n, r in enumerate(reports, 1):
        print(f"fibre {n}: factor {r.factor_original}; degree {r.degree}; "
              f"split {'true' if r.split else 'false'}; i_p {r.singular_index}; "
              f"delta {r.delta_original}", file=out)
    it = inv.intersections
    print(f"complexity: {inv.complexity}", file=out)
    print(f"rho: {inv.rho}", file=out)
    print(f"minus_K: {minus_K_string(inv.minus_K)}", file=out)
    print(f"K2: {inv.KX2}", file=out)
    print(f"intersections: F^2={it.F2} M.F={it.MF} M^2={it.M2}", file=out)
    return 0


# --------------------------------------------------------------- count

def _auto_base(S: BundleSurface, limit: int = 12):
    D = discriminant(S)
    for st in sorted(base_points(limit), key=lambda p: (max(abs(p[0]), abs(p[1])), p)):
        if D(*st) != 0 and is_soluble(S.fibre(*st)):
            return st
    raise InvalidArgument(f"no soluble smooth fibre over base points of height <= {limit}")


def cmd_count(args, out) -> int:
    S, text = _load_surface(args.surface)
    if not smoothness_check(S):
        raise InvalidArgument("surface is not smooth")
    inv = invariants(S)
    k = len(inv.split_points)
    Bs = sorted(args.B)
    cutoffs = [args.cutoff if args.cutoff else max(1, round(B ** args.cutoff_exponent)) for B in Bs]
    base = tuple(args.base) if args.base else _auto_base(S)
    cfg = build_admissible_config(S, base, B_values=tuple(cutoffs))
    manifest = Manifest("count", {
        "B": ",".join(map(str, Bs)), "pmax": args.pmax, "steps": args.steps,
        "cutoff": args.cutoff or f"B^{args.cutoff_exponent}", "base": f"{base[0]},{base[1]}",
        "w": cfg.w, "rho": inv.rho, "split": k,
        "note": "N_counts_fibres_up_to_cutoff;D_and_S_evaluated_at_cutoff"},
        text, args.workers)
    body = ["B,N,D,S,ref_N,ref_D,ratio_N,ratio_D"]
    for B, c in zip(Bs, cutoffs):
        N = count_NB(S, cfg, B, cutoff=c, workers=args.workers)
        Dv = divisor_sum_D(S, cfg, c)
        Sv = density_sum_SB(S, cfg, c, p_max=args.pmax, quad_steps=args.steps)
        ref_N = B * math.log(B) ** (inv.rho - 1)
        ref_D = c * c * math.log(c) ** k if c > 1 else 0.0
        ratio_N = N / ref_N if ref_N else float("nan")
        ratio_D = float(Dv) / ref_D if ref_D else float("nan")
        body.append(",".join(fmt_num(v) for v in (B, N, Dv, Sv, ref_N, ref_D, ratio_N, ratio_D)))
    _emit(out, manifest, body)
    return 0


# ----------------------------------------------------------- densities

def cmd_densities(args, out) -> int:
    Q = TernaryQuadraticForm.parse(args.form)
    disc = disc_ternary(Q)
    manifest = Manifest("densities", {"form": args.form.replace(" ", ","),
                                      "p": ",".join(map(str, args.p)),
                                      "depth": args.depth if args.depth else "auto"})
    body = ["p,v_p,rank_mod_p,chi,closed,oracle,depth"]
    for p in args.p:
        if p < 2 or not sympy.isprime(p):
            raise InvalidArgument(f"{p} is not a prime")
        v = valuation(disc, p) if disc else "inf"
        rank = rank_mod_p(Q, p) if p != 2 else "-"
        try:
            chi = chi_p(Q, p) if p != 2 else "-"
        except ConicBundleError:
            chi = "-"
        try:
            closed = fmt_num(sigma_p_closed(Q, p).sigma)
        except ConicBundleError:
            closed = "-"
        if args.depth:
            depth = args.depth
        else:
            base = v if isinstance(v, int) else 0
            depth = base + (3 if p == 2 else 2)
        oracle = sigma_p_oracle(Q, p, depth)
        body.append(",".join(str(x) for x in (p, v, rank, chi, closed, fmt_num(oracle), depth)))
    _emit(out, manifest, body)
    return 0


# ------------------------------------------------------------ detector

def cmd_detector(args, out) -> int:
    S, text = _load_surface(args.surface)
    if not smoothness_check(S):
        raise InvalidArgument("surface is not smooth")
    inv = invariants(S)
    k = len(inv.split_points)
    Bs = sorted(args.B)
    base = tuple(args.base) if args.base else _auto_base(S)
    cfg = build_admissible_config(S, base, B_values=tuple(Bs))
    rep = admissibility_check(S, cfg)
    lo_s, hi_s, lo_t, hi_t = cfg.region
    manifest = Manifest("detector", {
        "B": ",".join(map(str, Bs)), "base": f"{base[0]},{base[1]}", "w": cfg.w,
        "W": cfg.base_modulus, "l": cfg.power,
        "region": f"[{lo_s},{hi_s}]x[{lo_t},{hi_t}]", "split": k}, text)
    body = [f"# {rep.summary()}", "B,points,D,ref_D,ratio_D"]
    for B in Bs:
        Dv = divisor_sum_D(S, cfg, B)
        n = len(lattice_points(cfg, B))
        ref = B * B * math.log(B) ** k
        body.append(",".join(fmt_num(x) for x in (B, n, Dv, ref, float(Dv) / ref)))
    _emit(out, manifest, body)
    return 0


# ------------------------------------------------------------------ dp

def cmd_dp(args, out) -> int:
    d = args.degree
    if args.action == "model":
        m = table4_model(d)
        print(f"({','.join(map(str, m.a))}) ({m.bidegree[0]},{m.bidegree[1]}) {m.minus_K}", file=out)
        return 0
    if args.action == "check":
        if not args.surface:
            raise InvalidArgument("dp check needs a surface file")
        S, _ = _load_surface(args.surface)
        v = is_del_pezzo(S, d)
        print(f"verdict: {v.verdict}", file=out)
        print(f"reason: {v.reason}", file=out)
        return 0
    if d not in (5, 4, 3):
        raise Unsupported(f"classification is available for d in 5, 4 (3 with --deep), not {d}")
    classes = subgroup_classes(d, deep=args.deep)
    cons = theorem11_consistency(d, classes, deep=args.deep)
    total, cb, c0, c3 = classification_summary(classes)
    manifest = Manifest("dp classify", {"degree": d, "deep": args.deep,
                                        "rho_d": cons.rho_d,
                                        "consistency": "pass" if cons.passed else "FAIL"},
                        workers=1)
    body = ["class_id,order,invariant_rank,has_cb,min_complexity"]
    for i, c in enumerate(classes):
        mc = "" if c.min_complexity is None else str(c.min_complexity)
        body.append(f"{i},{c.order},{c.invariant_rank},{'true' if c.has_cb else 'false'},{mc}")
    body.append(f"summary,{total},{cb},{c0},{c3}")
    _emit(out, manifest, body)
    return 0 if cons.passed else 4


# ----------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conicbundles",
                                description="Rational points on conic bundle surfaces.")
    sub = p.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analyze", help="invariants and fibre classification of a surface")
    a.add_argument("surface")

    c = sub.add_parser("count", help="fibrewise point counts and density sums")
    c.add_argument("surface")
    c.add_argument("--B", type=int, nargs="+", required=True)
    c.add_argument("--pmax", type=int, default=50)
    c.add_argument("--steps", type=int, default=1024, help="quadrature steps for omega_inf")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--cutoff", type=int, default=None, help="fixed base-point height cutoff")
    c.add_argument("--cutoff-exponent", type=float, default=0.5,
                   help="cutoff = round(B^x) when --cutoff is not given (default 0.5)")
    c.add_argument("--base", type=int, nargs=2, default=None, metavar=("S0", "T0"))

    dn = sub.add_parser("densities", help="local densities of a ternary form")
    dn.add_argument("form", help="six integers 'a b c d e f'")
    dn.add_argument("--p", type=int, nargs="+", required=True)
    dn.add_argument("--depth", type=int, default=None)

    dt = sub.add_parser("detector", help="detector divisor sums with admissibility report")
    dt.add_argument("surface")
    dt.add_argument("--B", type=int, nargs="+", required=True)
    dt.add_argument("--base", type=int, nargs=2, default=None, metavar=("S0", "T0"))

    g = sub.add_parser("dp", help="del Pezzo data: classify, check or model")
    g.add_argument("action", choices=["classify", "check", "model"])
    g.add_argument("surface", nargs="?")
    g.add_argument("--degree", type=int, required=True)
    g.add_argument("--deep", action="store_true", help="allow the long degree 3 run")
    return p


COMMANDS = {"analyze": cmd_analyze, "count": cmd_count, "densities": cmd_densities,
            "detector": cmd_detector, "dp": cmd_dp}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # `dp check --degree d FILE` puts the file after the options
    if args.cmd == "dp" and extra and not args.surface and len(extra) == 1 \
            and not extra[0].startswith("-"):
        args.surface = extra[0]
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return COMMANDS[args.cmd](args, out)
    except ConicBundleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
