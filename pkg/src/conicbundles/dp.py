"""
Lines, conics and Weyl group actions on del Pezzo surfaces of degree d,
realized in the lattice Z^(1,9-d) with K = (-3; 1, ..., 1), and the
classification of subgroups by conic bundles and their complexity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy

from .errors import InternalError, InvalidArgument, ResourceLimit

RHO_D = {5: 3, 4: 4, 3: 4, 2: 5, 1: 6}
N_D = {5: 5, 4: 80, 3: 432, 2: 4032, 1: 138240}
# (total, with a conic bundle, complexity 0, complexity <= 3) per degree
KNOWN_CLASS_COUNTS = {5: (19, 11, 4, 11), 4: (197, 73, 18, 23), 3: (350, 172, 19, 41),
                      2: (8074, None, None, None), 1: (62092, None, None, None)}


@dataclass(frozen=True, order=True)
class PicClass:
    coords: tuple

    def dot(self, other: "PicClass") -> int:
        a, b = self.coords, other.coords
        return a[0] * b[0] - sum(x * y for x, y in zip(a[1:], b[1:]))

    def square(self) -> int:
        return self.dot(self)

    def __add__(self, other):
        return PicClass(tuple(x + y for x, y in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return PicClass(tuple(x - y for x, y in zip(self.coords, other.coords)))

    def __rmul__(self, k: int):
        return PicClass(tuple(k * x for x in self.coords))


def canonical_class(d: int) -> PicClass:
    return PicClass((-3,) + (1,) * (9 - d))


def _check_degree(d: int, lo: int = 1, hi: int = 7):
    if not lo <= d <= hi:
        raise InvalidArgument(f"degree must be in {lo}..{hi}, got {d}")


def _solutions(n: int, c0: int, total: int, sumsq: int):
    """Integer vectors (c1..cn) with sum = total and sum of squares = sumsq."""
    out = []

    def rec(prefix, k, s, q):
        if k == 0:
            if s == 0 and q == 0:
                out.append(tuple(prefix))
            return
        # remaining k entries: need s^2 <= k q
        if q < 0 or s * s > k * q:
            return
        m = int(q ** 0.5) + 1
        for x in range(-m, m + 1):
            if x * x <= q:
                prefix.append(x)
                rec(prefix, k - 1, s - x, q - x * x)
                prefix.pop()

    rec([], n, total, sumsq)
    return [PicClass((c0,) + v) for v in out]


def _enumerate(d: int, square: int, kdot: int) -> list[PicClass]:
    """Classes D with D^2 = square and D.K = kdot.

    With D = (c0; c), D.K = -3c0 - sum c and D^2 = c0^2 - sum c^2, so
    sum c = -kdot - 3c0 and sum c^2 = c0^2 - square. Cauchy-Schwarz
    (sum c)^2 <= n sum c^2 bounds c0 for n = 9 - d <= 8.
    """
    n = 9 - d
    out = []
    c0 = 0
    bound = None
    # find the range of c0 from (3c0 + kdot)^2 <= n (c0^2 - square)
    cands = []
    for c in range(-50, 51):
        if c * c - square >= 0 and (3 * c + kdot) ** 2 <= n * (c * c - square):
            cands.append(c)
    for c0 in cands:
        out.extend(_solutions(n, c0, -kdot - 3 * c0, c0 * c0 - square))
    return sorted(out)


@dataclass(frozen=True)
class LineConfiguration:
    d: int
    lines: tuple
    adjacency: tuple

    def index(self, L: PicClass) -> int:
        return self.lines.index(L)


@lru_cache(maxsize=None)
def lines(d: int) -> LineConfiguration:
    _check_degree(d)
    ls = tuple(_enumerate(d, -1, -1))
    adj = tuple(tuple(a.dot(b) if i != j else 0 for j, b in enumerate(ls))
                for i, a in enumerate(ls))
    return LineConfiguration(d, ls, adj)


def roots(d: int) -> list[PicClass]:
    _check_degree(d)
    return _enumerate(d, -2, 0)


@lru_cache(maxsize=None)
def conic_classes(d: int) -> tuple:
    """Classes C with C^2 = 0 and -K.C = 2 that are sums of two meeting lines."""
    _check_degree(d)
    conf = lines(d)
    cands = _enumerate(d, 0, -2)
    pairs = singular_pairs_all(d)
    out = []
    for C in cands:
        if C in pairs:
            if len(pairs[C]) != 8 - d:
                raise InternalError(f"conic class {C} has {len(pairs[C])} line pairs, expected {8 - d}")
            out.append(C)
    if set(pairs) - set(out):
        raise InternalError("a sum of two meeting lines is not a conic class")
    return tuple(out)


@lru_cache(maxsize=None)
def singular_pairs_all(d: int) -> dict:
    """conic class -> list of index pairs (i, j), i < j, of lines with L_i + L_j = C."""
    conf = lines(d)
    out: dict = {}
    for i, j in itertools.combinations(range(len(conf.lines)), 2):
        if conf.adjacency[i][j] == 1:
            C = conf.lines[i] + conf.lines[j]
            out.setdefault(C, []).append((i, j))
    return out


def simple_roots(d: int) -> list[PicClass]:
    n = 9 - d
    out = []
    for i in range(1, n):
        v = [0] * (n + 1)
        v[i], v[i + 1] = 1, -1
        out.append(PicClass(tuple(v)))
    if n >= 3:
        out.append(PicClass((1, -1, -1, -1) + (0,) * (n - 3)))
    return out


def reflection_perm(conf: LineConfiguration, R: PicClass) -> tuple:
    idx = {L: i for i, L in enumerate(conf.lines)}
    out = []
    for L in conf.lines:
        img = L + L.dot(R) * R
        out.append(idx[img])
    return tuple(out)


# ---------------------------------------------------------------- groups

class PermGroup:
    """A finite permutation group with all elements listed.

    Products follow (x * y)[i] = x[y[i]]: apply y first.
    """

    def __init__(self, gens: Sequence[tuple], degree: int, key_points: Sequence[int],
                 max_order: int = 60000):
        self.degree = degree
        self.key_points = list(key_points)
        ident = tuple(range(degree))
        elems = [ident]
        index = {self._key(ident): 0}
        gens = [tuple(g) for g in gens]
        i = 0
        while i < len(elems):
            x = elems[i]
            for g in gens:
                y = tuple(g[x[k]] for k in range(degree))
                ky = self._key(y)
                if ky not in index:
                    index[ky] = len(elems)
                    elems.append(y)
                    if len(elems) > max_order:
                        raise ResourceLimit(f"group order exceeds {max_order}")
            i += 1
        self.elems = elems
        self.index = index
        self.gens = gens
        self.order = len(elems)
        self.P = np.array(elems, dtype=np.int16)
        self._mult = None
        self._inv = None

    def _key(self, perm) -> int:
        k = 0
        for p in self.key_points:
            k = k * self.degree + perm[p]
        return k

    def keys_of(self, P: np.ndarray) -> np.ndarray:
        k = np.zeros(P.shape[0], dtype=np.int64)
        for p in self.key_points:
            k = k * self.degree + P[:, p].astype(np.int64)
        return k

    def mult_table(self) -> np.ndarray:
        if self._mult is None:
            if self.order > 4000:
                raise ResourceLimit("multiplication table too large; use the element-wise path")
            keys = self.keys_of(self.P)
            order = np.argsort(keys)
            sk = keys[order]
            M = np.empty((self.order, self.order), dtype=np.int32)
            for i in range(self.order):
                comp = self.P[i][self.P]  # row j is x_i * x_j
                M[i] = order[np.searchsorted(sk, self.keys_of(comp))]
            self._mult = M
        return self._mult

    def mul(self, i: int, j: int) -> int:
        if self._mult is not None:
            return int(self._mult[i, j])
        x, y = self.elems[i], self.elems[j]
        return self.index[self._key(tuple(x[y[k]] for k in range(self.degree)))]

    def inverses(self) -> np.ndarray:
        if self._inv is None:
            inv = np.empty(self.order, dtype=np.int32)
            for i, x in enumerate(self.elems):
                y = [0] * self.degree
                for a, b in enumerate(x):
                    y[b] = a
                inv[i] = self.index[self._key(y)]
            self._inv = inv
        return self._inv

    def closure(self, gens: Sequence[int]) -> list[int]:
        """Element indices of the subgroup generated by gens, identity first."""
        M = self._mult
        seen = {0}
        out = [0]
        i = 0
        while i < len(out):
            x = out[i]
            for g in gens:
                y = int(M[x, g]) if M is not None else self.mul(x, g)
                if y not in seen:
                    seen.add(y)
                    out.append(y)
            i += 1
        return out


@lru_cache(maxsize=None)
def weyl_group(d: int) -> PermGroup:
    """W(E_{9-d}) acting on the lines, generated by the simple root reflections."""
    _check_degree(d, 1, 6)
    conf = lines(d)
    gens = [reflection_perm(conf, R) for R in simple_roots(d)]
    basis = _line_basis(conf)
    return PermGroup(gens, len(conf.lines), basis, max_order=700_000_000)


def _line_basis(conf: LineConfiguration) -> list[int]:
    """Indices of lines whose classes form a basis of Pic tensor Q."""
    chosen = []
    rows = []
    for i, L in enumerate(conf.lines):
        trial = rows + [list(L.coords)]
        if sympy.Matrix(trial).rank() == len(trial):
            rows = trial
            chosen.append(i)
        if len(chosen) == len(L.coords):
            break
    if len(chosen) != len(conf.lines[0].coords):
        raise InternalError("lines do not span the Picard lattice")
    return chosen


def graph_automorphism_count(conf: LineConfiguration, limit: int = 10 ** 6) -> int:
    """Automorphisms of the weighted line graph, by backtracking."""
    A = conf.adjacency
    n = len(A)
    order = _bfs_order(A)
    count = 0
    image = [-1] * n
    used = [False] * n

    def rec(k):
        nonlocal count
        if k == n:
            count += 1
            if count > limit:
                raise ResourceLimit("too many automorphisms")
            return
        v = order[k]
        for w in range(n):
            if used[w]:
                continue
            ok = True
            for j in range(k):
                u = order[j]
                if A[v][u] != A[w][image[u]]:
                    ok = False
                    break
            if ok:
                image[v] = w
                used[w] = True
                rec(k + 1)
                used[w] = False
                image[v] = -1

    rec(0)
    return count


def _bfs_order(A) -> list[int]:
    n = len(A)
    order, seen = [0], {0}
    while len(order) < n:
        # next vertex with the most neighbours already placed keeps pruning strong
        best = max((v for v in range(n) if v not in seen),
                   key=lambda v: sum(1 for u in order if A[v][u]))
        order.append(best)
        seen.add(best)
    return order


# ------------------------------------------------------ subgroup classes

@dataclass(frozen=True)
class SubgroupClass:
    generators: tuple      # permutations of the line set
    order: int
    invariant_rank: int
    has_cb: bool
    min_complexity: int | None
    orbit_criterion: bool
    elements: tuple = ()   # element indices in weyl_group(d)


def _orbits(gen_perms, n: int) -> list[list[int]]:
    seen = [False] * n
    out = []
    for i in range(n):
        if seen[i]:
            continue
        orb = [i]
        seen[i] = True
        k = 0
        while k < len(orb):
            x = orb[k]
            for g in gen_perms:
                y = g[x]
                if not seen[y]:
                    seen[y] = True
                    orb.append(y)
            k += 1
        out.append(sorted(orb))
    return out


def classify_perms(d: int, gen_perms: Sequence[tuple], elem_perms: Sequence[tuple] | None = None) -> dict:
    """Conic bundle data of the subgroup generated by gen_perms acting on the lines."""
    conf = lines(d)
    n = len(conf.lines)
    gen_perms = [tuple(g) for g in gen_perms] or [tuple(range(n))]
    orbits = _orbits(gen_perms, n)
    vecs = [[sum(conf.lines[i].coords[k] for i in orb) for k in range(10 - d)] for orb in orbits]
    rank = sympy.Matrix(vecs).rank()
    # invariant conic classes
    pairs_all = singular_pairs_all(d)
    invariant = []
    for C, prs in pairs_all.items():
        i, j = prs[0]
        if all(_class_of(conf, g, (i, j)) == C for g in gen_perms):
            invariant.append(C)
    # orbit criterion: two (possibly equal) orbits with (O1 + O2)^2 = 0
    orbit_ok = False
    for a in range(len(vecs)):
        for b in range(a, len(vecs)):
            v = [x + y for x, y in zip(vecs[a], vecs[b])]
            if PicClass(tuple(v)).square() == 0:
                orbit_ok = True
                break
        if orbit_ok:
            break
    has_cb = bool(invariant)
    if has_cb != orbit_ok:
        raise InternalError(f"invariant-class and orbit criteria disagree for d={d}")
    min_c = None
    if has_cb:
        if elem_perms is None:
            elem_perms = _all_elements(gen_perms, n)
        for C in invariant:
            c = _complexity(pairs_all[C], gen_perms, elem_perms)
            min_c = c if min_c is None else min(min_c, c)
    return {"invariant_rank": rank, "has_cb": has_cb, "min_complexity": min_c,
            "orbit_criterion": orbit_ok}


def _class_of(conf, g, pair):
    i, j = pair
    return conf.lines[g[i]] + conf.lines[g[j]]


def _all_elements(gens, n):
    ident = tuple(range(n))
    out, seen = [ident], {ident}
    k = 0
    while k < len(out):
        x = out[k]
        for g in gens:
            y = tuple(g[x[i]] for i in range(n))
            if y not in seen:
                seen.add(y)
                out.append(y)
        k += 1
    return out


def _complexity(prs, gens, elems) -> int:
    """Sum of sizes of pair-orbits whose stabilizer swaps the two lines."""
    pairs = {frozenset(p) for p in prs}
    if len(pairs) != len(prs):
        raise InternalError("repeated singular pair")
    remaining = set(pairs)
    total = 0
    n_orbit_sum = 0
    while remaining:
        rep = next(iter(sorted(remaining, key=sorted)))
        orb = {rep}
        frontier = [rep]
        while frontier:
            p = frontier.pop()
            for g in gens:
                q = frozenset(g[x] for x in p)
                if q not in pairs:
                    raise InternalError("group does not preserve the conic class")
                if q not in orb:
                    orb.add(q)
                    frontier.append(q)
        remaining -= orb
        n_orbit_sum += len(orb)
        i, j = sorted(rep)
        swapped = any(g[i] == j and g[j] == i for g in elems)
        if swapped:
            total += len(orb)
    if n_orbit_sum != len(pairs):
        raise InternalError("pair orbits do not partition the singular pairs")
    return total


def subgroup_classes(d: int, deep: bool = False, max_classes: int = 100_000) -> list[SubgroupClass]:
    """Conjugacy classes of subgroups of W(E_{9-d}), sorted by (order, fingerprint)."""
    _check_degree(d, 1, 6)
    if d <= 3 and not deep:
        raise ResourceLimit(f"degree {d} classification is long-running; pass deep=True")
    if d <= 2:
        raise ResourceLimit(f"degree {d} classification is out of scope")
    G = weyl_group(d)
    reps = _subgroup_reps(G, max_classes)
    out = []
    for elems, gens in reps:
        gen_perms = [G.elems[g] for g in gens]
        elem_perms = [G.elems[e] for e in elems]
        info = classify_perms(d, gen_perms, elem_perms)
        out.append(SubgroupClass(tuple(gen_perms), len(elems), info["invariant_rank"],
                                 info["has_cb"], info["min_complexity"],
                                 info["orbit_criterion"], tuple(sorted(elems))))
    out.sort(key=lambda c: (c.order, _fingerprint(G, c.elements), c.elements))
    return out


def _fingerprint(G: PermGroup, elems) -> tuple:
    cycle_types = sorted(_cycle_type(G.elems[e]) for e in elems)
    return tuple(cycle_types)


def _cycle_type(perm) -> tuple:
    n = len(perm)
    seen = [False] * n
    out = []
    for i in range(n):
        if not seen[i]:
            k = 0
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                k += 1
            out.append(k)
    return tuple(sorted(out))


def _subgroup_reps(G: PermGroup, max_classes: int):
    """One (elements, generators) pair per conjugacy class of subgroups.

    Every subgroup is reached from a smaller class representative by adjoining
    one element, so a breadth-first search over classes sees them all. All
    conjugates of each new class are stored, which turns deduplication into a
    set lookup.
    """
    if G.order > 4000:
        return _subgroup_reps_large(G, max_classes)
    M = G.mult_table()
    inv = G.inverses()
    # conj[x, h] = x h x^-1
    conj = np.empty((G.order, G.order), dtype=np.int32)
    for x in range(G.order):
        conj[x] = M[M[x], inv[x]]
    seen = set()
    reps = []

    def key(elems) -> bytes:
        mask = np.zeros(G.order, dtype=bool)
        mask[elems] = True
        return np.packbits(mask).tobytes()

    def register(elems, gens):
        arr = np.asarray(elems, dtype=np.int64)
        images = conj[:, arr]  # row x: x K x^-1
        mask = np.zeros((G.order, G.order), dtype=bool)
        np.put_along_axis(mask, images, True, axis=1)
        packed = np.packbits(mask, axis=1)
        for row in packed:
            seen.add(row.tobytes())
        reps.append((list(elems), list(gens)))
        if len(reps) > max_classes:
            raise ResourceLimit(f"more than {max_classes} subgroup classes")

    register([0], [])
    k = 0
    while k < len(reps):
        elems, gens = reps[k]
        k += 1
        inK = np.zeros(G.order, dtype=bool)
        inK[elems] = True
        covered = inK.copy()
        for g in range(G.order):
            if covered[g]:
                continue
            # <K, g> = <K, h g> for h in K: skip the rest of the coset K g
            covered[M[np.asarray(elems), g]] = True
            new = G.closure(gens + [g])
            kb = key(new)
            if kb not in seen:
                register(new, gens + [g])
    return reps


def _subgroup_reps_large(G: PermGroup, max_classes: int):
    """Same search for groups too large for a multiplication table.

    Classes are compared through invariants first, then by searching for a
    conjugating element among all group elements.
    """
    inv = G.inverses()
    P = G.P

    def conj_set(x, elems):
        # x h x^-1 as permutations: (x h x^-1)[i] = x[h[xinv[i]]]
        xi = G.P[inv[x]]
        Hs = P[np.asarray(elems)]
        img = P[x][Hs[:, xi]]
        keys = G.keys_of(img)
        return keys

    keyed = {}
    elem_keys = G.keys_of(P)
    key_to_index = dict(zip(elem_keys.tolist(), range(G.order)))
    buckets: dict = {}
    reps = []

    def invariants(elems):
        return (len(elems), tuple(sorted(_cycle_type(G.elems[e]) for e in elems)))

    def is_new(elems) -> bool:
        inv_key = invariants(elems)
        target = frozenset(elem_keys[np.asarray(elems)].tolist())
        for other in buckets.get(inv_key, []):
            for x in range(G.order):
                if frozenset(conj_set(x, other).tolist()) == target:
                    return False
        return True

    def register(elems, gens):
        buckets.setdefault(invariants(elems), []).append(list(elems))
        reps.append((list(elems), list(gens)))
        if len(reps) > max_classes:
            raise ResourceLimit(f"more than {max_classes} subgroup classes")

    register([0], [])
    tried = set()
    k = 0
    while k < len(reps):
        elems, gens = reps[k]
        k += 1
        covered = set(elems)
        for g in range(G.order):
            if g in covered:
                continue
            for h in elems:
                covered.add(G.mul(h, g))
            new = G.closure(gens + [g])
            fs = frozenset(new)
            if fs in tried:
                continue
            tried.add(fs)
            if is_new(new):
                register(new, gens + [g])
    return reps


def classify(G_class: SubgroupClass, d: int) -> dict:
    return classify_perms(d, G_class.generators)


def classification_summary(classes: Sequence[SubgroupClass]) -> tuple[int, int, int, int]:
    total = len(classes)
    cb = sum(1 for c in classes if c.has_cb)
    c0 = sum(1 for c in classes if c.has_cb and c.min_complexity == 0)
    c3 = sum(1 for c in classes if c.has_cb and c.min_complexity <= 3)
    return total, cb, c0, c3


# ------------------------------------------------------------ model data

@dataclass(frozen=True)
class ModelData:
    d: int
    a: tuple
    bidegree: tuple
    minus_K: str
    height_formula_id: str

    @property
    def e(self) -> int:
        return self.bidegree[0]


_MODEL_DATA = {
    5: ((0, 0, 0), (1, 2), "M+F", "H5"),
    4: ((0, 1, 1), (0, 2), "M", "H4"),
    3: ((0, 0, 1), (1, 2), "M", "H3"),
    2: ((0, 0, 0), (2, 2), "M", "H2"),
    1: ((0, 1, 1), (1, 2), "M-F", "H1"),
}


def table4_model(d: int) -> ModelData:
    _check_degree(d, 1, 5)
    a, bideg, mk, hid = _MODEL_DATA[d]
    return ModelData(d, a, bideg, mk, hid)


def minus_K_string(coeffs: tuple[int, int]) -> str:
    m, f = coeffs
    head = "M" if m == 1 else f"{m}M"
    if f == 0:
        return head
    if f == 1:
        return head + "+F"
    if f == -1:
        return head + "-F"
    return head + (f"+{f}F" if f > 0 else f"{f}F")


@dataclass
class ConsistencyReport:
    d: int
    rho_d: int
    checked: int
    passed: bool
    witnesses: list


def theorem11_consistency(d: int, classes: Sequence[SubgroupClass] | None = None,
                          deep: bool = False) -> ConsistencyReport:
    if d not in (5, 4, 3):
        raise InvalidArgument("consistency is checked for d in {5, 4} (and 3 with deep)")
    classes = classes if classes is not None else subgroup_classes(d, deep=deep)
    rho = RHO_D[d]
    bad = []
    checked = 0
    for i, c in enumerate(classes):
        if c.invariant_rank >= rho:
            checked += 1
            if not (c.has_cb and c.min_complexity is not None and c.min_complexity <= 3):
                bad.append((i, c.order, c.invariant_rank, c.has_cb, c.min_complexity))
    return ConsistencyReport(d, rho, checked, not bad, bad)
