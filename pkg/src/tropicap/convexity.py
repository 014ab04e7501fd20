"""Certificates for the counterexample fans.

* the double-cover witness: the cover is connected and cutting the crossing
  lifts leaves exactly two components;
* graph Betti numbers, computed twice (union-find and Smith form);
* a randomized but exactly verified search for supporting caps;
* the degree pairing on a 2-fan and the Hodge-index test pair (w, w').
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, isqrt
from typing import Sequence

import flint

from tropicap import ratlin
from tropicap.construction import InvariantBreach
from tropicap.ratlin import InertiaTriple
from tropicap.tropical import (
    PLFunction,
    WeightedFan,
    balancing_weight_space,
    check_balancing,
    degree,
    divisor_intersect,
    pairing_matrix,
)


class BadPartition(ValueError):
    pass


# ---------------------------------------------------------------------------
# graphs


def _as_graph(g) -> tuple[list, list[tuple]]:
    if hasattr(g, "vertex_count"):  # CoverGraph
        return list(range(g.vertex_count)), g.edge_pairs()
    if hasattr(g, "vertices"):
        return list(g.vertices), [tuple(e) for e in g.edges]
    vertices, edges = g
    if isinstance(vertices, int):
        vertices = list(range(vertices))
    return list(vertices), [tuple(e) for e in edges]


def components(vertices: Sequence, edges: Sequence[tuple]) -> int:
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(v) for v in vertices})


def boundary_matrix(vertices: Sequence, edges: Sequence[tuple]) -> list[list[int]]:
    """Edges x vertices, row e = v - u for e = (u, v)."""
    col = {v: i for i, v in enumerate(vertices)}
    rows = []
    for u, v in edges:
        row = [0] * len(vertices)
        row[col[v]] += 1
        row[col[u]] -= 1
        rows.append(row)
    return rows


def graph_homology(g) -> tuple[int, int]:
    """(b0, b1) of a graph, given as a LinkGraph, a CoverGraph or (vertices, edges)."""
    vertices, edges = _as_graph(g)
    b0 = components(vertices, edges)
    if edges and vertices:
        diag = ratlin.smith_diagonal(boundary_matrix(vertices, edges))
        rank = sum(1 for d in diag if d)
    else:
        rank = 0
    if len(vertices) - rank != b0:
        raise InvariantBreach(f"b0 is {b0} by union-find but {len(vertices) - rank} by Smith form")
    return b0, len(edges) - len(vertices) + b0


def cover_certificate(cover) -> tuple[bool, int]:
    """(cover is connected, components once the crossing lifts are removed).

    (True, 2) is the witness: H0 of the cut cover has a nontrivial cokernel.
    """
    vertices = list(range(cover.vertex_count))
    pairs = cover.edge_pairs()
    connected = components(vertices, pairs) == 1
    cut = [(e.u, e.v) for e in cover.edges if not e.crossing]
    return connected, components(vertices, cut)


# ---------------------------------------------------------------------------
# exact feasibility by Fourier-Motzkin
#
# An inequality is (a, c, strict) meaning a.x + c >= 0, or > 0 when strict.
# Internally rows are integer tuples (a..., c) divided by their content, so
# positive rescaling never changes a row and duplicates collapse.


def _int_row(a, c) -> tuple:
    row = list(a) + [c]
    if all(type(x) is int for x in row):
        return _content(row)
    return tuple(ratlin.primitive(row))


def _content(row) -> tuple:
    g = 0
    for x in row:
        if x:
            g = gcd(g, x)
            if g == 1:
                return tuple(row)
    return tuple(x // g for x in row) if g > 1 else tuple(row)


def _substitute(eqs, ineqs, nvars, keep):
    """Use the equalities to eliminate variables (kept ones only when pinned).

    One fraction-free rref of [A | c] gives d x_p = -(sum B_pf x_f + B_pc) for
    every pivot p; a single integer product then rewrites all inequalities in
    the free variables. Returns integer rows with strictness flags, or None
    when the equalities clash.
    """
    rows = [(_int_row(a, c), s) for a, c, s in ineqs]
    eqs = [_int_row(a, c) for a, c in eqs]
    eqs = [e for e in eqs if any(e)]
    if not eqs:
        return rows
    order = [j for j in range(nvars) if j not in keep] + sorted(keep) + [nvars]
    red, d, rank = flint.fmpz_mat([[e[j] for j in order] for e in eqs]).rref()
    d = int(d)
    flat = [int(x) for x in red.entries()]
    width = nvars + 1
    sign = 1 if d > 0 else -1
    d *= sign
    # S maps (x, 1) written in free variables back to d * (x, 1)
    s = [[d * (i == j) for j in range(width)] for i in range(width)]
    pinned = []
    for i in range(rank):
        row = [0] * width
        for q, j in enumerate(order):
            row[j] = sign * flat[i * width + q]
        p = next(j for j in order if row[j])
        if p == nvars:
            return None  # 0 = nonzero constant
        s[p] = [0 if j == p else -row[j] for j in range(width)]
        if p in keep:
            pinned.append(tuple(row))
    if rows:
        prod = (flint.fmpz_mat([list(r) for r, _ in rows]) * flint.fmpz_mat(s)).entries()
        rows = [(_content([int(x) for x in prod[i * width : (i + 1) * width]]), st) for i, (_, st) in enumerate(rows)]
    for e in pinned:
        rows.append((_content(list(e)), False))
        rows.append((_content([-x for x in e]), False))
    return rows


def _collect(rows, nvars):
    out: dict = {}
    for row, s in rows:
        if not any(row[:nvars]):
            c = row[nvars]
            if c < 0 or (s and c == 0):
                return None
            continue
        out[row] = out.get(row, False) or s
    return out


def _eliminate(rows, nvars, keep):
    """Fourier-Motzkin on every variable outside ``keep``; None if infeasible."""
    cur = _collect(rows, nvars)
    if cur is None:
        return None
    live = [j for j in range(nvars) if j not in keep]
    while live:
        best = None
        for j in live:
            pos = sum(1 for r in cur if r[j] > 0)
            neg = sum(1 for r in cur if r[j] < 0)
            cost = pos * neg - pos - neg
            if best is None or cost < best[0]:
                best = (cost, j)
        j = best[1]
        live.remove(j)
        pos = [(r, s) for r, s in cur.items() if r[j] > 0]
        neg = [(r, s) for r, s in cur.items() if r[j] < 0]
        new = [(r, s) for r, s in cur.items() if r[j] == 0]
        for rp, sp in pos:
            for rn, sn in neg:
                fp, fn = -rn[j], rp[j]
                new.append((_content([fp * x + fn * y for x, y in zip(rp, rn)]), sp or sn))
        cur = _collect(new, nvars)
        if cur is None:
            return None
    return cur


def feasible(eqs, ineqs, nvars: int) -> bool:
    rows = _substitute(eqs, ineqs, nvars, set())
    return rows is not None and _eliminate(rows, nvars, set()) is not None


def interval(eqs, ineqs, nvars: int, j: int) -> tuple[Fraction | None, Fraction | None] | None:
    """Range of x_j over a closed polyhedron; None if empty, None ends if unbounded."""
    rows = _substitute(eqs, ineqs, nvars, {j})
    if rows is None:
        return None
    rows = _eliminate(rows, nvars, {j})
    if rows is None:
        return None
    lo = hi = None
    for r in rows:
        # r_j x + c >= 0
        bound = Fraction(-r[nvars], r[j])
        if r[j] > 0:
            lo = bound if lo is None else max(lo, bound)
        else:
            hi = bound if hi is None else min(hi, bound)
    if lo is not None and hi is not None and lo > hi:
        return None
    return lo, hi


# ---------------------------------------------------------------------------
# supporting caps


@dataclass
class Cap:
    """A round open disk in an affine plane, with an escape direction.

    The disk is {center + sum t_i basis_i : |sum t_i basis_i| < radius}.
    ``witness`` records the box used to verify compactness: the support
    meets the closed box |t|_inf <= box in the smaller box |t|_inf <= extent.
    """

    center: list
    basis: list
    radius: Fraction
    escape: list
    epsilon: Fraction
    witness: dict = field(default_factory=dict)


def _sqrt_upper(x: Fraction, den: int = 1 << 12) -> Fraction:
    """A rational >= sqrt(x)."""
    num = x.numerator * den * den
    q, r = divmod(num, x.denominator)
    root = isqrt(q)
    if root * root < q or r:
        root += 1
    return Fraction(root, den)


def _cone_variables(f: WeightedFan, cone) -> list[list[int]]:
    return [list(f.rays[i]) for i in sorted(cone)]


def _point_system(f, cone, center, basis, escape, radius, strict_box, epsilon):
    """Constraints for center + B t (+ eps v) in cone, |t|_inf <= radius.

    Variables: t (k), then eps if escape is given, then lambda, then mu.
    Rows come out integral: a rational constant scales its own row.
    """
    n = f.ambient_dim
    k = len(basis)
    gens = _cone_variables(f, cone)
    lin = f.lineality
    e = 1 if escape is not None else 0
    nvars = k + e + len(gens) + len(lin)

    def integral(a, c):
        # ints and Fractions both carry numerator and denominator
        if c.denominator == 1:
            return a, c.numerator
        return [x * c.denominator for x in a], c.numerator

    eqs = []
    for r in range(n):
        a = [b[r] for b in basis]
        if escape is not None:
            a.append(escape[r])
        a += [-g[r] for g in gens]
        a += [-v[r] for v in lin]
        eqs.append(integral(a, center[r]))
    ineqs = []

    def unit(j, sign=1):
        a = [0] * nvars
        a[j] = sign
        return a

    for i in range(k):
        ineqs.append((*integral(unit(i, -1), radius), strict_box))
        ineqs.append((*integral(unit(i, 1), radius), strict_box))
    if escape is not None:
        ineqs.append((unit(k, 1), 0, True))
        ineqs.append((*integral(unit(k, -1), epsilon), False))
    for j in range(len(gens)):
        ineqs.append((unit(k + e + j), 0, False))
    return eqs, ineqs, nvars


def _star_order(f: WeightedFan, rays: frozenset) -> list:
    # cones through the anchor's rays first: a non-cap is usually refuted there
    cones = sorted(f.cones, key=sorted)
    return [c for c in cones if rays <= c] + [c for c in cones if not rays <= c]


def _escapes(f: WeightedFan, cap: Cap, box: Fraction, order) -> bool:
    """True if no shifted box meets the support.

    A refuting cone is moved to the front of ``order`` (a list, changed in
    place); the answer does not depend on the order, only the run time.
    """
    for i, cone in enumerate(order):
        eqs, ineqs, nvars = _point_system(f, cone, cap.center, cap.basis, cap.escape, box, True, cap.epsilon)
        if feasible(eqs, ineqs, nvars):
            if i and isinstance(order, list):
                order.insert(0, order.pop(i))
            return False
    return True


def _extent(f: WeightedFan, cap: Cap, box: Fraction, order) -> tuple[Fraction | None, list]:
    """Largest |t_i| over the support inside the closed box, and the cones met."""
    worst = None
    met = []
    for cone in order:
        eqs, ineqs, nvars = _point_system(f, cone, cap.center, cap.basis, None, box, False, None)
        hit = False
        for i in range(len(cap.basis)):
            span = interval(eqs, ineqs, nvars, i)
            if span is None:
                break
            hit = True
            lo, hi = span
            for x in (lo, hi):
                worst = abs(x) if worst is None else max(worst, abs(x))
        if hit:
            met.append(sorted(cone))
    return worst, met


def _disk_box(cap: Cap) -> tuple[list, Fraction]:
    gram = [[Fraction(ratlin.dot(u, v)) for v in cap.basis] for u in cap.basis]
    if ratlin.rank(gram) != len(gram):
        raise ValueError("cap basis is not independent")
    inv = ratlin.inverse(gram)
    widest = max(inv[i][i] for i in range(len(gram)))
    # |t_i| <= radius * sqrt(inv_ii) on the disk
    return gram, _sqrt_upper(Fraction(cap.radius) ** 2 * widest)


def verify_cap(f: WeightedFan, cap: Cap, order=None) -> bool:
    """Exact check of both cap conditions for the support of ``f``.

    The disk D sits in the box |t|_inf <= R. If the support meets the closed
    box only inside a box whose corners lie in D, then the support meets D
    in a nonempty compact set exactly when it meets the box. Escape is
    checked for the whole box, which contains D.
    """
    if cap.radius <= 0 or cap.epsilon <= 0 or not any(cap.escape):
        return False
    gram, box = _disk_box(cap)
    order = order if order is not None else sorted(f.cones, key=sorted)
    if not _escapes(f, cap, box, order):
        return False
    extent, met = _extent(f, cap, box, order)
    if extent is None or extent >= box:
        return False
    spread = sum(abs(x) for row in gram for x in row)
    if extent * extent * spread >= Fraction(cap.radius) ** 2:
        return False
    cap.witness = {"box": box, "extent": extent, "cones_met": met}
    return True


def _anchors(f: WeightedFan) -> list[tuple[list[int], frozenset]]:
    """The origin, every ray and every cone barycenter, each with the rays it lies on."""
    out = [([0] * f.ambient_dim, frozenset())]
    out += [(list(f.rays[i]), frozenset({i})) for i in f.used_rays()]
    for c in sorted(f.cones, key=sorted):
        out.append(([sum(f.rays[i][r] for i in c) for r in range(f.ambient_dim)], frozenset(c)))
    return out


def _trial(f: WeightedFan, cap_dim: int, seed: int, index: int, anchors, orders, bound: int) -> Cap | None:
    rng = random.Random(f"{seed}:cap:{index}")
    n = f.ambient_dim
    a = 0 if rng.random() < 0.5 else rng.randrange(len(anchors))
    center, rays = anchors[a]
    basis = [[rng.randint(-bound, bound) for _ in range(n)] for _ in range(cap_dim)]
    if ratlin.rank(basis) != cap_dim:
        return None
    if any(center) and rng.random() < 0.5:
        escape = [-x for x in center]
    else:
        escape = [rng.randint(-bound, bound) for _ in range(n)]
    if not any(escape):
        return None
    scale = max([abs(x) for x in center] + [1])
    cap = Cap(
        center=[Fraction(x) for x in center],
        basis=basis,
        radius=Fraction(scale, rng.choice([2, 4, 8])),
        escape=escape,
        epsilon=Fraction(1, rng.choice([1, 16, 256])),
    )
    if a not in orders:
        orders[a] = _star_order(f, rays)
    return cap if verify_cap(f, cap, orders[a]) else None


def _first_hit(args) -> tuple[int, Cap] | None:
    f, cap_dim, seed, lo, hi, bound = args
    anchors = _anchors(f)
    orders: dict = {}
    for index in range(lo, hi):
        cap = _trial(f, cap_dim, seed, index, anchors, orders, bound)
        if cap is not None:
            return index, cap
    return None


def find_supporting_cap(
    f: WeightedFan, cap_dim: int, trials: int = 10_000, seed: int = 0, *, bound: int = 3, threads: int | None = None
) -> Cap | None:
    """Search planes anchored at the origin, rays and cone barycenters for a cap.

    Every returned cap has passed ``verify_cap``; None is evidence only.
    Trial i is seeded by (seed, i) alone, so the first hit by index does not
    depend on the thread count.
    """
    if cap_dim < 1:
        raise ValueError("cap_dim must be at least 1")
    if threads is None:
        threads = int(os.environ.get("TROPICAP_THREADS", "1") or 1)
    if threads <= 1 or trials < 2 * threads:
        hit = _first_hit((f, cap_dim, seed, 0, trials, bound))
        return hit[1] if hit else None
    step = -(-trials // threads)
    chunks = [(f, cap_dim, seed, lo, min(lo + step, trials), bound) for lo in range(0, trials, step)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        hits = [h for h in pool.map(_first_hit, chunks) if h is not None]
    return min(hits, key=lambda h: h[0])[1] if hits else None


# ---------------------------------------------------------------------------
# degree pairing and the Hodge test pair


def _indicator(i: int) -> PLFunction:
    return PLFunction({i: 1})


def quotient_by_lineality(f: WeightedFan) -> WeightedFan:
    """The same cycle in Z^n / (lineality lattice)."""
    if not f.lineality:
        return f
    lin = ratlin.saturated_basis([list(v) for v in f.lineality], f.ambient_dim)
    s, _, v = ratlin.smith_normal_form(lin)
    m = len(lin)
    if any(s[i][i] != 1 for i in range(m)):
        raise InvariantBreach("lineality lattice is not saturated")
    vinv = ratlin.inverse(v)
    # x -> (v^-1 x)[m:] kills exactly the lineality lattice
    proj = [[int(x) for x in row] for row in vinv[m:]]
    rays = [tuple(ratlin.matvec(proj, r)) for r in f.rays]
    return WeightedFan(f.ambient_dim - m, f.dim - m, rays, dict(f.cones))


def intersection_matrix(f: WeightedFan) -> list[list[Fraction]]:
    """[deg(delta_i delta_j f)] over the rays of a balanced simplicial 2-fan (mod lineality).

    Computed by nested corner loci and compared with the per-cone pairing
    formula; a mismatch raises InvariantBreach.
    """
    g = quotient_by_lineality(f)
    if g.dim != 2:
        raise ValueError(f"need a 2-dimensional fan modulo lineality, got {g.dim}")
    size = len(g.rays)
    first = {}
    for j in g.used_rays():
        first[j] = divisor_intersect(_indicator(j), g)
    m = [[Fraction(0)] * size for _ in range(size)]
    for j, fj in first.items():
        for i in g.used_rays():
            if i > j:
                continue
            d = degree(divisor_intersect(_indicator(i), fj, check=False))
            m[i][j] = m[j][i] = d
    if m != pairing_matrix(g):
        raise InvariantBreach("nested corner loci and the pairing formula disagree")
    return m


def _degree_of(phi: PLFunction, chi: PLFunction, f: WeightedFan) -> Fraction:
    return degree(divisor_intersect(phi, divisor_intersect(chi, f), check=False))


def hodge_witness(
    f: WeightedFan, v_rays: Sequence[int], v_prime_rays: Sequence[int], psi: Sequence
) -> tuple[Fraction, Fraction, Fraction]:
    """(deg w^2, deg w'^2, deg w w') for w = psi on V and 0 on V', w' the mirror image.

    ``v_rays[i]`` and ``v_prime_rays[i]`` are the two lifts of one base ray
    and ``psi[i]`` its value.
    """
    v_rays, v_prime_rays = list(v_rays), list(v_prime_rays)
    if len(v_rays) != len(v_prime_rays) or len(psi) != len(v_rays):
        raise BadPartition("V, V' and psi must have equal length")
    tagged = v_rays + v_prime_rays
    if len(set(tagged)) != len(tagged):
        raise BadPartition("V and V' overlap")
    if set(tagged) != set(f.used_rays()):
        raise BadPartition("V and V' do not cover the rays of the fan")
    g = quotient_by_lineality(f)
    omega = PLFunction({r: x for r, x in zip(v_rays, psi)})
    omega_prime = PLFunction({r: x for r, x in zip(v_prime_rays, psi)})
    first = divisor_intersect(omega, g)
    first_prime = divisor_intersect(omega_prime, g)
    return (
        degree(divisor_intersect(omega, first, check=False)),
        degree(divisor_intersect(omega_prime, first_prime, check=False)),
        degree(divisor_intersect(omega, first_prime, check=False)),
    )


# ---------------------------------------------------------------------------
# the certificate


@dataclass
class Certificate:
    balanced: bool
    cover_connected: bool
    cut_components: int
    weight_space_dim: int
    positive: bool
    inertia: InertiaTriple
    deg_omega_sq: Fraction | None  # None when no test pair was given
    deg_omega_prime_sq: Fraction | None
    deg_mixed: Fraction | None
    omega: dict  # ray -> value
    omega_prime: dict
    k: int = 2
    n: int = 4
    seed: int = 0
    ambient_dim: int = 4
    digests: dict = field(default_factory=dict)

    @property
    def non_convexity(self) -> bool:
        return self.cover_connected and self.cut_components == 2

    @property
    def hodge_violation(self) -> bool:
        return self.inertia.n_plus >= 2

    @property
    def valid(self) -> bool:
        return (
            self.balanced
            and self.positive
            and self.weight_space_dim == 1
            and self.non_convexity
            and self.hodge_violation
            and self.deg_mixed == 0
            and self.deg_omega_sq is not None
            and self.deg_omega_sq == self.deg_omega_prime_sq > 0
        )

    @property
    def status(self) -> str:
        if self.valid:
            return "violation"
        return "no violation" if not self.hodge_violation else "incomplete"


def certify(
    f: WeightedFan,
    cover=None,
    v_rays: Sequence[int] | None = None,
    v_prime_rays: Sequence[int] | None = None,
    psi: Sequence | None = None,
    *,
    product: WeightedFan | None = None,
    **meta,
) -> Certificate:
    """Assemble the certificate for a 2-fan (mod lineality) and its optional cover data.

    ``product`` is the published fan when it differs from ``f`` (the k > 2
    case); balancing is checked on both.
    """
    balanced = check_balancing(f).passed
    if product is not None:
        balanced = balanced and check_balancing(product).passed
    connected, cut = cover_certificate(cover) if cover is not None else (False, 0)
    space = balancing_weight_space(f)
    positive = all(w > 0 for w in f.cones.values())
    triple = ratlin.inertia(intersection_matrix(f))
    degs: tuple = (None, None, None)
    omega: dict = {}
    omega_prime: dict = {}
    if v_rays is not None:
        degs = hodge_witness(f, v_rays, v_prime_rays, psi)
        omega = dict(zip(v_rays, psi))
        omega_prime = dict(zip(v_prime_rays, psi))
    return Certificate(
        balanced, connected, cut, space.dim, positive, triple, *degs, omega, omega_prime,
        ambient_dim=(product or f).ambient_dim, **meta,
    )
