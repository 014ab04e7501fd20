"""The counterexample pipeline: Cayley polytope -> weighted 2-fan -> double cover -> F-hat.

Stages, each checked as it is produced:

1. ``build_base``: a Cayley polytope C of n-1 polygons along the standard
   circuit, its face fan Sigma (the normal fan of the polar P), a simplicial
   refinement Sigma', and F = p^{n-2} mu with p the support function of P.
2. ``link_graph`` / ``double_cover``: the graph X of rays and 2-cones of F and
   its double cover cut along the half-plane {x1 = 0, x2 > 0}.
3. ``perturb_and_rebalance``: separate the two sheets, re-solve the
   balancing system and pick a positive weight whose support is uniquely
   balanced.

The polygons are sampled symmetric under the lattice involution T that
negates x1 and swaps paired circuit vectors. T preserves the cut half-plane,
so it lifts to a fixed-point-free involution of the cover exchanging the
sheets; keeping the perturbation T-equivariant makes deg(w^2) = deg(w'^2)
hold exactly on the final fan.
"""

from __future__ import annotations

import random
from itertools import combinations
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

from tropicap import ratlin
from tropicap.polyhedra import (
    FlagPair,
    Polytope,
    cayley_polytope,
    cone_meets_halfplane,
    normal_fan,
    origin_in_interior_2d,
    polar,
    triangulate_fan,
)
from tropicap.tropical import (
    PLFunction,
    WeightedFan,
    balancing_weight_space,
    check_balancing,
    divisor_power_weight,
    pairing_terms,
    positive_generator,
    product_with_lineality,
)


class RetriesExhausted(RuntimeError):
    pass


class DimensionBound(ValueError):
    """The perturbed cover cannot be embedded: needs ambient dimension >= 4."""


class InvalidInstance(ValueError):
    pass


class InvariantBreach(RuntimeError):
    """A property guaranteed by the construction failed its exact check."""


# ---------------------------------------------------------------------------
# fixed data: flags, circuit, involution


def standard_flags(n: int) -> FlagPair:
    return FlagPair(tuple(int(j == 0) for j in range(n)), tuple(int(j == 1) for j in range(n)))


def standard_circuit(n: int) -> list[list[int]]:
    """e_3, ..., e_{n-1}, -(e_3 + ... + e_{n-1}): a circuit in the line space x1 = x2 = 0."""
    circ = [[int(j == i + 2) for j in range(n)] for i in range(n - 2)]
    circ.append([0, 0] + [-1] * (n - 2))
    return circ


def circuit_pairing(m: int) -> list[int]:
    """Involution on circuit indices swapping 0<->1, 2<->3, ...; an odd one out stays fixed."""
    perm = list(range(m))
    for i in range(0, m - 1, 2):
        perm[i], perm[i + 1] = i + 1, i
    return perm


def involution_matrix(n: int) -> list[list[int]]:
    """T with T e1 = -e1, T e2 = e2 and T c_i = c_perm(i) on the standard circuit."""
    circ = standard_circuit(n)
    perm = circuit_pairing(n - 1)
    cols = [[-int(j == 0) for j in range(n)], [int(j == 1) for j in range(n)]]
    for i in range(n - 2):  # c_i = e_{i+2}
        cols.append(list(circ[perm[i]]))
    return ratlin.transpose(cols)


def apply(t: Sequence[Sequence], v: Sequence) -> list:
    return ratlin.matvec(t, v)


# ---------------------------------------------------------------------------
# polygons


def reflect(poly: Sequence[Sequence[int]]) -> list[tuple[int, int]]:
    """Mirror image under x -> -x, listed counterclockwise again."""
    return [(-x, y) for x, y in reversed(poly)]


def sample_polygon(rng: random.Random, k: int, radius: int) -> list[tuple[int, int]]:
    """k integer points near a circle, in convex position, origin inside, none on x = 0."""
    import math

    while True:
        angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(k))
        pts = [(round(radius * math.cos(a)), round(radius * math.sin(a))) for a in angles]
        if len(set(pts)) < k or any(x == 0 for x, _ in pts):
            continue
        if not origin_in_interior_2d(pts) or not _convex_position(pts):
            continue
        return pts


def sample_symmetric_polygon(rng: random.Random, radius: int) -> list[tuple[int, int]]:
    """Trapezoid symmetric about x = 0, origin inside."""
    lo, hi = max(2, radius // 4), radius
    while True:
        a, c = rng.randint(lo, hi), rng.randint(lo, hi)
        b, d = rng.randint(lo, hi), -rng.randint(lo, hi)
        if a != c:
            return [(c, d), (a, b), (-a, b), (-c, d)]


def _convex_position(pts: Sequence[Sequence[int]]) -> bool:
    k = len(pts)
    for i in range(k):
        p, q, r = pts[i], pts[(i + 1) % k], pts[(i + 2) % k]
        if (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0]) <= 0:
            return False
    return True


def symmetric_polygons(n: int, rng: random.Random, radius: int) -> list[list[tuple[int, int]]]:
    """n-1 polygons: pentagon pairs for n = 3, triangle pairs otherwise, plus one trapezoid if n-1 is odd."""
    m = n - 1
    k = 5 if n == 3 else 3
    polys: list = [None] * m
    for i in range(0, m - 1, 2):
        polys[i] = sample_polygon(rng, k, radius)
        polys[i + 1] = reflect(polys[i])
    if m % 2:
        polys[m - 1] = sample_symmetric_polygon(rng, radius)
    return polys


# ---------------------------------------------------------------------------
# graphs


@dataclass
class LinkGraph:
    vertices: list  # ray indices of F
    edges: list  # sorted ray-index pairs, one per 2-cone


@dataclass
class CoverEdge:
    u: int
    v: int
    crossing: bool
    origin: int  # index into LinkGraph.edges


@dataclass
class CoverGraph:
    """Double cover of a link graph. Vertex i < size is a on sheet 0, i + size is a' on sheet 1."""

    base: LinkGraph
    edges: list  # CoverEdge, two per base edge
    rays: list = field(default_factory=list)  # direction per cover vertex (may be empty)
    weights: list = field(default_factory=list)  # base weight per cover edge (may be empty)
    sheet_swap: list | None = None  # fixed-point-free involution of cover vertices, if symmetric
    matrix: list | None = None  # linear map realising sheet_swap on rays

    @property
    def size(self) -> int:
        return len(self.base.vertices)

    @property
    def vertex_count(self) -> int:
        return 2 * self.size

    def sheet(self, x: int) -> int:
        return x // self.size

    def base_vertex(self, x: int) -> int:
        return self.base.vertices[x % self.size]

    def edge_pairs(self) -> list[tuple[int, int]]:
        return [(e.u, e.v) for e in self.edges]

    def crossing_pairs(self) -> list[tuple[int, int]]:
        return [(e.u, e.v) for e in self.edges if e.crossing]


def link_graph(f: WeightedFan) -> LinkGraph:
    edges = sorted(tuple(sorted(c)) for c in f.cones)
    if any(len(e) != 2 for e in edges):
        raise InvalidInstance("link graph needs a simplicial 2-fan (mod lineality)")
    return LinkGraph(f.used_rays(), edges)


def double_cover(
    x: LinkGraph,
    crossing_edges,
    rays: Sequence[Sequence[int]] | None = None,
    weights: Sequence | None = None,
    flags: FlagPair | None = None,
) -> CoverGraph:
    """Lift non-crossing edges sheetwise (a-b, a'-b') and crossing ones across (a-b', a'-b).

    ``crossing_edges`` holds base edges (ray pairs) or edge indices. ``rays``
    and ``weights`` are indexed like the rays and edges of ``x``.
    """
    if flags is not None and rays is not None:
        for a in x.vertices:
            if ratlin.dot(flags.l_normal, rays[a]) == 0:
                from tropicap.polyhedra import NotTransversal

                raise NotTransversal(f"ray {a} lies in L")
    crossing = set()
    for c in crossing_edges:
        crossing.add(c if isinstance(c, int) else x.edges.index(tuple(sorted(c))))
    pos = {a: i for i, a in enumerate(x.vertices)}
    size = len(x.vertices)
    edges, lifted_w = [], []
    for k, (a, b) in enumerate(x.edges):
        i, j = pos[a], pos[b]
        if k in crossing:
            pairs = [(i, j + size), (i + size, j)]
        else:
            pairs = [(i, j), (i + size, j + size)]
        for u, v in pairs:
            edges.append(CoverEdge(u, v, k in crossing, k))
            if weights is not None:
                lifted_w.append(Fraction(weights[k]))
    cover_rays = []
    if rays is not None:
        cover_rays = [tuple(rays[a]) for a in x.vertices] * 2
    return CoverGraph(x, edges, cover_rays, lifted_w)


# ---------------------------------------------------------------------------
# base stage


@dataclass
class PipelineState:
    n: int
    seed: int
    flags: FlagPair
    circuit: list
    polygons: list
    cayley: Polytope  # C; the fan is its face fan
    P: Polytope  # polar of C, the polytope whose support function gives p
    sigma_rays: list
    sigma_cones: list  # Sigma', simplicial maximal cones
    F: WeightedFan
    zero_weight_cones: list  # 2-cones of Sigma' where p^{n-2} mu vanishes
    X: LinkGraph
    crossing: list  # indices into X.edges
    involution: list | None = None  # T as an integer matrix
    ray_perm: list | None = None  # action of T on the rays of F
    psi: dict = field(default_factory=dict)  # ray of F -> value of p minus a T-invariant linear function
    psi_zero: list = field(default_factory=list)  # rays where psi vanishes; they cover every crossing edge
    cover: CoverGraph | None = None
    perturbation: dict = field(default_factory=dict)
    F2: WeightedFan | None = None  # F-hat_{2, n}
    k: int = 2
    Fk: WeightedFan | None = None  # F-hat_{k, n + k - 2}
    retries: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)


def support_values(p: Polytope, rays: Sequence[Sequence[int]]) -> list[Fraction]:
    """p(v) = max over vertices x of P of <x, v>."""
    return [max(ratlin.dot(x, r) for x in p.vertices) for r in rays]


def _two_cones(cones: Sequence[frozenset]) -> set:
    out = set()
    for c in cones:
        ids = sorted(c)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                out.add(frozenset((ids[i], ids[j])))
    return out


def _find_psi(F: WeightedFan, p_values, crossing_edges, ray_perm, t) -> tuple[dict, list] | None:
    """psi = p - l with l linear and T-invariant, vanishing on a T-stable cover of the crossing edges."""
    endpoints = sorted({a for e in crossing_edges for a in e})
    if ray_perm is None:
        orbits = [(a,) for a in endpoints]
    else:
        orbits = sorted({tuple(sorted({a, ray_perm[a]})) for a in endpoints})
    n = F.ambient_dim
    best = None
    # smallest covers first; the orbit count stays small so brute force is fine
    for size in range(1, len(orbits) + 1):
        for pick in combinations(orbits, size):
            w = sorted({a for o in pick for a in o})
            if len(w) > n or any(not (set(e) & set(w)) for e in crossing_edges):
                continue
            sol = ratlin.solve([list(map(Fraction, F.rays[a])) for a in w], [p_values[a] for a in w])
            if sol is None:
                continue
            if t is not None:
                # average with its T-pullback; constraints are T-stable so it still solves them
                pulled = ratlin.matvec(ratlin.transpose(t), sol)
                sol = [(x + y) / 2 for x, y in zip(sol, pulled)]
            best = (sol, w)
            break
        if best:
            break
    if best is None:
        return None
    sol, w = best
    psi = {a: p_values[a] - ratlin.dot(sol, F.rays[a]) for a in F.used_rays()}
    if any(psi[a] != 0 for a in w):
        return None
    return psi, w


def build_base(
    n: int,
    seed: int,
    polygons: Sequence | None = None,
    budget: int = 64,
    radius: int = 20,
    symmetric: bool = True,
) -> PipelineState:
    """Run the polytope and weight stages, retrying until every stage check passes.

    ``polygons`` (if given) is tried first; later attempts sample fresh ones.
    """
    if n < 3:
        raise InvalidInstance("need n >= 3")
    flags = standard_flags(n)
    circuit = standard_circuit(n)
    t = involution_matrix(n) if symmetric else None
    retries = {"genericity": 0, "transversality": 0, "witness": 0}
    for attempt in range(budget):
        rng = random.Random(f"{seed}:base:{attempt}")
        if attempt == 0 and polygons is not None:
            polys = [list(map(tuple, p)) for p in polygons]
        elif symmetric:
            polys = symmetric_polygons(n, rng, radius)
        else:
            polys = [sample_polygon(rng, 5 if n == 3 else 3, radius) for _ in range(n - 1)]
        cp = cayley_polytope(polys, circuit, flags)
        if not cp.generic:
            retries["genericity"] += 1
            continue
        P = polar(cp.polytope)
        nf = normal_fan(P)
        cones = triangulate_fan(nf.rays, nf.cones[n])
        sigma = WeightedFan(n, n, nf.rays, {c: 1 for c in cones})
        p_values = support_values(P, nf.rays)
        F = divisor_power_weight(PLFunction.from_list(p_values), sigma, n - 2)
        if any(w < 0 for w in F.cones.values()):
            raise InvariantBreach("p^{n-2} mu has a negative weight")
        zero = sorted((sorted(c) for c in _two_cones(cones) - set(F.cones)))
        if any(ratlin.dot(flags.l_normal, F.rays[a]) == 0 for a in F.used_rays()):
            retries["transversality"] += 1
            continue
        X = link_graph(F)
        crossing = [k for k, e in enumerate(X.edges) if cone_meets_halfplane([F.rays[a] for a in e], flags)]
        ray_perm = None
        if t is not None:
            index = {tuple(r): i for i, r in enumerate(F.rays)}
            try:
                ray_perm = [index[tuple(apply(t, r))] for r in F.rays]
            except KeyError:
                ray_perm = None
            if ray_perm is None or any(
                F.cones.get(frozenset(ray_perm[a] for a in c)) != w for c, w in F.cones.items()
            ):
                if polygons is not None and attempt == 0:
                    t = None
                else:
                    raise InvariantBreach("sampled polytope is not T-symmetric")
        found = _find_psi(F, p_values, [X.edges[k] for k in crossing], ray_perm, t)
        if found is None and n >= 4:
            retries["witness"] += 1
            continue
        psi, psi_zero = found if found else ({}, [])
        state = PipelineState(
            n=n,
            seed=seed,
            flags=flags,
            circuit=circuit,
            polygons=[list(map(list, p)) for p in polys],
            cayley=cp.polytope,
            P=P,
            sigma_rays=[list(r) for r in nf.rays],
            sigma_cones=[sorted(c) for c in cones],
            F=F,
            zero_weight_cones=zero,
            X=X,
            crossing=crossing,
            involution=t,
            ray_perm=ray_perm,
            psi=psi,
            psi_zero=psi_zero,
            retries=retries,
        )
        state.checks.update(
            generic=True,
            weights_nonnegative=True,
            transversal=True,
            misses_line=all(
                ratlin.dot(flags.l_normal, F.rays[a]) != 0 or ratlin.dot(flags.i_normal, F.rays[a]) != 0
                for a in F.used_rays()
            ),
            symmetric=ray_perm is not None,
        )
        state.cover = double_cover(X, crossing, F.rays, [F.cones[frozenset(e)] for e in X.edges], flags)
        if ray_perm is not None:
            pos = {a: i for i, a in enumerate(X.vertices)}
            size = len(X.vertices)
            swap = [0] * (2 * size)
            for a in X.vertices:
                i, j = pos[a], pos[ray_perm[a]]
                swap[i], swap[j + size] = j + size, i
            state.cover.sheet_swap = swap
            state.cover.matrix = t
        return state
    raise RetriesExhausted(f"base stage failed after {budget} attempts: {retries}")


# A pentagon and its negative. Their edge normals alternate around the
# circle, which is what makes every lateral face of the Cayley polytope a
# triangle; the link graph is then the pentagonal antiprism.
FIGURE_PENTAGONS = (
    ((5, 0), (2, 5), (-4, 3), (-4, -3), (2, -5)),
    ((-5, 0), (-2, -5), (4, -3), (4, 3), (-2, 5)),
)


def pentagon_instance() -> PipelineState:
    return build_base(3, 0, polygons=FIGURE_PENTAGONS, budget=1)


# ---------------------------------------------------------------------------
# perturbation


def lattice_index(a: Sequence[int], b: Sequence[int]) -> int:
    """Index of Z a + Z b in its saturation (gcd of the 2x2 minors)."""
    out = 0
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            out = gcd(out, a[i] * b[j] - a[j] * b[i])
    return out


def _scale(pos: Sequence[Fraction], prim: Sequence[int]) -> Fraction:
    k = next(i for i, x in enumerate(prim) if x)
    return Fraction(pos[k]) / prim[k]


def two_cones_embedded(rays: Sequence[Sequence[int]], cones: Sequence[frozenset]) -> bool:
    """Exact check that distinct rays span 2-cones meeting only along common faces."""
    if len({tuple(r) for r in rays}) != len(rays):
        return False
    cones = [tuple(sorted(c)) for c in cones]
    n = len(rays[0]) if rays else 0
    pl = [_plucker(rays[a], rays[b]) for a, b in cones]
    quads = list(combinations(range(n), 4))
    for x in range(len(cones)):
        for y in range(x + 1, len(cones)):
            if set(cones[x]).isdisjoint(cones[y]) and any(_meet(pl[x], pl[y], q) for q in quads):
                continue  # four independent rays: the cones only share the origin
            if not _pair_ok(rays, cones[x], cones[y]):
                return False
    return True


def _plucker(a, b) -> dict:
    n = len(a)
    return {(i, j): a[i] * b[j] - a[j] * b[i] for i in range(n) for j in range(i + 1, n)}


def _meet(p, q, cols) -> int:
    # the 4x4 minor on ``cols`` of the rows a, b, c, d, by Laplace along two rows
    i, j, k, l = cols
    return (
        p[i, j] * q[k, l] - p[i, k] * q[j, l] + p[i, l] * q[j, k]
        + p[j, k] * q[i, l] - p[j, l] * q[i, k] + p[k, l] * q[i, j]
    )


def _pair_ok(rays, c1, c2) -> bool:
    shared = set(c1) & set(c2)
    if len(shared) == 2:
        return False
    if len(shared) == 1:
        (s,) = shared
        (b,) = set(c1) - shared
        (d,) = set(c2) - shared
        if ratlin.independent_rows([rays[s], rays[b], rays[d]]):
            return True
        ker = ratlin.kernel_basis(ratlin.transpose([rays[s], rays[b], rays[d]]))
        if not ker:
            return True
        if len(ker) > 1:
            return False
        kb, kd = ker[0][1], ker[0][2]
        # a point beta rho_b = gamma rho_d mod rho_s with beta, gamma > 0
        return not (kb != 0 and kd != 0 and (kb > 0) != (kd > 0))
    cols = [rays[c1[0]], rays[c1[1]], rays[c2[0]], rays[c2[1]]]
    if ratlin.independent_rows(cols):
        return True
    ker = ratlin.kernel_basis(ratlin.transpose(cols))
    if not ker:
        return True
    if len(ker) > 1:
        return False
    k = ker[0]
    left, right = k[:2], [-x for x in k[2:]]
    both = left + right
    return not (all(x >= 0 for x in both) or all(x <= 0 for x in both))


def _components(count: int, pairs) -> int:
    parent = list(range(count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(x) for x in range(count)})


def stress_space(pos: Sequence[Sequence], pairs: Sequence[tuple[int, int]]) -> list[list[Fraction]]:
    """Basis of the edge stresses s with sum_b s_ab pos_b in the span of pos_a at every vertex a.

    Multiplying s_ab by the lattice index and the two primitive scales gives
    the balancing weights of the 2-fan over the edges.
    """
    n = len(pos[0])
    rows = []
    for a in range(len(pos)):
        pa = pos[a]
        t = next(i for i in range(n) if pa[i] != 0)
        incident = [(e, b if u == a else u) for e, (u, b) in enumerate(pairs) if a in (u, b)]
        for r in range(n):
            if r == t:
                continue
            row = [0] * len(pairs)
            for e, b in incident:
                row[e] = pos[b][r] * pa[t] - pos[b][t] * pa[r]
            rows.append(row)
    return ratlin.integral_kernel_basis(rows, len(pairs))


def invariant_stress_space(
    pos: Sequence[Sequence], pairs: Sequence[tuple[int, int]], image: Sequence[int], size: int
) -> list[list[int]]:
    """Stresses constant on the edge orbits of the sheet swap.

    ``image`` maps an edge to its swapped edge and vertices below ``size``
    represent every vertex orbit; their equations imply the swapped ones
    because the positions are equivariant.
    """
    n = len(pos[0])
    orbit = {}
    for e in range(len(pairs)):
        orbit.setdefault(min(e, image[e]), len(orbit))
    col = [orbit[min(e, image[e])] for e in range(len(pairs))]
    rows = []
    for a in range(size):
        pa = pos[a]
        t = next(i for i in range(n) if pa[i] != 0)
        incident = [(e, b if u == a else u) for e, (u, b) in enumerate(pairs) if a in (u, b)]
        for r in range(n):
            if r == t:
                continue
            row = [0] * len(orbit)
            for e, b in incident:
                row[col[e]] += pos[b][r] * pa[t] - pos[b][t] * pa[r]
            rows.append(row)
    return [[x[col[e]] for e in range(len(pairs))] for x in ratlin.integral_kernel_basis(rows, len(orbit))]


def _perturbed_positions(cover: CoverGraph, eps: Fraction, rng: random.Random, denom: int) -> list[list[int]]:
    # ray + eps * |ray| * delta / denom, scaled by a common factor to stay integral
    n = len(cover.rays[0])
    eps = Fraction(eps)
    scale = denom * eps.denominator if eps else 1

    def moved(r):
        size = max(abs(x) for x in r)
        return [scale * x + eps.numerator * size * rng.randint(-denom, denom) for x in r]

    count = cover.vertex_count
    if cover.sheet_swap is None:
        return [moved(cover.rays[x]) for x in range(count)]
    pos: list = [None] * count
    for x in range(cover.size):  # sheet 0 holds one vertex of every orbit
        pos[x] = moved(cover.rays[x])
        pos[cover.sheet_swap[x]] = apply(cover.matrix, pos[x])
    assert all(len(p) == n for p in pos)
    return pos


def _project(basis: list[list[Fraction]], target: list[Fraction]) -> list[Fraction]:
    """Orthogonal projection of ``target`` onto the row span of ``basis``."""
    b = ratlin.to_flint(basis)
    t = ratlin.to_flint([target]).transpose()
    y = (b * b.transpose()).solve(b * t)
    return ratlin.from_flint(y.transpose() * b)[0]


def _walk_to_extreme(
    s: list[Fraction],
    basis: list[list[Fraction]],
    g: list[Fraction] | None,
    rng: random.Random,
) -> list[Fraction]:
    """Move s inside span(basis), keeping s >= 0 and (if g given) the functional g fixed,
    until the stresses vanishing where s vanishes form a line.

    Only the ray of s matters, so it is kept as a primitive integer vector.
    """
    s = ratlin.primitive(s)
    while True:
        zero = [e for e, x in enumerate(s) if x == 0]
        rows = [[b[e] for b in basis] for e in zero]
        if g is not None:
            rows.append(list(g))
        free = ratlin.integral_kernel_basis(rows, len(basis))
        if g is None:
            # s itself always lies in this space; stop once nothing else does
            if len(free) <= 1:
                return s
        elif not free:
            return s
        while True:
            coef = [rng.randint(-9, 9) for _ in free]
            y = [sum(c * v[k] for c, v in zip(coef, free)) for k in range(len(basis))]
            d = [sum(c * b[e] for c, b in zip(y, basis)) for e in range(len(s))]
            # a rescaling of s is no move at all
            if any(d) and (g is not None or ratlin.rank([d, s]) == 2):
                break
        if not any(x < 0 for x in d):
            d = [-x for x in d]
        # s + t d with t = s_e / -d_e minimal, scaled by -d_e
        e = min((e for e in range(len(s)) if d[e] < 0), key=lambda e: Fraction(s[e], -d[e]))
        s = ratlin.primitive([-d[e] * a + s[e] * b for a, b in zip(s, d)])


def perturb_and_rebalance(
    cover: CoverGraph,
    seed: int,
    budget: int = 16,
    *,
    psi: dict | None = None,
    denom: int = 64,
    walks: int = 8,
    log: dict | None = None,
) -> WeightedFan:
    """Separate the sheets of ``cover`` and return an embedded, uniquely and positively balanced 2-fan.

    Attempt 0 uses the unperturbed rays; attempt j >= 1 moves every vertex by
    at most 2^-(j+5) of its size (larger moves almost
    never keep the projected stress positive). The positive weight is the orthogonal
    projection of the doubled base weights onto the new balancing space,
    pushed to an extreme ray of the (T-invariant) positive cone so that its
    support is balanced uniquely up to scale. When ``psi`` is given the push
    keeps deg(w^2) for w = psi on sheet 0 fixed.
    """
    if not cover.rays or not cover.weights:
        raise InvalidInstance("cover needs rays and base weights")
    n = len(cover.rays[0])
    if n < 4:
        raise DimensionBound(f"a perturbed 2-dimensional cover cannot be embedded in R^{n}")
    size = cover.size
    pairs = cover.edge_pairs()
    base_rays = cover.rays
    target = [w / lattice_index(base_rays[u], base_rays[v]) for w, (u, v) in zip(cover.weights, pairs)]
    omega = None
    if psi is not None:
        omega = {x: Fraction(psi.get(cover.base_vertex(x), 0)) for x in range(size)}
    info = {"attempts": 0}
    for attempt in range(budget + 1):
        info["attempts"] = attempt + 1
        rng = random.Random(f"{seed}:perturb:{attempt}")
        eps = Fraction(0) if attempt == 0 else Fraction(1, 2 ** (attempt + 5))
        pos = _perturbed_positions(cover, eps, rng, denom)
        prim = [ratlin.primitive(p) for p in pos]
        cones = [frozenset(p) for p in pairs]
        if len(set(cones)) != len(cones) or len(set(map(tuple, prim))) != len(prim):
            continue  # coinciding rays never embed; attempt 0 always stops here
        if cover.sheet_swap is not None:
            swap = cover.sheet_swap
            edge_of = {frozenset(p): e for e, p in enumerate(pairs)}
            image = [edge_of[frozenset((swap[u], swap[v]))] for u, v in pairs]
            # projecting onto the invariant part equals projecting and then symmetrizing
            sym = invariant_stress_space(pos, pairs, image, size)
        else:
            sym = stress_space(pos, pairs)
        if not sym:
            continue
        s = _project(sym, target)
        if any(x <= 0 for x in s):
            continue
        # stress coordinates: lattice weight = stress * index * scale_u * scale_v
        factor = [
            lattice_index(prim[u], prim[v]) * _scale(pos[u], prim[u]) * _scale(pos[v], prim[v]) for u, v in pairs
        ]
        if not two_cones_embedded(prim, cones):
            continue
        full = WeightedFan(n, 2, prim, {c: 1 for c in cones})
        if full.supports_span() != n:
            continue
        g = None
        if omega is not None:
            terms = pairing_terms(full)
            # deg(w^2) is linear in the weights: one coefficient per cone
            quad = [
                factor[e] * sum(omega.get(i, 0) * omega.get(j, 0) * c for i, j, c in terms.terms[cone])
                for e, cone in enumerate(cones)
            ]

            def degree_sq(stress):
                return sum(x * q for x, q in zip(stress, quad))

            g = [degree_sq(b) for b in sym]
            # the walk keeps deg(w^2) fixed, so it has to start positive
            if degree_sq(s) <= 0:
                continue
        for walk in range(walks):
            wrng = random.Random(f"{seed}:walk:{attempt}:{walk}")
            s_ext = _walk_to_extreme(list(s), sym, g, wrng)
            keep = [e for e, x in enumerate(s_ext) if x != 0]
            fan = full.copy_with_weights({cones[e]: s_ext[e] * factor[e] for e in keep})
            if fan.supports_span() != n:
                continue
            kept = [pairs[e] for e in keep]
            if _components(2 * size, kept) != 1:
                continue
            if _components(2 * size, [pairs[e] for e in keep if not cover.edges[e].crossing]) != 2:
                continue
            ws = balancing_weight_space(fan)
            gen = positive_generator(ws)
            if gen is None:
                continue
            out = fan.copy_with_weights(dict(zip(ws.cones, gen)))
            info.update(
                epsilon=str(eps),
                walk=walk,
                invariant_dim=len(sym),
                dropped_edges=[list(pairs[e]) for e, x in enumerate(s_ext) if x == 0],
            )
            if log is not None:
                # the full stress count is diagnostic only
                info["stress_dim"] = len(stress_space(pos, pairs))
                log.update(info)
            return out
    if log is not None:
        log.update(info)
    raise RetriesExhausted(f"no acceptable perturbation within {budget} attempts")


def witness_pair(state: PipelineState) -> tuple[list[int], list[int], list[Fraction]]:
    """(V, V', psi): sheet 0, the matching lifts on sheet 1, and psi on each base ray."""
    cover = state.cover
    v = list(range(cover.size))
    return v, [x + cover.size for x in v], [Fraction(state.psi.get(cover.base_vertex(x), 0)) for x in v]


# ---------------------------------------------------------------------------
# full pipeline


def build_counterexample(
    k: int,
    n: int,
    seed: int,
    base_budget: int = 64,
    perturb_budget: int = 16,
    denom: int = 64,
) -> tuple[PipelineState, WeightedFan]:
    """F-hat_{k,n} = R^{k-2} x F-hat_{2, n-k+2}, a k-dimensional fan in R^n."""
    if k < 2 or n - k < 1:
        raise InvalidInstance("need k >= 2 and n > k")
    base_n = n - k + 2
    if base_n < 4:
        raise DimensionBound(f"the 2-dimensional factor would live in R^{base_n}; embedding needs R^4 or more")
    state = build_base(base_n, seed, budget=base_budget)
    log: dict = {}
    f2 = perturb_and_rebalance(state.cover, seed, perturb_budget, psi=state.psi, denom=denom, log=log)
    state.perturbation = log
    state.F2 = f2
    fk = product_with_lineality(f2, k - 2)
    if not check_balancing(fk).passed:
        raise InvariantBreach("product fan failed balancing")
    state.k = k
    state.Fk = fk
    state.checks.update(embedded=True, unique_weight=True, positive=True, spans=True, balanced=True)
    return state, fk
