"""Exact rational polytopes, cones and fans.

Everything here is desk scale: hulls are found by enumerating affinely
independent subsets as candidate facets, which is fine for a few dozen
points in dimension at most eight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

from tropicap import ratlin
from tropicap.ratlin import Vector, dot, primitive


class NotACircuit(ValueError):
    pass


class PolygonNotPlanar(ValueError):
    pass


class NotFullDimensional(ValueError):
    pass


class NotTransversal(ValueError):
    pass


@dataclass(frozen=True)
class Facet:
    normal: tuple  # primitive integer outer normal
    offset: Fraction  # normal . x <= offset on the polytope
    vertices: frozenset  # indices into Polytope.vertices


@dataclass
class Polytope:
    ambient_dim: int
    dim: int
    vertices: list  # lexicographically sorted rational vectors
    facets: list  # Facet records, sorted by vertex set
    equations: list = field(default_factory=list)  # (normal, offset) pairs cutting out the affine hull
    faces: dict = field(default_factory=dict)  # dim -> sorted list of vertex-index frozensets

    @property
    def is_full_dimensional(self) -> bool:
        return self.dim == self.ambient_dim

    def facets_containing(self, face: frozenset) -> frozenset:
        return frozenset(i for i, f in enumerate(self.facets) if face <= f.vertices)

    def contains(self, x: Sequence) -> bool:
        x = [Fraction(t) for t in x]
        return all(dot(a, x) == b for a, b in self.equations) and all(
            dot(f.normal, x) <= f.offset for f in self.facets
        )


def _key(v):
    return tuple(v)


def convex_hull(points: Iterable[Sequence]) -> Polytope:
    """Exact convex hull with facets and the full face lattice.

    Lower-dimensional point sets are allowed; their affine hull is recorded
    in ``equations`` and facet normals are taken inside its direction space.
    """
    pts = sorted({tuple(Fraction(x) for x in p) for p in points})
    if not pts:
        raise ValueError("convex hull of no points")
    n = len(pts[0])
    p0 = pts[0]
    diffs = [[a - b for a, b in zip(p, p0)] for p in pts[1:]]
    d = ratlin.rank(diffs) if diffs else 0
    eq_normals = [primitive(v) for v in ratlin.kernel_basis(diffs, n)] if diffs else [
        [int(i == j) for j in range(n)] for i in range(n)
    ]
    equations = [(tuple(a), dot(a, p0)) for a in eq_normals]

    if d == 0:
        poly = Polytope(n, 0, [list(p0)], [], equations, {0: [frozenset({0})]})
        return poly

    m = len(pts)
    raw_facets: dict[frozenset, tuple] = {}
    for subset in combinations(range(m), d):
        if any(set(subset) <= s for s in raw_facets):
            continue
        base = pts[subset[0]]
        rows = [[a - b for a, b in zip(pts[i], base)] for i in subset[1:]] + [list(a) for a in eq_normals]
        ker = ratlin.kernel_basis(rows, n)
        if len(ker) != 1:
            continue
        a = primitive(ker[0])
        b = dot(a, base)
        vals = [dot(a, p) - b for p in pts]
        if all(v <= 0 for v in vals):
            pass
        elif all(v >= 0 for v in vals):
            a = [-x for x in a]
            b = -b
            vals = [-v for v in vals]
        else:
            continue
        on = frozenset(i for i, v in enumerate(vals) if v == 0)
        raw_facets[on] = (tuple(a), b)

    # vertices: points whose facet incidences pin them down alone
    incid = {i: [s for s in raw_facets if i in s] for i in range(m)}
    vert_ids = []
    for i in range(m):
        inter = frozenset(range(m))
        for s in incid[i]:
            inter &= s
        if d == 1:
            is_vertex = len(incid[i]) > 0
        else:
            is_vertex = inter == {i}
        if is_vertex:
            vert_ids.append(i)
    renum = {old: new for new, old in enumerate(vert_ids)}
    vertices = [list(pts[i]) for i in vert_ids]
    facets = []
    for s, (a, b) in raw_facets.items():
        vs = frozenset(renum[i] for i in s if i in renum)
        facets.append(Facet(a, Fraction(b), vs))
    facets.sort(key=lambda f: sorted(f.vertices))
    poly = Polytope(n, d, vertices, facets, equations)
    poly.faces = face_lattice(poly)
    return poly


def face_lattice(poly: Polytope) -> dict[int, list[frozenset]]:
    """All nonempty faces as vertex-index sets, keyed by dimension."""
    top = frozenset(range(len(poly.vertices)))
    found = {top}
    frontier = {f.vertices for f in poly.facets}
    found |= frontier
    while frontier:
        new = set()
        for a, b in combinations(sorted(frontier, key=sorted), 2):
            c = a & b
            if c and c not in found:
                new.add(c)
        for a in frontier:
            for f in poly.facets:
                c = a & f.vertices
                if c and c not in found and c not in new:
                    new.add(c)
        found |= new
        frontier = new
    by_dim: dict[int, list[frozenset]] = {}
    for face in found:
        k = ratlin.affine_dimension([poly.vertices[i] for i in sorted(face)])
        by_dim.setdefault(k, []).append(face)
    return {k: sorted(v, key=sorted) for k, v in sorted(by_dim.items())}


def polar(poly: Polytope) -> Polytope:
    """Polar dual {y : <y, x> <= 1 on poly}; the origin must be interior.

    Built combinatorially from the face lattice, so no second hull is needed.
    """
    if not poly.is_full_dimensional:
        raise NotFullDimensional("polar needs a full-dimensional polytope")
    if any(f.offset <= 0 for f in poly.facets):
        raise ValueError("origin is not in the interior")
    n = poly.ambient_dim
    order = sorted(range(len(poly.facets)), key=lambda i: [Fraction(x) / poly.facets[i].offset for x in poly.facets[i].normal])
    new_index = {old: new for new, old in enumerate(order)}
    verts = [[Fraction(x) / poly.facets[i].offset for x in poly.facets[i].normal] for i in order]
    facets = []
    for vi, v in enumerate(poly.vertices):
        a = primitive(v)
        scale = Fraction(a[next(j for j, x in enumerate(a) if x)]) / v[next(j for j, x in enumerate(a) if x)]
        inc = frozenset(new_index[i] for i, f in enumerate(poly.facets) if vi in f.vertices)
        facets.append(Facet(tuple(a), scale, inc))
    facets.sort(key=lambda f: sorted(f.vertices))
    dual = Polytope(n, n, verts, facets, [])
    faces: dict[int, list[frozenset]] = {}
    for k, fs in poly.faces.items():
        for face in fs:
            if face == frozenset(range(len(poly.vertices))):
                continue
            dual_face = frozenset(new_index[i] for i, f in enumerate(poly.facets) if face <= f.vertices)
            faces.setdefault(n - 1 - k, []).append(dual_face)
    faces.setdefault(n, []).append(frozenset(range(len(verts))))
    dual.faces = {k: sorted(v, key=sorted) for k, v in sorted(faces.items())}
    return dual


# ---------------------------------------------------------------------------
# fans


@dataclass
class NormalFan:
    rays: list  # primitive integer vectors, one per facet of the polytope
    cones: dict  # dim -> list of ray-index frozensets
    dual_face: dict  # cone -> vertex-index frozenset of the dual face


def normal_fan(poly: Polytope) -> NormalFan:
    """Outer normal fan. The cone of a face is spanned by the normals of the facets containing it."""
    if not poly.is_full_dimensional:
        raise NotFullDimensional("normal fan needs a full-dimensional polytope")
    n = poly.ambient_dim
    rays = [list(f.normal) for f in poly.facets]
    cones: dict[int, list[frozenset]] = {}
    dual: dict[frozenset, frozenset] = {}
    for k, fs in poly.faces.items():
        for face in fs:
            cone = poly.facets_containing(face)
            if k == n:
                cone = frozenset()
            cones.setdefault(n - k, []).append(cone)
            dual[cone] = face
    return NormalFan(rays, {k: sorted(v, key=sorted) for k, v in sorted(cones.items())}, dual)


def cone_dim(rays: Sequence[Sequence], ids: Iterable[int]) -> int:
    rows = [rays[i] for i in ids]
    return ratlin.rank(rows) if rows else 0


def cone_facets(rays: Sequence[Sequence], ids: frozenset) -> list[frozenset]:
    """Facets of a pointed cone, as subsets of its ray indices."""
    ids_sorted = sorted(ids)
    d = cone_dim(rays, ids_sorted)
    if d <= 1:
        return [frozenset()] if d == 1 else []
    if d == len(ids_sorted):
        # simplicial: every subset missing one ray is a facet
        return sorted((frozenset(ids_sorted) - {i} for i in ids_sorted), key=sorted)
    n = len(rays[ids_sorted[0]])
    perp = ratlin.kernel_basis([rays[i] for i in ids_sorted], n)
    found: list[frozenset] = []
    for subset in combinations(ids_sorted, d - 1):
        if any(set(subset) <= s for s in found):
            continue
        rows = [list(rays[i]) for i in subset] + [list(p) for p in perp]
        ker = ratlin.kernel_basis(rows, n)
        if len(ker) != 1:
            continue
        a = ker[0]
        vals = {i: dot(a, rays[i]) for i in ids_sorted}
        if all(v >= 0 for v in vals.values()) or all(v <= 0 for v in vals.values()):
            found.append(frozenset(i for i, v in vals.items() if v == 0))
    return sorted(set(found), key=sorted)


def is_simplicial(rays: Sequence[Sequence], ids: Iterable[int]) -> bool:
    ids = list(ids)
    return cone_dim(rays, ids) == len(ids)


def triangulate_cone(rays: Sequence[Sequence], ids: frozenset) -> list[frozenset]:
    """Pulling triangulation, pulling rays in increasing index order."""
    rays_t = tuple(tuple(r) for r in rays)
    return sorted(_pull(rays_t, frozenset(ids)), key=sorted)


@lru_cache(maxsize=None)
def _pull(rays: tuple, ids: frozenset) -> frozenset:
    if is_simplicial(rays, ids):
        return frozenset({ids})
    apex = min(ids)
    out = set()
    for facet in cone_facets(rays, ids):
        if apex in facet:
            continue
        for simplex in _pull(rays, facet):
            out.add(simplex | {apex})
    return frozenset(out)


def triangulate_fan(rays: Sequence[Sequence], cones: Iterable[frozenset]) -> list[frozenset]:
    """Simplicial refinement of the given maximal cones using no new rays.

    Pulling with one global ray order is compatible across shared faces.
    """
    out = set()
    for c in cones:
        out.update(triangulate_cone(rays, frozenset(c)))
    return sorted(out, key=sorted)


# ---------------------------------------------------------------------------
# flags and the crossing test


@dataclass(frozen=True)
class FlagPair:
    """Oriented hyperplanes L = {l.x = 0} and I = {i.x = 0}; the sides l.x > 0, i.x > 0 are positive."""

    l_normal: tuple
    i_normal: tuple

    def __post_init__(self):
        if ratlin.rank([list(self.l_normal), list(self.i_normal)]) != 2:
            raise ValueError("flag normals must be linearly independent")

    def project(self, x: Sequence) -> tuple:
        return (dot(self.l_normal, x), dot(self.i_normal, x))

    def line_basis(self) -> list[Vector]:
        """Basis of the codimension-2 subspace L cap I."""
        return ratlin.kernel_basis([list(self.l_normal), list(self.i_normal)])


def cone_meets_halfplane(rays: Sequence[Sequence], flags: FlagPair) -> bool:
    """Does the relative interior of cone(rays) meet {l.x = 0, i.x > 0}?

    With a_j = l.r_j (all nonzero) and b_j = i.r_j, the slice of the open
    coefficient orthant by l.x = 0 is generated by |a_k| e_j + a_j e_k for
    a_j > 0 > a_k, so it suffices to test b on those generators.
    """
    a = [dot(flags.l_normal, r) for r in rays]
    if any(x == 0 for x in a):
        raise NotTransversal("a ray lies in L")
    b = [dot(flags.i_normal, r) for r in rays]
    for j, aj in enumerate(a):
        if aj <= 0:
            continue
        for k, ak in enumerate(a):
            if ak < 0 and -ak * b[j] + aj * b[k] > 0:
                return True
    return False


# ---------------------------------------------------------------------------
# 2d helpers


def _cross(p, q):
    return p[0] * q[1] - p[1] * q[0]


def origin_in_hull_2d(pts: Sequence[Sequence]) -> bool:
    pts = [tuple(Fraction(x) for x in p) for p in pts]
    if any(p == (0, 0) for p in pts):
        return True
    for p, q in combinations(pts, 2):
        if _cross(p, q) == 0 and p[0] * q[0] + p[1] * q[1] < 0:
            return True
    for p, q, r in combinations(pts, 3):
        s1, s2, s3 = _cross(p, q), _cross(q, r), _cross(r, p)
        if (s1 >= 0 and s2 >= 0 and s3 >= 0) or (s1 <= 0 and s2 <= 0 and s3 <= 0):
            if s1 or s2 or s3:
                return True
    return False


def origin_in_interior_2d(pts: Sequence[Sequence]) -> bool:
    pts = [tuple(Fraction(x) for x in p) for p in pts]
    nonzero = [p for p in pts if p != (0, 0)]
    if not nonzero:
        return False
    for p in nonzero:
        for f in ((-p[1], p[0]), (p[1], -p[0])):
            if all(f[0] * q[0] + f[1] * q[1] >= 0 for q in pts):
                return False
    return True


# ---------------------------------------------------------------------------
# Cayley polytopes


@dataclass
class CayleyPolytope:
    polytope: Polytope
    flags: FlagPair
    circuit: list
    polygons: list
    simplicial_off_line: bool  # faces missing L cap I are simplices
    subdivides_line: bool  # faces meeting L cap I do so transversally

    @property
    def generic(self) -> bool:
        return self.simplicial_off_line and self.subdivides_line


def check_circuit(circuit: Sequence[Sequence], flags: FlagPair) -> None:
    if len(circuit) < 2:
        raise NotACircuit("a circuit needs at least two vectors")
    n = len(circuit[0])
    if any(v != 0 for v in (sum(c[j] for c in circuit) for j in range(n))):
        raise NotACircuit("circuit vectors do not sum to zero")
    for c in circuit:
        if flags.project(c) != (0, 0):
            raise NotACircuit("circuit vector outside L cap I")
    for skip in range(len(circuit)):
        rest = [list(c) for i, c in enumerate(circuit) if i != skip]
        if ratlin.rank(rest) != len(rest):
            raise NotACircuit("a proper subset is dependent")


def cayley_polytope(
    polygons: Sequence[Sequence[Sequence[int]]], circuit: Sequence[Sequence[int]], flags: FlagPair
) -> CayleyPolytope:
    """conv of the polygons P_i + e_i, with P_i placed in the plane spanned by the flag normals.

    Polygon point (x, y) is embedded as x * l_normal + y * i_normal.
    """
    if len(polygons) != len(circuit):
        raise NotACircuit("need one polygon per circuit vector")
    check_circuit(circuit, flags)
    n = len(circuit[0])
    for poly in polygons:
        if any(len(p) != 2 for p in poly) or ratlin.affine_dimension([list(p) for p in poly]) != 2:
            raise PolygonNotPlanar("polygon must be a 2-dimensional point set in the plane")
    points = []
    for poly, e in zip(polygons, circuit):
        for x, y in poly:
            points.append([x * flags.l_normal[j] + y * flags.i_normal[j] + e[j] for j in range(n)])
    hull = convex_hull(points)
    simplicial_ok, transversal_ok = cayley_conditions(hull, flags)
    return CayleyPolytope(hull, flags, [list(c) for c in circuit], [list(map(list, p)) for p in polygons], simplicial_ok, transversal_ok)


def cayley_conditions(poly: Polytope, flags: FlagPair) -> tuple[bool, bool]:
    simplicial_ok = True
    transversal_ok = True
    for k, fs in poly.faces.items():
        if k == poly.dim:
            continue
        for face in fs:
            proj = [flags.project(poly.vertices[i]) for i in face]
            if origin_in_hull_2d(proj):
                if not origin_in_interior_2d(proj):
                    transversal_ok = False
            elif len(face) != k + 1:
                simplicial_ok = False
    return simplicial_ok, transversal_ok
