"""Weighted rational fans as tropical cycles.

A :class:`WeightedFan` stores its maximal cones as ray-index sets together
with a rational weight. Codimension-one faces are found as facets of the
maximal cones and matched by ray set, which is cheap at the sizes used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from tropicap import ratlin
from tropicap.polyhedra import cone_facets


class NotPure(ValueError):
    pass


class NotBalanced(ValueError):
    pass


class NotSimplicial(ValueError):
    pass


class NotZeroDimensional(ValueError):
    pass


@dataclass
class WeightedFan:
    ambient_dim: int
    dim: int
    rays: list  # primitive integer vectors
    cones: dict  # frozenset of ray indices -> Fraction weight (maximal cones only)
    lineality: list = field(default_factory=list)  # integer basis
    _qcache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.rays = [tuple(int(x) for x in r) for r in self.rays]
        self.lineality = [tuple(int(x) for x in v) for v in self.lineality]
        self.cones = {frozenset(c): Fraction(w) for c, w in self.cones.items()}

    # -- structure ---------------------------------------------------------

    def span(self, ids: Iterable[int]) -> list:
        return [list(self.rays[i]) for i in sorted(ids)] + [list(v) for v in self.lineality]

    def cone_dim(self, ids: Iterable[int]) -> int:
        rows = self.span(ids)
        return ratlin.rank(rows) if rows else 0

    def check_pure(self) -> None:
        for c in self.cones:
            if self.cone_dim(c) != self.dim:
                raise NotPure(f"cone {sorted(c)} has dimension {self.cone_dim(c)}, expected {self.dim}")

    def is_simplicial(self) -> bool:
        return all(len(c) + len(self.lineality) == self.dim for c in self.cones)

    def used_rays(self) -> list[int]:
        return sorted(set().union(*self.cones)) if self.cones else []

    def pruned(self) -> "WeightedFan":
        return WeightedFan(
            self.ambient_dim, self.dim, self.rays, {c: w for c, w in self.cones.items() if w != 0}, self.lineality
        )

    def facets_of(self, cone: frozenset) -> list[frozenset]:
        ids = sorted(cone)
        if self.lineality:
            lin = [list(v) for v in self.lineality]
            proj = {i: ratlin.reduce_mod_span(self.rays[i], lin) for i in ids}
        else:
            proj = {i: list(self.rays[i]) for i in ids}
        table = {i: proj[i] for i in ids}
        # cone_facets wants an indexable table
        lookup = _IndexTable(table)
        return cone_facets(lookup, frozenset(ids))

    @cached_property
    def codim1_faces(self) -> dict:
        """Codimension-one face -> list of maximal cones containing it."""
        self.check_pure()
        out: dict[frozenset, list[frozenset]] = {}
        for c in sorted(self.cones, key=sorted):
            for tau in self.facets_of(c):
                out.setdefault(tau, []).append(c)
        return dict(sorted(out.items(), key=lambda kv: sorted(kv[0])))

    def quotient_generator(self, sigma: frozenset, tau: frozenset) -> list:
        key = (sigma, tau)
        if key not in self._qcache:
            self._qcache[key] = self._quotient_generator(sigma, tau)
        return self._qcache[key]

    def _quotient_generator(self, sigma: frozenset, tau: frozenset) -> list:
        witness = next(self.rays[i] for i in sorted(sigma - tau))
        span_tau = self.span(tau)
        return ratlin.primitive_quotient_generator(self.span(sigma), span_tau if span_tau else [], witness)

    def supports_span(self) -> int:
        rows = self.span(self.used_rays())
        return ratlin.rank(rows) if rows else 0

    def copy_with_weights(self, weights: Mapping) -> "WeightedFan":
        out = WeightedFan(self.ambient_dim, self.dim, self.rays, dict(weights), self.lineality)
        out._qcache = self._qcache  # same rays and lineality, same generators
        return out


class _IndexTable:
    def __init__(self, table):
        self._t = table

    def __getitem__(self, i):
        return self._t[i]


# ---------------------------------------------------------------------------
# balancing


@dataclass
class BalancingEntry:
    face: frozenset
    defect: list  # canonical representative in Q^n / span(face)
    passed: bool


@dataclass
class BalancingReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]


def check_balancing(f: WeightedFan) -> BalancingReport:
    entries = []
    for tau, sigmas in f.codim1_faces.items():
        total = [Fraction(0)] * f.ambient_dim
        for sigma in sigmas:
            u = f.quotient_generator(sigma, tau)
            w = f.cones[sigma]
            total = [t + w * x for t, x in zip(total, u)]
        defect = ratlin.reduce_mod_span(total, f.span(tau))
        entries.append(BalancingEntry(tau, defect, all(x == 0 for x in defect)))
    return BalancingReport(entries)


@dataclass
class WeightSpace:
    basis: list  # kernel vectors, one entry per cone in ``cones`` order
    cones: list
    strongly_extremal: bool

    @property
    def dim(self) -> int:
        return len(self.basis)


def balancing_system(f: WeightedFan) -> tuple[list, list]:
    """Rows of the linear system whose kernel is the space of balancing weights."""
    cones = sorted(f.cones, key=sorted)
    col = {c: j for j, c in enumerate(cones)}
    rows = []
    for tau, sigmas in f.codim1_faces.items():
        span_tau = f.span(tau)
        if len(span_tau) == 1:
            # scale this block by |r_p| so it stays integral; the kernel is unchanged
            r = span_tau[0]
            p = next(j for j, x in enumerate(r) if x)
            sign = 1 if r[p] > 0 else -1

            def reduce(u, r=r, p=p, sign=sign):
                return [sign * (r[p] * x - u[p] * y) for x, y in zip(u, r)]

        else:

            def reduce(u, span_tau=span_tau):
                return ratlin.reduce_mod_span(u, span_tau)

        block = [[0] * len(cones) for _ in range(f.ambient_dim)]
        for sigma in sigmas:
            u = reduce(f.quotient_generator(sigma, tau))
            for k, x in enumerate(u):
                block[k][col[sigma]] += x
        rows.extend(r for r in block if any(r))
    return rows, cones


def balancing_weight_space(f: WeightedFan) -> WeightSpace:
    rows, cones = balancing_system(f)
    basis = ratlin.kernel_basis(rows, len(cones)) if rows else [
        [Fraction(int(i == j)) for j in range(len(cones))] for i in range(len(cones))
    ]
    spans = f.supports_span() == f.ambient_dim
    extremal = False
    if len(basis) == 1 and spans:
        extremal = all(x != 0 for x in basis[0])
    return WeightSpace(basis, cones, extremal)


def positive_generator(space: WeightSpace) -> list | None:
    """The kernel generator scaled to be positive and primitive, if one exists."""
    if space.dim != 1:
        return None
    v = space.basis[0]
    if all(x > 0 for x in v):
        pass
    elif all(x < 0 for x in v):
        v = [-x for x in v]
    else:
        return None
    return [Fraction(x) for x in ratlin.primitive(v)]


# ---------------------------------------------------------------------------
# piecewise linear functions and intersections


@dataclass
class PLFunction:
    """Values on the rays of a simplicial fan; zero on the lineality space."""

    values: dict  # ray index -> Fraction

    def __post_init__(self):
        self.values = {int(k): Fraction(v) for k, v in self.values.items()}

    @classmethod
    def from_list(cls, values: Sequence) -> "PLFunction":
        return cls({i: v for i, v in enumerate(values)})

    def value(self, i: int) -> Fraction:
        return self.values.get(i, Fraction(0))

    def on_cone(self, f: WeightedFan, cone: frozenset, v: Sequence) -> Fraction:
        """Evaluate the linear extension of this function from ``cone`` at ``v``."""
        ids = sorted(cone)
        basis = f.span(ids)
        if not basis:
            if any(x != 0 for x in v):
                raise ValueError("vector outside the span of the cone")
            return Fraction(0)
        coords = ratlin.coordinates(v, basis)
        if coords is None:
            raise ValueError("vector outside the span of the cone")
        return sum((c * self.value(i) for c, i in zip(coords, ids)), Fraction(0))


def linear_pl_function(f: WeightedFan, functional: Sequence) -> PLFunction:
    return PLFunction({i: ratlin.dot(functional, r) for i, r in enumerate(f.rays)})


def divisor_intersect(phi: PLFunction, f: WeightedFan, check: bool = True) -> WeightedFan:
    """Corner locus phi . f, a cycle of one dimension less.

    w(tau) = sum_sigma w(sigma) phi_sigma(v) - phi_tau(sum_sigma w(sigma) v),
    v the lattice representative of the outward generator of sigma over tau.
    """
    if check:
        if not f.is_simplicial():
            raise NotSimplicial("divisor intersection needs a simplicial fan")
        if not check_balancing(f).passed:
            raise NotBalanced("divisor intersection needs a balanced fan")
    out = {}
    for tau, sigmas in f.codim1_faces.items():
        acc = Fraction(0)
        vsum = [Fraction(0)] * f.ambient_dim
        for sigma in sigmas:
            v = f.quotient_generator(sigma, tau)
            w = f.cones[sigma]
            acc += w * phi.on_cone(f, sigma, v)
            vsum = [s + w * x for s, x in zip(vsum, v)]
        acc -= phi.on_cone(f, tau, vsum)
        if acc != 0:
            out[tau] = acc
    return WeightedFan(f.ambient_dim, f.dim - 1, f.rays, out, f.lineality)


def divisor_power_weight(p_fun: PLFunction, fan: WeightedFan, r: int) -> WeightedFan:
    """r-fold intersection of ``p_fun`` with the fundamental weight (1 on every maximal cone)."""
    cur = fan.copy_with_weights({c: 1 for c in fan.cones})
    for step in range(r):
        # corner loci of balanced cycles are balanced, so only the input is checked
        cur = divisor_intersect(p_fun, cur, check=(step == 0))
    return cur


def degree(f: WeightedFan) -> Fraction:
    if f.dim != 0 or f.lineality:
        raise NotZeroDimensional(f"cycle has dimension {f.dim}")
    return sum(f.cones.values(), Fraction(0))


def product_with_lineality(f: WeightedFan, m: int) -> WeightedFan:
    """R^m x f inside R^(m + n)."""
    if m == 0:
        return WeightedFan(f.ambient_dim, f.dim, f.rays, f.cones, f.lineality)
    pad = (0,) * m
    rays = [pad + r for r in f.rays]
    lin = [tuple(int(i == j) for j in range(m)) + (0,) * f.ambient_dim for i in range(m)]
    lin += [pad + v for v in f.lineality]
    return WeightedFan(f.ambient_dim + m, f.dim + m, rays, f.cones, lin)


def tropical_line() -> WeightedFan:
    return WeightedFan(2, 1, [(1, 0), (0, 1), (-1, -1)], {frozenset({0}): 1, frozenset({1}): 1, frozenset({2}): 1})


def line_cylinder() -> WeightedFan:
    """The tropical line times R, with R cut at the origin into two rays.

    A simplicial 2-fan in R^3 with no lineality, so the degree pairing
    applies to it directly. It is a tropical hypersurface.
    """
    line = tropical_line()
    rays = [r + (0,) for r in line.rays] + [(0, 0, 1), (0, 0, -1)]
    cones = {frozenset({i, j}): 1 for i in range(3) for j in (3, 4)}
    return WeightedFan(3, 2, rays, cones)


# ---------------------------------------------------------------------------
# degree pairing on 2-dimensional fans


@dataclass
class PairingTerms:
    """Per-cone contributions to the degree pairing of a 2-dimensional simplicial fan.

    For balanced weights w the matrix [deg(delta_i delta_j w)] is the sum over
    cones sigma of w(sigma) times the entries listed for sigma. Lineality
    directions are carried along and ignored by the indicator functions.
    """

    size: int
    terms: dict  # cone -> list of (i, j, coefficient)

    def matrix(self, weights: Mapping) -> list:
        m = [[Fraction(0)] * self.size for _ in range(self.size)]
        for cone, entries in self.terms.items():
            w = Fraction(weights.get(cone, 0))
            if w == 0:
                continue
            for i, j, c in entries:
                m[i][j] += w * c
        return m


def pairing_terms(f: WeightedFan) -> PairingTerms:
    if f.dim - len(f.lineality) != 2 or not f.is_simplicial():
        raise NotSimplicial("pairing terms need a simplicial fan with 2-dimensional cones mod lineality")
    lin = [list(v) for v in f.lineality]
    terms: dict[frozenset, list] = {c: [] for c in f.cones}
    for tau, sigmas in f.codim1_faces.items():
        (i,) = tuple(tau)
        ri = f.rays[i]
        for sigma in sigmas:
            (j,) = tuple(sigma - tau)
            v = f.quotient_generator(sigma, tau)
            if lin:
                # functional picking out the coefficient along ray i, blind to lineality
                h = ratlin.solve([list(ri)] + lin, [Fraction(1)] + [Fraction(0)] * len(lin))
                coords = ratlin.coordinates(v, [list(ri), list(f.rays[j])] + lin)
                alpha, beta, hv = coords[0], coords[1], ratlin.dot(h, v)
            else:
                alpha, beta, hv = _plane_coordinates(ri, f.rays[j], v)
            terms[sigma].append((i, j, beta))
            terms[sigma].append((i, i, alpha - hv))
    return PairingTerms(len(f.rays), terms)


def _plane_coordinates(a, b, v) -> tuple[Fraction, Fraction, Fraction]:
    """(alpha, beta, v_p / a_p) with v = alpha a + beta b and p the leading index of a.

    Cramer's rule on one nonzero 2x2 minor; v is assumed to lie in span(a, b).
    """
    n = len(a)
    p, q = next((p, q) for p in range(n) for q in range(p + 1, n) if a[p] * b[q] - a[q] * b[p])
    d = a[p] * b[q] - a[q] * b[p]
    alpha = Fraction(v[p] * b[q] - v[q] * b[p], d)
    beta = Fraction(a[p] * v[q] - a[q] * v[p], d)
    lead = next(k for k, x in enumerate(a) if x)
    return alpha, beta, Fraction(v[lead], a[lead])


def pairing_matrix(f: WeightedFan) -> list:
    """[deg(delta_i delta_j f)] for a balanced 2-dimensional simplicial fan (mod lineality)."""
    return pairing_terms(f).matrix(f.cones)
