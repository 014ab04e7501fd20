"""Exact integer and rational linear algebra.

Matrices are plain row-major lists of lists holding ``int`` or
``fractions.Fraction`` entries. Nothing in here touches floating point.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import NamedTuple, Sequence

import flint

Vector = list
Matrix = list


class NonSymmetric(ValueError):
    pass


class BadCorank(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class InertiaTriple(NamedTuple):
    n_plus: int
    n_zero: int
    n_minus: int


# ---------------------------------------------------------------------------
# basic helpers


def as_fraction_matrix(m: Sequence[Sequence]) -> Matrix:
    return [[Fraction(x) for x in row] for row in m]


def identity(n: int) -> Matrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def zeros(r: int, c: int) -> Matrix:
    return [[0] * c for _ in range(r)]


def transpose(m: Sequence[Sequence], cols: int | None = None) -> Matrix:
    if not m:
        return [[] for _ in range(cols or 0)]
    return [list(col) for col in zip(*m)]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    bt = list(zip(*b)) if b else []
    ncols = len(bt) if b else 0
    return [[sum(x * y for x, y in zip(row, bt[j])) for j in range(ncols)] for row in a]


def matvec(a: Sequence[Sequence], v: Sequence) -> Vector:
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def dot(u: Sequence, v: Sequence):
    return sum(x * y for x, y in zip(u, v))


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b) if a and b else 0


def clear_denominators(v: Sequence) -> Vector:
    """Scale a rational vector by a positive integer to make it integral."""
    if all(type(x) is int for x in v):
        return list(v)
    v = [x if type(x) is int else Fraction(x) for x in v]
    den = 1
    for x in v:
        if type(x) is not int and x.denominator != 1:
            den = lcm(den, x.denominator)
    if den == 1:
        return [int(x) for x in v]
    return [x * den if type(x) is int else x.numerator * (den // x.denominator) for x in v]


def primitive(v: Sequence) -> Vector:
    """Positive multiple of ``v`` that is a primitive integer vector."""
    w = clear_denominators(v)
    g = 0
    for x in w:
        g = gcd(g, x)
    if g == 0:
        return w
    return [x // g for x in w]


def is_symmetric(m: Sequence[Sequence]) -> bool:
    n = len(m)
    return all(len(row) == n for row in m) and all(
        m[i][j] == m[j][i] for i in range(n) for j in range(i + 1, n)
    )


# ---------------------------------------------------------------------------
# rational elimination


def _integer_rows(m: Sequence[Sequence]) -> list[list[int]]:
    out = []
    for row in m:
        if all(type(x) is int for x in row):
            out.append(list(row))
        else:
            out.append(clear_denominators(row))
    return out


def _echelon(m: Sequence[Sequence]) -> tuple[list[list[int]], list[int]]:
    # integer rows whose pivot entries all equal the common denominator
    a = _integer_rows(m)
    if not a or not a[0]:
        return [], []
    red, den, r = flint.fmpz_mat(a).rref()
    rows = [[int(x) for x in row] for row in red.tolist()[:r]]
    if den < 0:
        rows = [[-x for x in row] for row in rows]
    pivots = [next(c for c, x in enumerate(row) if x) for row in rows]
    return rows, pivots


def to_flint(m: Sequence[Sequence]) -> flint.fmpq_mat:
    rows = len(m)
    cols = len(m[0]) if rows else 0
    entries = [flint.fmpq(x) if type(x) is int else flint.fmpq(x.numerator, x.denominator) for row in m for x in row]
    return flint.fmpq_mat(rows, cols, entries)


def from_flint(m: flint.fmpq_mat) -> Matrix:
    return [[Fraction(int(x.p), int(x.q)) for x in row] for row in m.tolist()]


def rref(m: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form over Q and the list of pivot columns."""
    a, pivots = _echelon(m)
    return [[Fraction(x, row[p]) for x in row] for row, p in zip(a, pivots)], pivots


def rank(m: Sequence[Sequence]) -> int:
    a = _integer_rows(m)
    return flint.fmpz_mat(a).rank() if a and a[0] else 0


def kernel_basis(m: Sequence[Sequence], cols: int | None = None) -> list[Vector]:
    """Basis of the right kernel of ``m`` over Q.

    ``cols`` is needed only when ``m`` has no rows.
    """
    if cols is None:
        cols = len(m[0]) if m else 0
    if not m:
        return [[Fraction(int(i == j)) for j in range(cols)] for i in range(cols)]
    red, pivots = _echelon(m)
    taken = set(pivots)
    zero = Fraction(0)
    basis = []
    for f in range(cols):
        if f in taken:
            continue
        v = [zero] * cols
        v[f] = Fraction(1)
        for row, p in zip(red, pivots):
            if row[f]:
                v[p] = Fraction(-row[f], row[p])
        basis.append(v)
    return basis


def solve(a: Sequence[Sequence], b: Sequence) -> Vector | None:
    """One rational solution of ``a x = b``, or None if inconsistent."""
    cols = len(a[0]) if a else 0
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    red, pivots = rref(aug)
    if pivots and pivots[-1] == cols:
        return None
    x = [Fraction(0)] * cols
    for row, p in zip(red, pivots):
        x[p] = row[-1]
    return x


def integral_kernel_basis(m: Sequence[Sequence], cols: int | None = None) -> list[list[int]]:
    """Basis of the rational kernel of ``m`` made of primitive integer vectors.

    Spans the same space as ``kernel_basis`` but not necessarily the kernel
    lattice; use ``integer_kernel`` for that.
    """
    if cols is None:
        cols = len(m[0]) if m else 0
    a = _integer_rows(m)
    if not a:
        return [[int(i == j) for j in range(cols)] for i in range(cols)]
    red, pivots = _echelon(a)
    taken = set(pivots)
    out = []
    for f in range(cols):
        if f in taken:
            continue
        # all pivots of the integral echelon form share one value
        den = red[0][pivots[0]] if red else 1
        v = [0] * cols
        v[f] = den
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        out.append(primitive(v))
    return out


def integral_row_basis(m: Sequence[Sequence]) -> list[list[int]]:
    """Primitive integer rows spanning the row space of ``m``."""
    return [primitive(row) for row in _echelon(m)[0]] if m else []


def row_space_basis(m: Sequence[Sequence]) -> Matrix:
    return rref(m)[0] if m else []


def reduce_mod_span(v: Sequence, span: Sequence[Sequence]) -> Vector:
    """Canonical representative of ``v`` in Q^n / span(rows)."""
    out = [Fraction(x) for x in v]
    if not span:
        return out
    if len(span) == 1:
        # the reduced echelon form of one row is that row over its leading entry
        row = span[0]
        p = next((j for j, x in enumerate(row) if x), None)
        if p is None:
            return out
        f = out[p] / row[p]
        return [x - f * y for x, y in zip(out, row)] if f else out
    red, pivots = rref(span)
    for row, p in zip(red, pivots):
        if out[p] != 0:
            f = out[p]
            out = [x - f * y for x, y in zip(out, row)]
    return out


def in_span(v: Sequence, span: Sequence[Sequence]) -> bool:
    return all(x == 0 for x in reduce_mod_span(v, span))


def _bareiss_det(a: list[list[int]]) -> int:
    a = [list(row) for row in a]
    n = len(a)
    sign, prev = 1, 1
    for c in range(n - 1):
        if a[c][c] == 0:
            p = next((i for i in range(c + 1, n) if a[i][c]), None)
            if p is None:
                return 0
            a[c], a[p] = a[p], a[c]
            sign = -sign
        for i in range(c + 1, n):
            for j in range(c + 1, n):
                a[i][j] = (a[i][j] * a[c][c] - a[i][c] * a[c][j]) // prev
        prev = a[c][c]
    return sign * a[n - 1][n - 1]


def independent_rows(rows: Sequence[Sequence[int]]) -> bool:
    """True when the integer rows are linearly independent.

    Tries the leading maximal minors first, which settles the generic case
    without elimination.
    """
    k = len(rows)
    n = len(rows[0]) if k else 0
    if k > n:
        return False
    if k == 0:
        return True
    if k == n or n - k <= 1:
        for drop in ([()] if k == n else [(j,) for j in range(n - 1, -1, -1)]):
            keep = [j for j in range(n) if j not in drop]
            if _bareiss_det([[row[j] for j in keep] for row in rows]):
                return True
        return False
    return rank(rows) == k


def det(m: Sequence[Sequence]) -> Fraction:
    a = as_fraction_matrix(m)
    n = len(a)
    result = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            result = -result
        result *= a[c][c]
        for i in range(c + 1, n):
            if a[i][c] != 0:
                f = a[i][c] / a[c][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return result


def inverse(m: Sequence[Sequence]) -> Matrix:
    n = len(m)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]


# ---------------------------------------------------------------------------
# integer normal forms


def smith_normal_form(m: Sequence[Sequence[int]]) -> tuple[Matrix, Matrix, Matrix]:
    """Return ``(s, u, v)`` with ``u @ m @ v == s``.

    ``s`` is diagonal with nonnegative entries, each dividing the next;
    ``u`` and ``v`` are unimodular.
    """
    rows = len(m)
    cols = len(m[0]) if rows else 0
    s = [[int(x) for x in row] for row in m]
    u = identity(rows)
    v = identity(cols)

    def swap_rows(i, j):
        s[i], s[j] = s[j], s[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in s:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst -= q * row_src
        s[dst] = [a - q * b for a, b in zip(s[dst], s[src])]
        u[dst] = [a - q * b for a, b in zip(u[dst], u[src])]

    def add_col(dst, src, q):
        for row in s:
            row[dst] -= q * row[src]
        for row in v:
            row[dst] -= q * row[src]

    for t in range(min(rows, cols)):
        while True:
            best = None
            for i in range(t, rows):
                for j in range(t, cols):
                    if s[i][j] != 0 and (best is None or abs(s[i][j]) < abs(s[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                return s, u, v
            swap_rows(t, best[0])
            swap_cols(t, best[1])
            dirty = False
            for i in range(t + 1, rows):
                if s[i][t]:
                    add_row(i, t, s[i][t] // s[t][t])
                    dirty = dirty or s[i][t] != 0
            for j in range(t + 1, cols):
                if s[t][j]:
                    add_col(j, t, s[t][j] // s[t][t])
                    dirty = dirty or s[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, rows) for j in range(t + 1, cols) if s[i][j] % s[t][t]),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, -1)
        if s[t][t] < 0:
            s[t] = [-x for x in s[t]]
            u[t] = [-x for x in u[t]]
    return s, u, v


def smith_diagonal(m: Sequence[Sequence[int]]) -> list[int]:
    s = smith_normal_form(m)[0]
    return [s[i][i] for i in range(min(len(s), len(s[0]) if s else 0)) if s[i][i] != 0]


def hermite_normal_form(m: Sequence[Sequence[int]]) -> Matrix:
    """Row-style Hermite normal form, zero rows dropped.

    Pivots are positive and entries above each pivot lie in ``[0, pivot)``.
    """
    a = [[int(x) for x in row] for row in m]
    rows = len(a)
    cols = len(a[0]) if rows else 0
    r = 0
    for c in range(cols):
        if r == rows:
            break
        # gcd-combine column c of rows r.. into row r
        for i in range(r + 1, rows):
            while a[i][c] != 0:
                q = a[r][c] // a[i][c]
                a[r] = [x - q * y for x, y in zip(a[r], a[i])]
                a[r], a[i] = a[i], a[r]
        if a[r][c] == 0:
            continue
        if a[r][c] < 0:
            a[r] = [-x for x in a[r]]
        for i in range(r):
            q = a[i][c] // a[r][c]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[r])]
        r += 1
    return a[:r]


def reduce_mod_lattice(v: Sequence[int], hnf: Sequence[Sequence[int]]) -> Vector:
    out = [int(x) for x in v]
    for row in hnf:
        p = next(j for j, x in enumerate(row) if x != 0)
        q = out[p] // row[p]
        if q:
            out = [x - q * y for x, y in zip(out, row)]
    return out


def integer_kernel(m: Sequence[Sequence], cols: int | None = None) -> Matrix:
    """Basis (rows) of the saturated lattice ``{x in Z^n : m x = 0}``."""
    if cols is None:
        cols = len(m[0]) if m else 0
    if not m:
        return identity(cols)
    a = [clear_denominators(row) for row in m]
    s, _, v = smith_normal_form(a)
    r = sum(1 for i in range(min(len(s), cols)) if s[i][i] != 0)
    return [[v[i][j] for i in range(cols)] for j in range(r, cols)]


def saturated_basis(span: Sequence[Sequence], n: int) -> Matrix:
    """Hermite basis of span_Q(rows) intersected with Z^n."""
    if not span or rank(span) == 0:
        return []
    perp = kernel_basis(span, n)
    return hermite_normal_form(integer_kernel(perp, n))


def coordinates(v: Sequence, basis: Sequence[Sequence]) -> Vector | None:
    """Rational coordinates of ``v`` in the row basis, None if outside the span."""
    return solve(transpose(basis), list(v))


def _ext_gcd_combination(f: Sequence[int]) -> Vector:
    """Integer x with f . x == gcd(f)."""
    x = [0] * len(f)
    g = 0
    for i, a in enumerate(f):
        if a == 0:
            continue
        if g == 0:
            g = abs(a)
            x[i] = 1 if a > 0 else -1
            continue
        # solve s*g + t*a = gcd(g, a)
        old_r, r = g, a
        old_s, s = 1, 0
        old_t, t = 0, 1
        while r:
            q = old_r // r
            old_r, r = r, old_r - q * r
            old_s, s = s, old_s - q * s
            old_t, t = t, old_t - q * t
        if old_r < 0:
            old_r, old_s, old_t = -old_r, -old_s, -old_t
        x = [old_s * y for y in x]
        x[i] = old_t
        g = old_r
    return x


def primitive_quotient_generator(
    span_sigma: Sequence[Sequence], span_tau: Sequence[Sequence], outward_witness: Sequence
) -> Vector:
    """Lattice generator of (H_sigma cap Z^n)/(H_tau cap Z^n) pointing toward the witness.

    The representative is reduced modulo a Hermite basis of H_tau cap Z^n.
    """
    if len(span_tau) == 1 and len(span_sigma) == 2:
        fast = _rank_one_quotient(span_sigma, span_tau[0], outward_witness)
        if fast is not None:
            return fast
    return _general_quotient(span_sigma, span_tau, outward_witness)


def _general_quotient(span_sigma, span_tau, outward_witness) -> Vector:
    n = len(outward_witness)
    ls = saturated_basis(span_sigma, n)
    lt = saturated_basis(span_tau, n) if span_tau else []
    if len(ls) - len(lt) != 1 or any(not in_span(row, ls) for row in lt):
        raise BadCorank(f"quotient has rank {len(ls) - len(lt)}, expected 1")
    cw = coordinates(outward_witness, ls)
    if cw is None:
        raise BadCorank("witness does not lie in H_sigma")
    c = [[int(x) for x in coordinates(row, ls)] for row in lt]
    f = primitive(kernel_basis(c, len(ls))[0]) if c else [1]
    side = dot(f, cw)
    if side == 0:
        raise BadCorank("witness lies in H_tau")
    x = _ext_gcd_combination(f)
    if side < 0:
        x = [-y for y in x]
    vec = [sum(x[i] * ls[i][j] for i in range(len(ls))) for j in range(n)]
    return reduce_mod_lattice(vec, lt)


def _rank_one_quotient(span_sigma, tau_row, witness) -> Vector | None:
    """Same result as the general path when tau is a ray and sigma a 2-plane.

    With r primitive on tau and s another generator of sigma, the index m of
    Z r + Z s in its saturation is the gcd of the 2x2 minors, and
    (s + k r) / m is integral exactly for k = -h.s mod m, h.r = 1.
    Everything stays in integers; plane membership is tested by 3x3 minors.
    """
    r = primitive(tau_row)
    others = [primitive(row) for row in span_sigma]
    s = next((row for row in others if _minors(r, row)), None)
    if s is None:
        return None
    p, q = _pivot_pair(r, s)
    if not all(_in_plane(r, s, p, q, x) for x in others):
        return None
    m = 0
    for x in _minors(r, s):
        m = gcd(m, x)
    h = _ext_gcd_combination(r)
    k = (-dot(h, s)) % m
    u = [(a + k * b) for a, b in zip(s, r)]
    if any(x % m for x in u):
        return None
    u = [x // m for x in u]
    p, q = _pivot_pair(r, u)
    w = clear_denominators(witness)
    side = (r[p] * w[q] - r[q] * w[p]) * (r[p] * u[q] - r[q] * u[p])
    if side == 0 or not _in_plane(r, u, p, q, w):
        return None
    if side < 0:
        u = [-x for x in u]
    # reduce modulo Z r, with r normalized to a positive leading entry
    lead = next(j for j, x in enumerate(r) if x)
    if r[lead] < 0:
        r = [-x for x in r]
    t = u[lead] // r[lead]
    return [x - t * y for x, y in zip(u, r)] if t else u


def _pivot_pair(a, b) -> tuple[int, int]:
    n = len(a)
    return next((p, q) for p in range(n) for q in range(p + 1, n) if a[p] * b[q] - a[q] * b[p])


def _in_plane(a, b, p, q, x) -> bool:
    # x lies in span(a, b), given the (p, q) minor of (a, b) is nonzero
    for j in range(len(a)):
        if j in (p, q):
            continue
        d = (
            a[p] * (b[q] * x[j] - b[j] * x[q])
            - a[q] * (b[p] * x[j] - b[j] * x[p])
            + a[j] * (b[p] * x[q] - b[q] * x[p])
        )
        if d:
            return False
    return True


def _minors(a, b) -> list[int]:
    n = len(a)
    return [a[i] * b[j] - a[j] * b[i] for i in range(n) for j in range(i + 1, n) if a[i] * b[j] - a[j] * b[i]]


# ---------------------------------------------------------------------------
# inertia


def inertia(m: Sequence[Sequence]) -> InertiaTriple:
    """Signature of a symmetric rational matrix by congruence (Sylvester)."""
    if not is_symmetric(m):
        raise NonSymmetric("matrix is not symmetric")
    a = as_fraction_matrix(m)
    n = len(a)
    plus = minus = 0
    idx = list(range(n))
    while idx:
        piv = next((i for i in idx if a[i][i] != 0), None)
        if piv is not None:
            d = a[piv][piv]
            if d > 0:
                plus += 1
            else:
                minus += 1
            rest = [i for i in idx if i != piv]
            row = a[piv]
            for i in rest:
                if row[i] == 0:
                    continue
                f = row[i] / d
                ai = a[i]
                for j in rest:
                    if row[j]:
                        ai[j] -= f * row[j]
            idx = rest
            continue
        pair = next(((i, j) for i in idx for j in idx if i < j and a[i][j] != 0), None)
        if pair is None:
            break
        # 2x2 block [[0, b], [b, 0]] contributes one positive and one negative
        i0, j0 = pair
        b = a[i0][j0]
        plus += 1
        minus += 1
        rest = [i for i in idx if i not in pair]
        # Schur complement: A_rr - A_rp P^{-1} A_pr with P^{-1} = [[0, 1/b], [1/b, 0]]
        ri = {k: a[i0][k] for k in rest}
        rj = {k: a[j0][k] for k in rest}
        for k in rest:
            if ri[k] == 0 and rj[k] == 0:
                continue
            ak = a[k]
            for l in rest:
                corr = (ri[k] * rj[l] + rj[k] * ri[l]) / b
                if corr:
                    ak[l] -= corr
        idx = rest
    return InertiaTriple(plus, n - plus - minus, minus)


# ---------------------------------------------------------------------------
# lattice volume


def affine_dimension(points: Sequence[Sequence]) -> int:
    if not points:
        return -1
    p0 = points[0]
    diffs = [[Fraction(x) - Fraction(y) for x, y in zip(p, p0)] for p in points[1:]]
    return rank(diffs) if diffs else 0


def normalized_volume(vertices: Sequence[Sequence], dim: int) -> Fraction:
    """Lattice-normalized ``dim``-volume of the convex hull of ``vertices``.

    The lattice is the intersection of Z^n with the linear space parallel to
    the affine hull, so d-simplices that are unimodular in it have volume 1.
    Rational vertices are allowed.
    """
    pts = [[Fraction(x) for x in p] for p in vertices]
    if affine_dimension(pts) != dim:
        raise DimensionMismatch(f"points span dimension {affine_dimension(pts)}, expected {dim}")
    n = len(pts[0])
    p0 = pts[0]
    diffs = [[x - y for x, y in zip(p, p0)] for p in pts[1:]]
    if dim == 0:
        return Fraction(1)
    basis = saturated_basis(diffs, n)
    coords = [[Fraction(0)] * dim] + [coordinates(d, basis) for d in diffs]
    return _full_dim_volume(coords)


def _full_dim_volume(points: list[Vector]) -> Fraction:
    """Normalized volume of a full-dimensional point set in Q^d, lattice Z^d.

    Pyramid decomposition over the facets avoiding an apex: each pyramid has
    volume (lattice height) * (normalized facet volume).
    """
    from tropicap.polyhedra import convex_hull

    d = len(points[0])
    if d == 1:
        xs = [p[0] for p in points]
        return max(xs) - min(xs)
    hull = convex_hull(points)
    apex = hull.vertices[0]
    total = Fraction(0)
    for facet in hull.facets:
        height = facet.offset - dot(facet.normal, apex)
        if height == 0:
            continue
        fverts = [hull.vertices[i] for i in facet.vertices]
        total += height * normalized_volume(fverts, d - 1)
    return total
