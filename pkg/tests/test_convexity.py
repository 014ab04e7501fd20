import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import components as dfs_components
from oracles import descartes_inertia
from tropicap import convexity as cv
from tropicap import ratlin
from tropicap.construction import LinkGraph, build_counterexample, double_cover, witness_pair
from tropicap.tropical import WeightedFan, line_cylinder, product_with_lineality, tropical_line

RAY = WeightedFan(2, 1, [(1, 0)], {frozenset({0}): 1})
P2 = WeightedFan(
    2, 2, [(1, 0), (0, 1), (-1, -1)], {frozenset({0, 1}): 1, frozenset({1, 2}): 1, frozenset({0, 2}): 1}
)


# -- graphs ----------------------------------------------------------------


def test_six_cycle_witness():
    tri = LinkGraph([0, 1, 2], [(0, 1), (0, 2), (1, 2)])
    cover = double_cover(tri, [(0, 2)])
    assert cv.cover_certificate(cover) == (True, 2)
    assert cv.graph_homology(cover) == (1, 1)
    assert cv.cover_certificate(double_cover(tri, [])) == (False, 2)


def test_homology_examples():
    assert cv.graph_homology(([0, 1, 2], [(0, 1), (1, 2), (0, 2)])) == (1, 1)
    assert cv.graph_homology(([0, 1, 2, 3], [(0, 1), (2, 3)])) == (2, 0)
    assert cv.graph_homology((3, [])) == (3, 0)


@st.composite
def graphs(draw):
    m = draw(st.integers(1, 8))
    pairs = [p for p in combinations(range(m), 2)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return list(range(m)), edges


@given(graphs())
def test_homology_against_dfs(g):
    vertices, edges = g
    b0, b1 = cv.graph_homology(g)
    assert b0 == dfs_components(vertices, edges)
    assert b0 - b1 == len(vertices) - len(edges)  # Euler characteristic


# -- Fourier-Motzkin ---------------------------------------------------------


def brute_range(rows, j):
    """Min and max of x_j over a bounded closed polygon in the plane, by its vertices."""
    pts = []
    for (a, c, _), (b, d, _) in combinations(rows, 2):
        det = a[0] * b[1] - a[1] * b[0]
        if det == 0:
            continue
        # a.x = -c, b.x = -d
        x = Fraction(-c * b[1] + d * a[1], det)
        y = Fraction(-a[0] * d + b[0] * c, det)
        if all(r[0] * x + r[1] * y + k >= 0 for r, k, _ in rows):
            pts.append((x, y))
    if not pts:
        return None
    vals = [p[j] for p in pts]
    return min(vals), max(vals)


row2 = st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(-6, 6))


@given(st.lists(row2, max_size=5), st.integers(0, 1))
def test_interval_matches_vertices(extra, j):
    box = [((1, 0), 5, False), ((-1, 0), 5, False), ((0, 1), 5, False), ((0, -1), 5, False)]
    rows = box + [((a, b), c, False) for a, b, c in extra if a or b]
    got = cv.interval([], [([Fraction(x) for x in a], Fraction(c), s) for a, c, s in rows], 2, j)
    want = brute_range(rows, j)
    assert got == want
    assert cv.feasible([], [([Fraction(x) for x in a], Fraction(c), s) for a, c, s in rows], 2) == (want is not None)


@given(st.lists(row2, max_size=4), st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-4, 4)), st.integers(0, 1))
def test_equalities_match_substitution(extra, eq, j):
    # z = p x + q y + r, then constraints on x, y, z; compare with the system in x, y alone
    p, q, r = eq
    box = [((1, 0), 5), ((-1, 0), 5), ((0, 1), 5), ((0, -1), 5)]
    lifted = [([Fraction(a), Fraction(b), Fraction(0)], Fraction(k), False) for (a, b), k in box]
    lifted += [([Fraction(a), Fraction(b), Fraction(-c)], Fraction(0), False) for a, b, c in extra]
    eqs = [([Fraction(p), Fraction(q), Fraction(-1)], Fraction(r))]
    # extra rows read a x + b y - c z >= 0, i.e. a x + b y >= c z
    plain = box + [((a - c * p, b - c * q), -c * r) for a, b, c in extra]
    want = brute_range([(x, k, False) for x, k in plain], j)
    assert cv.interval(eqs, lifted, 3, j) == want


def test_strict_inequalities():
    x = [Fraction(1)]
    assert cv.feasible([], [(x, Fraction(0), False), ([-x[0]], Fraction(0), False)], 1)
    assert not cv.feasible([], [(x, Fraction(0), True), ([-x[0]], Fraction(0), False)], 1)
    # x = y, x + y >= 2, x <= 1: only (1, 1)
    eqs = [([Fraction(1), Fraction(-1)], Fraction(0))]
    ineqs = [([Fraction(1), Fraction(1)], Fraction(-2), False), ([Fraction(-1), Fraction(0)], Fraction(1), False)]
    assert cv.interval(eqs, ineqs, 2, 1) == (1, 1)


# -- caps --------------------------------------------------------------------


def test_canonical_cap_on_a_ray():
    cap = cv.Cap([Fraction(0), Fraction(0)], [[0, 1]], Fraction(1), [-1, 0], Fraction(1))
    assert cv.verify_cap(RAY, cap)
    assert cap.witness["extent"] == 0
    # pushing into the ray does not escape
    assert not cv.verify_cap(RAY, cv.Cap([Fraction(0), Fraction(0)], [[0, 1]], Fraction(1), [1, 0], Fraction(1)))


def test_no_cap_on_the_line_by_hand():
    for esc in ([-1, 0], [1, 1], [0, -1]):
        cap = cv.Cap([Fraction(0), Fraction(0)], [[1, -1]], Fraction(1), esc, Fraction(1))
        assert not cv.verify_cap(tropical_line(), cap)


@given(st.integers(0, 200))
def test_verification_ignores_cone_order(index):
    two = WeightedFan(3, 2, [(1, 0, 0), (0, 1, 0), (1, 1, 1)], {frozenset({0, 1}): 1, frozenset({1, 2}): 1})
    rng = random.Random(index)
    cap = cv.Cap(
        [Fraction(rng.randint(0, 1)), Fraction(0), Fraction(0)],
        [[rng.randint(-2, 2) for _ in range(3)]],
        Fraction(1, rng.choice([1, 2])),
        [rng.randint(-2, 2) for _ in range(3)],
        Fraction(1, rng.choice([1, 8])),
    )
    if not any(cap.basis[0]) or not any(cap.escape):
        return
    order = sorted(two.cones, key=sorted)
    assert cv.verify_cap(two, cap, list(order)) == cv.verify_cap(two, cap, list(reversed(order)))


def test_search_finds_cap_on_ray():
    cap = cv.find_supporting_cap(RAY, 1, 1000, seed=0)
    assert cap is not None and cv.verify_cap(RAY, cap)


def test_search_on_line_finds_nothing():
    assert cv.find_supporting_cap(tropical_line(), 1, 2000, seed=3) is None


def test_search_is_thread_independent():
    two = WeightedFan(2, 1, [(1, 0), (1, 2)], {frozenset({0}): 1, frozenset({1}): 1})
    a = cv.find_supporting_cap(two, 1, 400, seed=5, threads=1)
    b = cv.find_supporting_cap(two, 1, 400, seed=5, threads=2)
    assert a is not None and b is not None
    assert (a.center, a.basis, a.radius, a.escape, a.epsilon) == (b.center, b.basis, b.radius, b.escape, b.epsilon)


def test_cap_rejects_bad_input():
    with pytest.raises(ValueError):
        cv.find_supporting_cap(RAY, 0)
    assert not cv.verify_cap(RAY, cv.Cap([Fraction(0)] * 2, [[0, 1]], Fraction(0), [-1, 0], Fraction(1)))


# -- intersection matrix and the test pair -----------------------------------


def test_p2_matrix():
    m = cv.intersection_matrix(P2)
    assert tuple(ratlin.inertia(m)) == descartes_inertia(m) == (1, 2, 0)


def test_matrix_ignores_lineality():
    f = product_with_lineality(P2, 2)
    assert cv.intersection_matrix(f) == cv.intersection_matrix(P2)


@given(st.permutations(range(3)))
def test_matrix_relabels(perm):
    rays = [P2.rays[p] for p in perm]
    where = {p: i for i, p in enumerate(perm)}
    cones = {frozenset(where[i] for i in c): w for c, w in P2.cones.items()}
    m = cv.intersection_matrix(WeightedFan(2, 2, rays, cones))
    base = cv.intersection_matrix(P2)
    assert all(m[where[i]][where[j]] == base[i][j] for i in range(3) for j in range(3))


def test_control_has_one_positive_eigenvalue():
    f = line_cylinder()
    m = cv.intersection_matrix(f)
    assert m == [list(r) for r in zip(*m)]
    assert ratlin.inertia(m).n_plus <= 1
    cert = cv.certify(f)
    assert cert.status == "no violation" and not cert.valid


@pytest.fixture(scope="module")
def pipeline():
    return build_counterexample(2, 4, 2)


def test_hodge_witness(pipeline):
    state, f = pipeline
    v, vp, psi = witness_pair(state)
    sq, sq_prime, mixed = cv.hodge_witness(f, v, vp, psi)
    assert mixed == 0 and sq == sq_prime > 0
    # swapping the roles of V and V' swaps the two squares
    assert cv.hodge_witness(f, vp, v, psi) == (sq_prime, sq, mixed)
    assert cv.hodge_witness(f, v, vp, [0] * len(psi)) == (0, 0, 0)


def test_hodge_witness_rejects_bad_partitions(pipeline):
    state, f = pipeline
    v, vp, psi = witness_pair(state)
    with pytest.raises(cv.BadPartition):
        cv.hodge_witness(f, v, v, psi)
    with pytest.raises(cv.BadPartition):
        cv.hodge_witness(f, v[:-1], vp, psi)
    with pytest.raises(cv.BadPartition):
        cv.hodge_witness(f, v[:-1], vp[:-1], psi[:-1])


def test_certificate(pipeline):
    state, f = pipeline
    cert = cv.certify(f, state.cover, *witness_pair(state), k=2, n=4, seed=2)
    assert cert.valid and cert.status == "violation"
    assert (cert.cover_connected, cert.cut_components, cert.weight_space_dim) == (True, 2, 1)
    assert cert.inertia.n_plus >= 2
    assert sum(cert.inertia) == len(f.rays)


def test_quotient_is_lattice_map():
    f = product_with_lineality(tropical_line(), 1)
    g = cv.quotient_by_lineality(f)
    assert (g.ambient_dim, g.dim, g.lineality) == (2, 1, [])
    # the quotient of a line times R is a balanced line again
    from tropicap.tropical import check_balancing

    assert check_balancing(g).passed
    line = tropical_line()
    assert cv.quotient_by_lineality(line) is line


def test_random_seeded_graphs():
    rng = random.Random(1)
    for _ in range(30):
        m = rng.randint(2, 9)
        edges = [p for p in combinations(range(m), 2) if rng.random() < 0.3]
        assert cv.graph_homology((m, edges))[0] == dfs_components(range(m), edges)
