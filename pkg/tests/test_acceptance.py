"""Acceptance suite: one PASS/FAIL line per criterion, with its time budget.

Run with pytest (the lines appear in the terminal summary) or directly as
``python tests/test_acceptance.py``.
"""

import random
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import antiprism, descartes_inertia, gauss_rank, isomorphic, smith_invariants  # noqa: E402
from test_tropical import deg_and_volume, dual_face_weights  # noqa: E402
from tropicap import cli, ratlin  # noqa: E402
from tropicap import convexity as cv  # noqa: E402
from tropicap.construction import (  # noqa: E402
    build_base,
    build_counterexample,
    pentagon_instance,
    perturb_and_rebalance,
    witness_pair,
)
from tropicap.tropical import (  # noqa: E402
    WeightedFan,
    balancing_weight_space,
    check_balancing,
    line_cylinder,
    tropical_line,
)

RESULTS: dict = {}
INSTANCES = [(k, n, s) for k, n in [(2, 4), (2, 5), (3, 5)] for s in range(1, 6)]
_built: dict = {}  # criteria 5-7 share the pipeline fans; whichever runs first pays for the builds


def instance(k, n, seed):
    if (k, n, seed) not in _built:
        _built[k, n, seed] = build_counterexample(k, n, seed)
    return _built[k, n, seed]


def criterion(number, budget):
    """Run the check, record 'PASS'/'FAIL' with the time, and fail on either a false check or a late one."""

    def wrap(fn):
        def run():
            t = time.perf_counter()
            ok, detail = fn()
            took = time.perf_counter() - t
            on_time = took < budget
            status = "PASS" if ok and on_time else "FAIL"
            late = "" if on_time else f" (over the {budget} s budget)"
            RESULTS[number] = f"{status} criterion {number}: {detail} [{took:.1f} s / {budget} s]{late}"
            assert ok, RESULTS[number]
            assert on_time, RESULTS[number]

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# -- the criteria ------------------------------------------------------------


@criterion(1, 10)
def test_balancing_suite():
    line = check_balancing(tropical_line()).passed
    ray = check_balancing(WeightedFan(2, 1, [(1, 0)], {frozenset({0}): 1}))
    defect = [[int(x) for x in e.defect] for e in ray.failures()]
    state = build_base(4, 1)
    good = 0
    for seed in range(1, 101):
        f = perturb_and_rebalance(state.cover, seed, psi=state.psi)
        good += check_balancing(f).passed
    ok = line and not ray.passed and defect == [[1, 0]] and good == 100
    shown = "; ".join("(" + ", ".join(map(str, d)) + ")" for d in defect)
    return ok, f"line balanced {line}, ray defect {shown}, perturbed covers balanced {good}/100"


@criterion(2, 120)
def test_dual_face_volumes():
    cases = [(n, seed) for n in (3, 4) for seed in range(1, 11)]
    agree = 0
    for n, seed in cases:
        state = build_base(n, seed, symmetric=(n == 4))
        want = {c: w for c, w in dual_face_weights(state).items() if w}
        agree += want == dict(state.F.cones)
    return agree == len(cases), f"{agree}/{len(cases)} Cayley instances match"


@criterion(3, 60)
def test_degree_is_volume():
    square = deg_and_volume([[0, 0], [1, 0], [0, 1], [1, 1]])
    rng = random.Random("degree-volume")
    agree = 0
    for i in range(20):
        n = 2 + i % 2
        while True:
            pts = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(n + 3)]
            if ratlin.affine_dimension(pts) == n:
                break
        d, v = deg_and_volume(pts)
        agree += d == v
    return square == (2, 2) and agree == 20, f"unit square {square[0]}, {agree}/20 polytopes"


@criterion(4, 10)
def test_pentagon_antiprism():
    state = pentagon_instance()
    x = state.X
    iso = isomorphic((x.vertices, x.edges), antiprism(5))
    low = min(state.F.cones.values())
    ok = len(x.vertices) == 10 and len(x.edges) == 20 and iso and low > 0
    return ok, f"{len(x.vertices)} vertices, {len(x.edges)} edges, antiprism {iso}, min weight {low}"


@pytest.mark.slow
@criterion(5, 300)
def test_certified_covers():
    bad = []
    for k, n, seed in INSTANCES:
        state, f = instance(k, n, seed)
        f2 = state.F2
        cover = cv.cover_certificate(state.cover)
        dim = balancing_weight_space(f2).dim
        positive = all(w > 0 for w in f2.cones.values())
        balanced = check_balancing(f2).passed and check_balancing(f).passed
        if not (cover == (True, 2) and dim == 1 and positive and balanced):
            bad.append((k, n, seed, cover, dim, positive, balanced))
    return not bad, f"{len(INSTANCES) - len(bad)}/{len(INSTANCES)} instances certified" + (f", bad {bad}" if bad else "")


@pytest.mark.slow
@criterion(6, 120)
def test_hodge_violation():
    bad = []
    for k, n, seed in INSTANCES:
        state, _ = instance(k, n, seed)
        f2 = state.F2
        sq, sq_prime, mixed = cv.hodge_witness(f2, *witness_pair(state))
        plus = ratlin.inertia(cv.intersection_matrix(f2)).n_plus
        if not (mixed == 0 and sq == sq_prime > 0 and plus >= 2):
            bad.append((k, n, seed, sq, sq_prime, mixed, plus))
    control = ratlin.inertia(cv.intersection_matrix(line_cylinder())).n_plus
    ok = not bad and control <= 1
    return ok, f"{len(INSTANCES) - len(bad)}/{len(INSTANCES)} violate, control n_plus {control}" + (
        f", bad {bad}" if bad else ""
    )


def control_fan(seed):
    """A fan with an obvious cap: one or two rays in an open half-plane, or a single 2-cone in R^3."""
    rng = random.Random(f"control:{seed}")
    d = rng.choice([2, 3])

    def ray():
        while True:
            v = [rng.randint(-3, 3) for _ in range(d)]
            if any(v) and v[0] > 0:
                return tuple(ratlin.primitive(v))

    if d == 2:
        rays = sorted({ray() for _ in range(rng.randint(1, 2))})
        return WeightedFan(2, 1, rays, {frozenset({i}): rng.randint(1, 3) for i in range(len(rays))})
    while True:
        a, b = ray(), ray()
        if ratlin.rank([a, b]) == 2:
            return WeightedFan(3, 2, [a, b], {frozenset({0, 1}): 1})


@pytest.mark.slow
@criterion(7, 180)
def test_caps():
    found = 0
    for seed in range(10):
        cap = cv.find_supporting_cap(control_fan(seed), 1, 10_000, seed=seed)
        found += cap is not None and cv.verify_cap(control_fan(seed), cap)
    fans = [("line", tropical_line())] + [(f"{k},{n},{s}", instance(k, n, s)[1]) for k, n, s in INSTANCES]
    hits = [name for name, f in fans if cv.find_supporting_cap(f, f.ambient_dim - f.dim, 10_000, seed=1) is not None]
    return found == 10 and not hits, f"controls with a cap {found}/10, caps on line/pipeline fans: {hits or 'none'}"


@criterion(8, 30)
def test_linear_algebra():
    rng = random.Random("linear-algebra")
    snf_ok = kernel_ok = inertia_ok = 0
    for _ in range(50):
        rows, cols = rng.randint(1, 5), rng.randint(1, 5)
        m = [[rng.randint(-6, 6) for _ in range(cols)] for _ in range(rows)]
        s, u, v = ratlin.smith_normal_form(m)
        diag = [s[i][i] for i in range(min(rows, cols)) if s[i][i]]
        snf_ok += ratlin.matmul(ratlin.matmul(u, m), v) == s and diag == smith_invariants(m)
        ker = ratlin.kernel_basis(m)
        kernel_ok += all(not any(ratlin.matvec(m, x)) for x in ker) and len(ker) == cols - gauss_rank(m)
        n = rng.randint(2, 6)
        a = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                a[i][j] = a[j][i] = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
        while True:
            p = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(n)]
            if ratlin.det(p):
                break
        q = ratlin.matmul(ratlin.matmul(ratlin.transpose(p), a), p)
        inertia_ok += ratlin.inertia(q) == ratlin.inertia(a) and tuple(ratlin.inertia(a)) == descartes_inertia(a)
    ok = snf_ok == kernel_ok == inertia_ok == 50
    return ok, f"SNF {snf_ok}/50, kernels {kernel_ok}/50, Sylvester {inertia_ok}/50"


@criterion(9, 60)
def test_build_is_deterministic():
    outs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = cli.RunConfig(2, 4, 3, out=Path(tmp))
            code = cli.cmd_build(cfg)
            outs.append((code, (Path(tmp) / "fan.json").read_bytes(), (Path(tmp) / "pipeline.json").read_bytes()))
    ok = outs[0] == outs[1] and outs[0][0] == 0
    return ok, "fan.json and pipeline.json byte-identical" if ok else "outputs differ"


# -- reporting ---------------------------------------------------------------


def report() -> list[str]:
    return [RESULTS.get(i, f"NOT RUN criterion {i}") for i in range(1, 10)]


if __name__ == "__main__":
    import contextlib
    import io

    for name, fn in sorted((k, v) for k, v in dict(globals()).items() if k.startswith("test_")):
        with contextlib.suppress(AssertionError), contextlib.redirect_stdout(io.StringIO()):
            fn()
    for line in report():
        print(line)
    sys.exit(0 if all(line.startswith("PASS") for line in report()) else 1)
