import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entrolab.errors import ArgumentError, ResourceError
from entrolab.group import FiniteSubset, GroupSpec, ball, interval
from entrolab.measure_entropy import BernoulliMeasure, join_entropy, letter_partition, markov_cylinder_measure
from entrolab.separation import FiniteMetricSpace, sep_number
from entrolab.topological_entropy import (
    SEPARATION_PROBE_CAVEAT,
    Pattern,
    Subshift,
    SymbolicPoint,
    admissible_pattern_count,
    ball_schedule,
    cached_ball,
    coarse_pattern_count,
    cyclic_segment,
    dynamical_pseudometric,
    edge_shift,
    entropy_via_separation,
    golden_mean_shift,
    interval_schedule,
    iter_admissible,
    naive_topological_entropy_estimate,
    point_metric,
    product_subshift,
    pseudometric_matrix,
    restrict_to_generator,
    sep_symbolic,
)

Z = GroupSpec.lattice(1)
Z2 = GroupSpec.lattice(2)
F2 = GroupSpec.free(2)
LOG_PHI = math.log((1 + 5 ** 0.5) / 2)


def brute_local_count(s, F):
    # every labeling of F, rejecting those containing a forbidden translate
    elems = list(F)
    idx = {x: i for i, x in enumerate(elems)}
    count = 0
    for lab in itertools.product(s.alphabet, repeat=len(elems)):
        bad = False
        for p in s.forbidden:
            for f in elems:
                t = f * p.shape[0].inverse()
                pos = [idx.get(t * x) for x in p.shape]
                if None not in pos and all(lab[i] == l for i, l in zip(pos, p.labels)):
                    bad = True
                    break
            if bad:
                break
        count += not bad
    return count


def brute_z_occurring(s, F, pad):
    # patterns on F seen inside admissible words that extend pad steps on both sides
    xs = sorted(x.data[0] for x in F)
    lo, hi = xs[0] - pad, xs[-1] + pad
    hull = interval(Z, lo, hi)
    seen = set()
    for word in iter_admissible(s, hull):
        pos = {x.data[0]: a for x, a in zip(hull, word)}
        seen.add(tuple(pos[x] for x in xs))
    return len(seen)


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def test_spec_counts():
    gm = golden_mean_shift()
    assert admissible_pattern_count(Subshift.full("01", Z), interval(Z, 0, 2)).count == 8
    assert admissible_pattern_count(gm, interval(Z, 0, 2)) == (5, True)
    assert admissible_pattern_count(gm, interval(Z, 0, 4)) == (13, True)


@pytest.mark.parametrize("n", range(1, 15))
def test_golden_mean_fibonacci(n):
    assert admissible_pattern_count(golden_mean_shift(), interval(Z, 0, n - 1)).count == fib(n + 2)


def test_golden_mean_gapped_sets():
    gm = golden_mean_shift()
    for xs in ([0, 2], [0, 3, 4], [-2, 0, 5, 6]):
        F = FiniteSubset.parse(Z, xs)
        assert admissible_pattern_count(gm, F).count == brute_z_occurring(gm, F, 3)


def test_one_step_trimming():
    # 2 can be followed by nothing, so it never occurs in a point
    s = edge_shift(Z, "012", [("2", "0"), ("2", "1"), ("2", "2"), ("1", "1")])
    for n in range(1, 7):
        F = interval(Z, 0, n - 1)
        assert admissible_pattern_count(s, F).count == brute_z_occurring(s, F, 4)
        assert admissible_pattern_count(s, F).count == fib(n + 2)


def test_local_count_matches_brute_force():
    hard_square = Subshift(
        "01",
        [Pattern.of(Z2, {(0, 0): "1", (1, 0): "1"}), Pattern.of(Z2, {(0, 0): "1", (0, 1): "1"})],
        Z2,
    )
    for r in (1, 2):
        B = ball(Z2, r)
        pc = admissible_pattern_count(hard_square, B)
        assert pc == (brute_local_count(hard_square, B), False)
    gm_f2 = edge_shift(F2, "01", [("1", "1")])
    for F in (ball(F2, 1), FiniteSubset(F2, ball(F2, 2).elements[:12])):
        assert admissible_pattern_count(gm_f2, F).count == brute_local_count(gm_f2, F)


def test_count_errors():
    gm = golden_mean_shift()
    with pytest.raises(ArgumentError):
        admissible_pattern_count(gm, FiniteSubset(Z, []))
    with pytest.raises(ArgumentError):
        admissible_pattern_count(gm, ball(F2, 1))
    empty = Subshift("0", [Pattern.of(Z, {0: "0"})], Z)
    with pytest.raises(ArgumentError):
        admissible_pattern_count(empty, interval(Z, 0, 2))
    big = edge_shift(F2, "01", [("1", "1")])
    with pytest.raises(ResourceError):
        admissible_pattern_count(big, ball(F2, 4), cap=8)


@pytest.mark.parametrize("k", [2, 3])
def test_full_shift_values(k):
    s = Subshift.full([str(i) for i in range(k)], F2)
    rep = naive_topological_entropy_estimate(s, ball_schedule(F2, [0, 1, 2]))
    assert all(r.value == pytest.approx(math.log(k), abs=1e-12) for r in rep.rows)
    assert rep.bound_kind == "exact"


def test_golden_mean_estimate():
    rep = naive_topological_entropy_estimate(golden_mean_shift(), interval_schedule(20))
    assert abs(rep.estimate - LOG_PHI) < 0.01
    rm = rep.running_min
    assert all(a >= b for a, b in zip(rm, rm[1:]))
    assert rep.bound_kind == "upper"
    assert rep.meta["counts_exact"]


def test_single_point_is_zero():
    s = Subshift.full("0", Z)
    rep = naive_topological_entropy_estimate(s, interval_schedule(5))
    assert rep.estimate == 0.0


def test_serialization_round_trip():
    gm = golden_mean_shift()
    again = Subshift.from_json(gm.to_json())
    assert again.canonical_json() == gm.canonical_json()
    assert again.digest() == gm.digest()
    data = {"alphabet": ["0", "1"], "group": {"free": 2}, "forbidden": [{"shape": ["e", "aB"], "labels": ["1", "0"]}]}
    s = Subshift.from_json(data)
    assert Subshift.from_json(s.to_json()).digest() == s.digest()
    with pytest.raises(ArgumentError):
        Subshift.from_json({"alphabet": ["0"], "group": {"free": 2}, "forbidden": [{"shape": ["a", "a"], "labels": ["0", "0"]}]})


def test_coarsening_never_increases():
    s = Subshift.full("012", Z)
    merge = {"0": "x", "1": "x", "2": "y"}
    for n in range(1, 6):
        F = interval(Z, 0, n - 1)
        assert coarse_pattern_count(s, F, merge) <= admissible_pattern_count(s, F).count
    gm = golden_mean_shift()
    for n in range(1, 8):
        F = interval(Z, 0, n - 1)
        assert coarse_pattern_count(gm, F, {"0": "0", "1": "0"}) == 1


def test_variational_inequality_per_f():
    gm = golden_mean_shift()
    phi = (1 + 5 ** 0.5) / 2
    mk = markov_cylinder_measure(Z, "01", [phi ** 2 / (1 + phi ** 2), 1 / (1 + phi ** 2)],
                                 [[1 / phi, 1 / phi ** 2], [1.0, 0.0]], 10)
    for n in range(1, 11):
        F = interval(Z, 0, n - 1)
        assert join_entropy(mk, letter_partition(mk), F) <= math.log(admissible_pattern_count(gm, F).count) + 1e-9
    full = Subshift.full("01", F2)
    m = BernoulliMeasure.of(F2, [0.3, 0.7])
    for r in (0, 1, 2):
        F = ball(F2, r)
        assert join_entropy(m, letter_partition(m), F) <= math.log(admissible_pattern_count(full, F).count) + 1e-9


def test_restriction_to_generator():
    s = edge_shift(F2, "01", [("1", "1")])
    zs = restrict_to_generator(s, 0)
    assert zs.canonical_json() == golden_mean_shift().canonical_json()
    for n in range(0, 8):
        seg = cyclic_segment(F2, 0, n)
        a = admissible_pattern_count(s, seg).count
        b = admissible_pattern_count(zs, interval(Z, 0, n)).count
        assert a == b
    # along the other generator nothing is forbidden
    assert restrict_to_generator(s, 1).is_full


def test_product_counts():
    s1, s2 = Subshift.full("01", Z), Subshift.full("012", Z)
    p = product_subshift(s1, s2)
    for n in range(1, 5):
        F = interval(Z, 0, n - 1)
        c = admissible_pattern_count(p, F).count
        assert c == admissible_pattern_count(s1, F).count * admissible_pattern_count(s2, F).count
    gm = product_subshift(golden_mean_shift(), s1)
    F = interval(Z, 0, 4)
    assert admissible_pattern_count(gm, F).count == 13 * 32


def test_point_metric_examples():
    x = SymbolicPoint.from_function(Z, 2, lambda g: "0")
    y = SymbolicPoint.from_function(Z, 2, lambda g: "1" if g.data[0] == 1 else "0")
    z = SymbolicPoint.from_function(Z, 2, lambda g: "1" if g.data[0] == 0 else "0")
    d = point_metric(x, x)
    assert d.value == 0 and d.truncated and d.upper == 2.0 ** -5
    assert point_metric(x, z).value == 1.0
    assert point_metric(x, y).value == 0.5
    with pytest.raises(ArgumentError):
        point_metric(x, SymbolicPoint.from_function(Z, 1, lambda g: "0"))


def test_dynamical_pseudometric():
    x = SymbolicPoint.from_function(Z, 3, lambda g: "0")
    y = SymbolicPoint.from_function(Z, 3, lambda g: "1" if g.data[0] == 2 else "0")
    e = FiniteSubset(Z, [Z.identity])
    assert dynamical_pseudometric(x, y, e) == point_metric(x, y)
    # (g.y)(0) = y(g^-1), so the translate by -2 sees the difference at index 0
    assert dynamical_pseudometric(x, y, FiniteSubset.parse(Z, [0, -2])).value == 1.0
    # the translate by +2 pushes it out of view; only g = 0 sees index 3 of B_3
    assert dynamical_pseudometric(x, y, FiniteSubset.parse(Z, [0, 2])).value == 2.0 ** -3
    with pytest.raises(ArgumentError, match="radius >= 4"):
        dynamical_pseudometric(x, y, FiniteSubset.parse(Z, [4]))


@given(st.integers(0, 2 ** 20), st.integers(0, 4))
def test_pseudometric_monotone_in_f(seed, extra):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 2, size=(6, len(cached_ball(Z, 6))))
    F1 = interval(Z, 0, 1)
    F2_ = interval(Z, -extra, 1 + extra)
    D1 = pseudometric_matrix(pts, Z, 6, F1)
    D2 = pseudometric_matrix(pts, Z, 6, F2_)
    assert np.all(D1 <= D2)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.3, 0.2])
def test_sep_symbolic_matches_exact_solver(eps):
    gm = golden_mean_shift()
    F = interval(Z, 0, 1)
    R = 4
    pts = np.array([[int(a) for a in w] for w in iter_admissible(gm, cached_ball(Z, R))])
    D = pseudometric_matrix(pts, Z, R, F)
    M = FiniteMetricSpace(range(len(pts)), D, validate=False)
    # group points by their separation class so the solver stays small
    from entrolab.topological_entropy import separation_coordinates
    K = separation_coordinates(Z, eps, F)
    idx = [cached_ball(Z, R).index(k) for k in K]
    reps = {tuple(row[idx]): i for i, row in enumerate(pts)}
    sub = sorted(reps.values())
    Msub = FiniteMetricSpace(sub, D[np.ix_(sub, sub)], validate=False)
    assert sep_number(Msub, eps).count == sep_symbolic(gm, eps, F).count
    # and no larger separated set exists among all points: points of one class are < eps apart
    for i in range(len(pts)):
        for j in range(len(pts)):
            if tuple(pts[i][idx]) == tuple(pts[j][idx]):
                assert M.dist[i, j] < eps


def test_separation_probe():
    full = Subshift.full("01", Z)
    e = [("e", FiniteSubset(Z, [Z.identity]))]
    rep = entropy_via_separation(full, 0.75, e, radius=0, exhaustive=True)
    assert rep.rows[0].value == pytest.approx(math.log(2))
    assert rep.bound_kind == "probe"
    assert SEPARATION_PROBE_CAVEAT in rep.notes
    single = Subshift.full("0", Z)
    rep = entropy_via_separation(single, 0.5, interval_schedule(3), sample_budget=8, seed=1)
    assert all(r.value == 0 for r in rep.rows)


def test_probe_monotone_in_budget():
    gm = golden_mean_shift()
    sched = [("[0,3]", interval(Z, 0, 3))]
    vals = [entropy_via_separation(gm, 0.5, sched, sample_budget=b, seed=11).rows[0].value for b in (4, 8, 16, 32)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
