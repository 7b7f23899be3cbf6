import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entrolab.group import FiniteSubset, GroupSpec, ball, interval
from entrolab.sofic import build_sofic_graph, decompose, generate_sofic_map, is_greedy_maximal

Z = GroupSpec.lattice(1)
F2 = GroupSpec.free(2)


def candidates(g, F, k):
    # every (centre, F') with centre in J and |F'| >= |F|/k, as image sets
    out = []
    imgs = [g.sigma(x) for x in F]
    for c in np.flatnonzero(g.J).tolist():
        for size in range(1, len(F) + 1):
            if size * k < len(F):
                continue
            for idx in itertools.combinations(range(len(F)), size):
                out.append(frozenset(int(imgs[i][c]) for i in idx))
    return out


def brute_max_packing(cands):
    best = 0
    cands = sorted(set(cands), key=sorted)

    def rec(i, used, count):
        nonlocal best
        best = max(best, count)
        if i == len(cands) or count + (len(cands) - i) <= best:
            return
        if not (cands[i] & used):
            rec(i + 1, used | cands[i], count + 1)
        rec(i + 1, used, count)

    rec(0, frozenset(), 0)
    return best


def check_invariants(g, F, k, dec):
    sets = dec.block_sets(g.sigma)
    union = set()
    for (c, Fi), B in zip(dec.blocks, sets):
        assert g.J[c]
        assert len(Fi) * k >= len(F)
        assert len(B) == len(Fi)
        assert not (B & union)
        union |= B
    assert union == set(np.flatnonzero(dec.W).tolist())
    # no further block fits: brute force over all candidates
    assert not any(not (B & union) for B in candidates(g, F, k))
    assert is_greedy_maximal(g, F, k, dec)
    assert dec.I_minus_W * k <= dec.J_count
    assert dec.leftover == g.n - len(union)


def test_cyclic_example():
    sigma = generate_sofic_map(Z, 9, "cyclic")
    F = interval(Z, 0, 2)
    g = build_sofic_graph(sigma, F)
    dec = decompose(g, F, 1)
    assert len(dec.blocks) == 3
    assert dec.P == []
    assert [sorted(B) for B in dec.block_sets(sigma)] == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    assert brute_max_packing(candidates(g, F, 1)) == 3


def test_empty_j():
    sigma = generate_sofic_map(Z, 8, "cyclic")
    F = interval(Z, 0, 1)
    g = build_sofic_graph(sigma, F, theta=np.zeros(8, dtype=bool))
    dec = decompose(g, F, 1)
    assert dec.blocks == [] and dec.P == list(range(8))


def test_k_equal_size_allows_singletons():
    sigma = generate_sofic_map(F2, 30, seed=4)
    F = ball(F2, 1)
    g = build_sofic_graph(sigma, F)
    dec = decompose(g, F, len(F))
    check_invariants(g, F, len(F), dec)
    assert min(len(Fi) for _, Fi in dec.blocks) >= 1
    assert not (g.I & ~dec.W).any() or dec.I_minus_W * len(F) <= dec.J_count


@settings(max_examples=60)
@given(st.integers(0, 10 ** 6), st.integers(3, 12), st.integers(1, 4), st.floats(0, 0.3))
def test_greedy_is_maximal_small(seed, n, k, bad):
    rng = np.random.default_rng(seed)
    sigma = generate_sofic_map(F2, n, seed=seed)
    F = FiniteSubset(F2, rng.choice(ball(F2, 1).elements, size=3, replace=False))
    theta = rng.random(n) >= bad
    g = build_sofic_graph(sigma, F, theta=theta)
    dec = decompose(g, F, k)
    check_invariants(g, F, k, dec)
    # greedy never beats the optimum, and is nonempty whenever a candidate exists
    cands = candidates(g, F, k)
    opt = brute_max_packing(cands)
    assert len(dec.blocks) <= opt
    assert (len(dec.blocks) > 0) == bool(cands)


@pytest.mark.parametrize("seed", range(20))
def test_randomized_graphs(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(20, 200))
    sigma = generate_sofic_map(F2, n, seed=seed)
    F = ball(F2, int(rng.integers(1, 3)))
    k = int(rng.integers(1, 6))
    g = build_sofic_graph(sigma, F, theta=rng.random(n) >= 0.05)
    dec = decompose(g, F, k)
    sets = dec.block_sets(sigma)
    assert sum(len(B) for B in sets) == len(set().union(*sets)) if sets else True
    assert is_greedy_maximal(g, F, k, dec)
    assert dec.I_minus_W * k <= dec.J_count


def test_k_must_be_positive():
    sigma = generate_sofic_map(Z, 5, "cyclic")
    F = interval(Z, 0, 1)
    with pytest.raises(ValueError):
        decompose(build_sofic_graph(sigma, F), F, 0)
