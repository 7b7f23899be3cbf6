import math

import pytest

from entrolab.errors import ArgumentError, CertificationUnavailable
from entrolab.group import GroupSpec, interval
from entrolab.sofic import binary_entropy, generate_sofic_map, theorem1_parameters
from entrolab.topological_entropy import Subshift, interval_schedule, sep_symbolic

Z = GroupSpec.lattice(1)


def test_binary_entropy():
    assert binary_entropy(0) == 0.0
    assert binary_entropy(1) == 0.0
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert binary_entropy(0.1) == pytest.approx(0.325083, abs=1e-6)
    assert binary_entropy(0.3) == pytest.approx(binary_entropy(0.7), abs=1e-15)
    with pytest.raises(ArgumentError):
        binary_entropy(1.5)
    with pytest.raises(ArgumentError):
        binary_entropy(-0.01)


def test_eta_and_k_example():
    F = interval(Z, 0, 3)
    p = theorem1_parameters(0.5, 0.5, 2, [("F", F, 1)])
    assert p.eta == pytest.approx(0.5 / (4 * math.log(2)), rel=1e-12)
    assert p.eta == pytest.approx(0.180337, abs=1e-6)
    assert p.k == 12
    assert 1 / 11 > p.eta / 2
    assert all(p.check().values())


def test_delta_is_largest_dyadic():
    F = interval(Z, 0, 1)
    p = theorem1_parameters(0.5, 0.5, 2, [("F", F, 1)])
    s, eta = 2, p.eta
    d = p.delta
    assert math.log2(d) == int(math.log2(d))

    def ok(x):
        return x <= (0.5 / 8) ** 2 and x <= eta / (4 * s ** 3) and s * x <= 0.5 and binary_entropy(s * x) <= 0.125

    assert ok(d) and not ok(2 * d)


def test_single_point_certifies():
    single = Subshift.full("0", Z)
    eps = 0.5
    half = sep_symbolic(single, eps / 2).count
    sched = [(lab, F, sep_symbolic(single, eps / 4, F).count) for lab, F in interval_schedule(3)]
    p = theorem1_parameters(0.5, eps, half, sched)
    assert half == 1 and math.isinf(p.eta) and p.k == 1
    assert p.F_label == "[0,0]"
    assert p.delta == (eps / 8) ** 2
    assert all(p.check().values())


def test_full_shift_is_uncertified():
    full = Subshift.full("01", Z)
    eps = 0.5
    half = sep_symbolic(full, eps / 2).count
    sched = [(lab, F, sep_symbolic(full, eps / 4, F).count) for lab, F in interval_schedule(12)]
    with pytest.raises(CertificationUnavailable, match="no F in the schedule"):
        theorem1_parameters(0.5, eps, half, sched)


def test_first_qualifying_f_is_chosen():
    F1, F2_, F3 = interval(Z, 0, 0), interval(Z, 0, 3), interval(Z, 0, 7)
    # k = 12 gives the bound 0.5/48 ~ 0.0104
    p = theorem1_parameters(0.5, 0.5, 2, [("a", F1, 2), ("b", F2_, 1), ("c", F3, 1)])
    assert p.F_label == "b"


def test_n_from_sofic_maps():
    maps = [generate_sofic_map(Z, n, "cyclic") for n in (3, 8, 20)]
    F = interval(Z, 0, 2)
    p = theorem1_parameters(0.5, 0.5, 2, [("F", F, 1)], maps)
    # cyclic maps are exact on F-hat once n exceeds its diameter
    assert p.N == 8


def test_argument_checks():
    F = interval(Z, 0, 1)
    with pytest.raises(ArgumentError):
        theorem1_parameters(1.0, 0.5, 2, [("F", F, 1)])
    with pytest.raises(ArgumentError):
        theorem1_parameters(0.5, 0.0, 2, [("F", F, 1)])
    with pytest.raises(ArgumentError):
        theorem1_parameters(0.5, 0.5, 0, [("F", F, 1)])
