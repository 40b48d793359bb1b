from fractions import Fraction

import numpy as np
import pytest

from netbargain import dynamics as dyn
from netbargain import oracle
from netbargain.generators import (alpha_from_dict, alpha_to_dict, chain_example, complete_bipartite, g1_example,
                                   perturb, random_bipartite, random_instance, ring_slow_instance)
from netbargain.outcomes import induced_matching


def test_hand_examples():
    chain = chain_example()
    assert chain.instance.weights == [8, 6, 2] and chain.expected["gamma"] == [1.5, 6.5, 1.0, 1.0]
    g1 = g1_example()
    assert g1.instance.labels == ("a", "c", "d") and g1.instance.weights == [2, 1]


@pytest.mark.parametrize("N, residual", [(2, Fraction(1, 2)), (3, Fraction(1, 4)), (4, Fraction(1, 8))])
def test_ring_annotations(N, residual):
    case = ring_slow_instance(N, Fraction(1, 3))
    inst, alpha = case.instance, case.alpha0
    assert inst.n == 8 * N and inst.m == 8 * N
    assert case.expected["W"] == 6 and case.expected["residual"] == residual
    assert dyn.eps_residual(inst, alpha, dyn.UD) == pytest.approx(float(residual), rel=1e-12)
    assert alpha.min() >= 1
    assert dyn.compute_offers(inst, alpha, dyn.UD).min() >= 1
    assert induced_matching(inst, alpha, mode=dyn.UD) is None
    assert sorted(inst.w.tolist()).count(5.0) == 1


def test_ring_optimum_is_unique_with_matching_gap_one():
    inst = ring_slow_instance(2).instance
    lp = oracle.solve_lp(inst)
    assert lp.unique_integral and lp.matching() == frozenset(range(0, inst.m, 2))
    assert oracle.matching_gap(inst) == 1
    # the all-half point sits only 1/2 below the optimum
    assert oracle.lp_gap(inst).g == Fraction(1, 2)


def test_ring_other_split():
    case = ring_slow_instance(3, Fraction(1, 4))
    beta = Fraction(1, 3)
    assert dyn.eps_residual(case.instance, case.alpha0, dyn.UD) == pytest.approx(float(beta ** 2), rel=1e-12)


@pytest.mark.parametrize("N, r", [(1, Fraction(1, 3)), (2, 0.6), (2, 0.5), (2, 0), (2.5, 0.3)])
def test_ring_domain(N, r):
    with pytest.raises(ValueError):
        ring_slow_instance(N, r)


def test_random_generators_are_seeded():
    a = random_bipartite(3, 4, 0.7, seed=5).instance
    assert a == random_bipartite(3, 4, 0.7, seed=5).instance
    assert all(0 < w <= 1 for w in a.weights)
    assert all(i < 3 <= j for i, j in a.edge_pairs())
    b = random_instance(8, 0.4, 9, max_b=3, split_range=(0.1, 0.9), connected=True).instance
    assert b == random_instance(8, 0.4, 9, max_b=3, split_range=(0.1, 0.9), connected=True).instance
    assert set(b.capacities) <= {1, 2, 3}
    assert b.m >= 7
    with pytest.raises(ValueError):
        random_instance(4, 1.5)
    with pytest.raises(ValueError):
        random_bipartite(2, 2, weight_dist="normal")


def test_perturb():
    base = complete_bipartite(3, 3)
    assert perturb(base, 0, 1) is base
    p = perturb(base, "0.1", 1)
    assert p == perturb(base, 0.1, 1)
    assert all(1 <= w <= Fraction(11, 10) for w in p.weights)
    assert p != perturb(base, 0.1, 2)
    with pytest.raises(ValueError):
        perturb(base, -1)


def test_alpha_dict_roundtrip():
    case = ring_slow_instance(2)
    back = alpha_from_dict(case.instance, alpha_to_dict(case.instance, case.alpha0))
    assert np.array_equal(back, case.alpha0)
    with pytest.raises(ValueError):
        alpha_from_dict(case.instance, {"alpha": {"0\\1": 1.0}})
