"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test prints a ``criterion N: PASS|FAIL`` line; the full list is
repeated in the pytest terminal summary.
"""
import math
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from netbargain import dynamics as dyn
from netbargain import oracle
from netbargain import outcomes as oc
from netbargain.generators import (chain_example, complete_bipartite, g1_example, perturb, random_instance,
                                   ring_slow_instance)
from netbargain.instance import make_instance
from netbargain.rebalance import OK, UNSTABLE, fptas


def _best_time(fn, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


@lru_cache(maxsize=None)
def certified_unit_instances(count=50):
    """Random 1-exchange instances (n <= 10, weights in (0, 1]) with a certified unique integral optimum."""
    found, seed = [], 0
    while len(found) < count:
        seed += 1
        inst = random_instance(4 + seed % 7, 0.5, seed, connected=True).instance
        lp = oracle.solve_lp(inst)
        if lp.unique_integral:
            found.append((seed, inst, lp, oracle.lp_gap(inst).g))
    return tuple(found)


# 1 -----------------------------------------------------------------------------

def test_criterion_01_chain_golden(criterion):
    with criterion(1, "chain: exact fixed point at iteration 6, kappa=1, alpha0=0") as rec:
        case = chain_example()
        inst = case.instance
        config = dyn.DynamicsConfig(kappa=1.0, max_iters=50, record_every=10**6)
        with pytest.warns(RuntimeWarning):
            alpha, trace = dyn.run(inst, case.alpha0, config)
        gamma = dyn.compute_earnings(inst, dyn.compute_offers(inst, alpha))
        rec.detail = (f"stop={trace.stop_reason} at t={trace.iterations}, "
                      f"residual(t=6)={trace.residual_history[6][1]}")
        assert gamma.tolist() == [1.5, 6.5, 1.0, 1.0], gamma
        assert oc.induced_matching(inst, alpha) == frozenset({0, 2})
        assert trace.stop_reason == dyn.EXACT_FIXED_POINT
        with pytest.warns(RuntimeWarning):
            elapsed = _best_time(lambda: dyn.run(inst, case.alpha0, config))
        assert elapsed < 1e-3, f"runtime {elapsed * 1e3:.3f} ms"
        assert trace.residual_history[6][1] < 1e-12, (
            f"residual at iteration 6 is {trace.residual_history[6][1]}; exact fixed point first reached at "
            f"t={trace.iterations}")
        assert trace.iterations == 6, f"exact fixed point reached at t={trace.iterations}, not 6"


# 2 -----------------------------------------------------------------------------

def test_criterion_02_g1_golden(criterion):
    with criterion(2, "G1 path: gamma -> (0.5, 1.5, 0), balanced and stable") as rec:
        start = time.perf_counter()
        case = g1_example()
        inst = case.instance
        alpha, trace = dyn.run(inst, dyn.initial_alpha(inst), dyn.DynamicsConfig(kappa=0.5, max_iters=10_000,
                                                                                  target_eps=1e-9))
        gamma = dyn.compute_earnings(inst, dyn.compute_offers(inst, alpha))
        outcome = oc.TradeOutcome.from_state(inst, alpha)
        elapsed = time.perf_counter() - start
        rec.detail = f"t={trace.iterations}, gamma={np.round(gamma, 9).tolist()}"
        assert np.max(np.abs(gamma - [0.5, 1.5, 0.0])) <= 1e-6
        assert outcome is not None
        assert oc.balance_residual(inst, outcome) <= 1e-6
        assert oc.is_stable(inst, outcome)
        assert elapsed < 1.0


# 3 -----------------------------------------------------------------------------

def test_criterion_03_rate_bound(criterion):
    with criterion(3, "residual <= eps for all t >= 1/(pi kappa (1-kappa) eps^2)") as rec:
        start = time.perf_counter()
        window = 25
        checked = 0
        for seed in range(50):
            inst = random_instance(3 + seed % 10, 0.45, 1000 + seed, connected=True).instance
            for kappa in (0.25, 0.5, 0.75):
                for eps in (0.1, 0.05):
                    t_star = math.ceil(dyn.rate_bound_iterations(kappa, eps))
                    alpha0 = dyn.initial_alpha(inst, "uniform", seed)
                    cfg = dyn.DynamicsConfig(kappa=kappa, max_iters=t_star + window, record_every=10**9)
                    _, trace = dyn.run(inst, alpha0, cfg)
                    tail = [r for t, r in trace.residual_history if t >= t_star]
                    assert all(r <= eps for r in tail), f"seed {seed}, kappa {kappa}, eps {eps}: {max(tail)}"
                    # nonincreasing residual carries the bound to every later t
                    assert all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))
                    checked += 1
        elapsed = time.perf_counter() - start
        rec.detail = f"{checked} runs"
        assert elapsed < 30, f"runtime {elapsed:.1f}s"


# 4 -----------------------------------------------------------------------------

def test_criterion_04_fixed_point_is_nb(criterion):
    with criterion(4, "fixed points give the oracle matching and an NB solution") as rec:
        start = time.perf_counter()
        cases = certified_unit_instances()
        for seed, inst, lp, _ in cases:
            cfg = dyn.DynamicsConfig(kappa=0.5, max_iters=500_000, target_eps=1e-10, record_every=10**9)
            alpha, trace = dyn.run(inst, dyn.initial_alpha(inst, "uniform", seed), cfg)
            assert trace.final_residual < 1e-10, f"seed {seed}: residual {trace.final_residual}"
            induced = oc.induced_matching(inst, alpha)
            assert induced == lp.matching(), f"seed {seed}: induced {induced} vs {lp.matching()}"
            outcome = oc.TradeOutcome.from_state(inst, alpha, induced)
            assert oc.balance_residual(inst, outcome) <= 1e-8
            assert oc.is_stable(inst, outcome)
            gamma = outcome.earnings(inst)
            assert abs(gamma.sum() - float(lp.objective)) <= 1e-8
        elapsed = time.perf_counter() - start
        rec.detail = f"{len(cases)} certified instances"
        assert elapsed < 60, f"runtime {elapsed:.1f}s"


# 5 -----------------------------------------------------------------------------

def test_criterion_05_matching_emerges(criterion):
    with criterion(5, "residual < g/(6 n^2) gives M* and a 6*residual-NB outcome") as rec:
        start = time.perf_counter()
        cases = certified_unit_instances()
        for seed, inst, lp, g in cases:
            threshold = float(g) / (6 * inst.n ** 2)
            cfg = dyn.DynamicsConfig(kappa=0.5)
            alpha = dyn.initial_alpha(inst, "uniform", seed)
            t = 0
            while dyn.eps_residual(inst, alpha) >= threshold:
                alpha = dyn.step(inst, alpha, cfg, t)
                t += 1
                assert t < 2_000_000
            for extra in range(6):
                res = dyn.eps_residual(inst, alpha)
                induced = oc.induced_matching(inst, alpha)
                assert induced == lp.matching(), f"seed {seed}, t={t + extra}"
                outcome = oc.TradeOutcome.from_state(inst, alpha, induced)
                assert oc.is_eps_nb(inst, outcome, 6 * res), f"seed {seed}, t={t + extra}"
                alpha = dyn.step(inst, alpha, cfg, t + extra)
        elapsed = time.perf_counter() - start
        rec.detail = f"{len(cases)} certified instances"
        assert elapsed < 60, f"runtime {elapsed:.1f}s"


# 6 -----------------------------------------------------------------------------

def test_criterion_06_nonexpansive(criterion):
    with criterion(6, "T is nonexpansive in the sup norm") as rec:
        rng = np.random.default_rng(6)
        worst = -np.inf
        pairs = 0
        for k in range(1000):
            max_b = 1 if k % 2 else 3
            inst = random_instance(2 + k % 9, 0.6, 50_000 + k, max_b=max_b, split_range=(0.05, 0.95),
                                   connected=True).instance
            mode = dyn.EQUAL if k % 4 < 2 else dyn.UD
            a = rng.uniform(0, inst.w_max, 2 * inst.m)
            b = rng.uniform(0, inst.w_max, 2 * inst.m)
            lhs = np.max(np.abs(dyn.apply_T(inst, a, mode) - dyn.apply_T(inst, b, mode)))
            rhs = np.max(np.abs(a - b))
            worst = max(worst, lhs - rhs)
            assert lhs <= rhs + 1e-12, f"pair {k}: {lhs} > {rhs}"
            pairs += 1
        rec.detail = f"{pairs} pairs, max(|Ta-Tb| - |a-b|) = {worst:.3g}"


# 7 -----------------------------------------------------------------------------

def test_criterion_07_fptas(criterion):
    with criterion(7, "FPTAS gives eps-UD solutions within the iteration bound") as rec:
        start = time.perf_counter()
        eps = 1e-3
        bound = math.ceil(1 / (math.pi * 0.25 * eps ** 2))
        done, seed, most = 0, 0, 0
        while done < 25:
            seed += 1
            inst = random_instance(3 + seed % 8, 0.5, 7000 + seed, split_range=(0.1, 0.9),
                                   connected=True).instance
            if oracle.stable_outcome_from_dual(inst, oracle.solve_lp(inst, certify_unique=False)) is None:
                continue
            res = fptas(inst, eps)
            assert res.status == OK, f"seed {seed}: {res.status} {res.message}"
            assert oc.is_eps_ud(inst, res.outcome, eps), f"seed {seed}"
            assert all(stable for _, stable, _ in res.audit), f"seed {seed}: unstable iterate"
            assert res.iterations <= bound
            most = max(most, res.iterations)
            done += 1
        triangle = make_instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
        assert fptas(triangle, eps).status == UNSTABLE
        elapsed = time.perf_counter() - start
        rec.detail = f"{done} instances, max iterations {most} (bound {bound})"
        assert elapsed < 60, f"runtime {elapsed:.1f}s"


# 8 -----------------------------------------------------------------------------

def test_criterion_08_adversarial_ring(criterion):
    with criterion(8, "slow ring: residual beta^(N-1), no matching, gap >= 1") as rec:
        start = time.perf_counter()
        notes = []
        for N in (2, 3, 4):
            case = ring_slow_instance(N, Fraction(1, 3))
            inst, alpha = case.instance, case.alpha0
            expected = float(case.expected["residual"])
            res = dyn.eps_residual(inst, alpha, dyn.UD)
            assert abs(res - expected) <= 1e-12 * expected, f"N={N}: residual {res}"
            assert oc.induced_matching(inst, alpha, mode=dyn.UD) is None
            lp = oracle.solve_lp(inst, certify_unique=False)
            gap = oracle.lp_gap(inst)
            assert lp.integral and gap.unique
            assert lp.matching() == frozenset(range(0, inst.m, 2)), f"N={N}: optimum {lp.matching()}"
            steps = math.floor(1 / (2 * expected))
            cfg = dyn.DynamicsConfig(mode=dyn.UD, kappa=0.5)
            a = alpha
            for t in range(steps):
                a = dyn.step(inst, a, cfg, t)
                assert oc.induced_matching(inst, a, mode=dyn.UD) is None, f"N={N}: matching at t={t + 1}"
            notes.append(f"N={N}: g={gap.g}")
        elapsed = time.perf_counter() - start
        rec.detail = "; ".join(notes)
        assert elapsed < 120
        for N in (2, 3, 4):
            gap = oracle.lp_gap(ring_slow_instance(N, Fraction(1, 3)).instance)
            assert gap.g >= 1, f"N={N}: LP gap over half-integral points is {gap.g}, below 1"


# 9 -----------------------------------------------------------------------------

def test_criterion_09_isolation(criterion):
    with criterion(9, "perturbed K33: gap >= eta xi/(2|E|) in most seeds") as rec:
        start = time.perf_counter()
        base = complete_bipartite(3, 3)
        eta, xi = Fraction(1, 10), Fraction(1, 5)
        threshold = eta * xi / (2 * base.m)
        hits = sum(oracle.lp_gap(perturb(base, eta, seed)).g >= threshold for seed in range(400))
        frac = hits / 400
        elapsed = time.perf_counter() - start
        rec.detail = f"fraction {frac:.4f} (need >= {1 - 0.2 - 0.05:.2f})"
        assert frac >= 1 - float(xi) - 0.05
        assert elapsed < 120


# 10 ----------------------------------------------------------------------------

def test_criterion_10_b_matching(criterion):
    with criterion(10, "capacitated fixed points give the oracle b-matching, stable and balanced") as rec:
        start = time.perf_counter()
        done, seed = 0, 0
        while done < 25:
            seed += 1
            inst = random_instance(3 + seed % 6, 0.6, 3000 + seed, max_b=3, connected=True).instance
            if inst.unit_capacities:
                continue
            lp = oracle.solve_lp(inst)
            if not lp.unique_integral:
                continue
            cfg = dyn.DynamicsConfig(kappa=0.5, max_iters=500_000, target_eps=1e-10, record_every=10**9)
            alpha, trace = dyn.run(inst, dyn.initial_alpha(inst, "uniform", seed), cfg)
            assert trace.final_residual < 1e-10
            induced = oc.induced_matching(inst, alpha)
            assert induced == lp.matching(), f"seed {seed}"
            shares = dyn.compute_shares(inst, dyn.compute_offers(inst, alpha))
            for e in induced:
                assert abs(shares[2 * e] + shares[2 * e + 1] - inst.w[e]) <= 1e-8
            mask = np.repeat([e in induced for e in range(inst.m)], 2)
            outcome = oc.TradeOutcome(induced, np.where(mask, shares, 0.0))
            assert not oc.check_stability(inst, outcome, tol=1e-8)
            assert oc.balance_residual(inst, outcome) <= 1e-8
            done += 1
        elapsed = time.perf_counter() - start
        rec.detail = f"{done} instances"
        assert elapsed < 60


# 11 ----------------------------------------------------------------------------

def test_criterion_11_async(criterion):
    with criterion(11, "async cycles: natural residual <= (2|E|+2) eps") as rec:
        worst = 0.0
        for k in range(10):
            inst = random_instance(5 + k % 5, 0.5, 9000 + k, connected=True).instance
            alpha = dyn.initial_alpha(inst, "uniform", k)
            for eps in (1e-2, 1e-4, 1e-6):
                cycles = 0
                while dyn.async_cycle_residual(inst, alpha) > eps:
                    alpha = dyn.async_cycle(inst, alpha)
                    cycles += 1
                    assert cycles < 1_000_000
                natural = dyn.eps_residual(inst, alpha)
                bound = (2 * inst.m + 2) * eps
                worst = max(worst, natural / bound)
                assert natural <= bound + 1e-9, f"instance {k}, eps {eps}: {natural} > {bound}"
        rec.detail = f"max natural/bound ratio {worst:.3f}"
