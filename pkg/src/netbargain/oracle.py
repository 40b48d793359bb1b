"""Exact ground truth for small instances.

Everything here works in rational arithmetic: brute-force (b-)matching and
half-integral enumeration, the matching LP and its dual via an exact
simplex, the LP gap, complementary slackness, and the stable outcome built
from a dual optimum.

Two routes compute the best and second-best points of the LP polytope:
plain enumeration (bounded by the size guards) and an LP-based
branch-and-bound that scales to sparse instances beyond them. Tests check
they agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .instance import NetworkInstance
from .outcomes import TradeOutcome, check_stability
from .simplex import simplex_max

HALF = Fraction(1, 2)
HALF_DOMAIN = (Fraction(0), HALF, Fraction(1))
INT_DOMAIN = (Fraction(0), Fraction(1))


class InstanceTooLarge(ValueError):
    pass


@dataclass
class OracleConfig:
    subset_guard: int = 24  # |E| limit for b-matching enumeration
    half_guard: int = 14    # |E| limit for half-integral enumeration


DEFAULT_CONFIG = OracleConfig()


# -- enumeration ---------------------------------------------------------------

def _scaled_weights(instance: NetworkInstance) -> tuple[list[int], int]:
    den = 1
    for e in instance.edges:
        den = den * e.w.denominator // math.gcd(den, e.w.denominator)
    return [int(e.w * den) for e in instance.edges], den


def iter_b_matchings(instance: NetworkInstance) -> Iterator[tuple[frozenset, Fraction]]:
    """Every b-matching with its exact weight (depth-first, degree-pruned)."""
    ws, den = _scaled_weights(instance)
    pairs = instance.edge_pairs()
    room = list(instance.capacities)
    chosen: list[int] = []

    def rec(k, total):
        if k == len(pairs):
            yield frozenset(chosen), Fraction(total, den)
            return
        yield from rec(k + 1, total)
        i, j = pairs[k]
        if room[i] and room[j]:
            room[i] -= 1
            room[j] -= 1
            chosen.append(k)
            yield from rec(k + 1, total + ws[k])
            chosen.pop()
            room[i] += 1
            room[j] += 1

    yield from rec(0, 0)


@dataclass
class MatchingEnumeration:
    best_weight: Fraction
    maximizers: list[frozenset]
    second_weight: Fraction | None  # best weight among non-maximizers
    count: int

    @property
    def unique(self) -> bool:
        return len(self.maximizers) == 1

    @property
    def best(self) -> frozenset:
        return self.maximizers[0]


def enumerate_b_matchings(instance: NetworkInstance, config: OracleConfig = DEFAULT_CONFIG) -> MatchingEnumeration:
    if instance.m > config.subset_guard:
        raise InstanceTooLarge(f"{instance.m} edges exceeds the enumeration guard {config.subset_guard}")
    best, second, maximizers, count = None, None, [], 0
    for sel, wt in iter_b_matchings(instance):
        count += 1
        if best is None or wt > best:
            if best is not None:
                second = best if second is None else max(second, best)
            best, maximizers = wt, [sel]
        elif wt == best:
            maximizers.append(sel)
        elif second is None or wt > second:
            second = wt
    return MatchingEnumeration(best, sorted(maximizers, key=sorted), second, count)


def _enumerate_half_integral(instance: NetworkInstance):
    """Best and runner-up values over feasible points of ``{0, 1/2, 1}^E``."""
    ws, den = _scaled_weights(instance)
    pairs = instance.edge_pairs()
    room = [2 * c for c in instance.capacities]  # in halves
    x = [0] * len(pairs)
    best = [None, [], None]  # value2, maximizers, second value2

    def rec(k, total):
        if k == len(pairs):
            b0 = best[0]
            if b0 is None or total > b0:
                if b0 is not None:
                    best[2] = b0 if best[2] is None else max(best[2], b0)
                best[0], best[1] = total, [tuple(x)]
            elif total == b0:
                best[1].append(tuple(x))
            elif best[2] is None or total > best[2]:
                best[2] = total
            return
        i, j = pairs[k]
        for v in (0, 1, 2):
            if room[i] >= v and room[j] >= v:
                room[i] -= v
                room[j] -= v
                x[k] = v
                rec(k + 1, total + v * ws[k])
                room[i] += v
                room[j] += v
        x[k] = 0

    rec(0, 0)
    scale = 2 * den
    value = Fraction(best[0], scale)
    second = None if best[2] is None else Fraction(best[2], scale)
    points = [tuple(Fraction(v, 2) for v in p) for p in best[1]]
    return value, points, second


# -- LP relaxation and branch-and-bound ---------------------------------------------

def _relaxation(instance: NetworkInstance, fixed: dict[int, Fraction]):
    """LP over the free edges given fixed coordinates; ``None`` if the fixing is infeasible."""
    caps = [Fraction(c) for c in instance.capacities]
    pairs = instance.edge_pairs()
    for e, v in fixed.items():
        i, j = pairs[e]
        caps[i] -= v
        caps[j] -= v
    if any(c < 0 for c in caps):
        return None
    free = [e for e in range(instance.m) if e not in fixed]
    nodes = sorted({v for e in free for v in pairs[e]})
    row_of = {v: k for k, v in enumerate(nodes)}
    bounds = not instance.unit_capacities
    nrow = len(nodes) + (len(free) if bounds else 0)
    A = [[0] * len(free) for _ in range(nrow)]
    rhs = [caps[v] for v in nodes] + ([Fraction(1)] * len(free) if bounds else [])
    for col, e in enumerate(free):
        i, j = pairs[e]
        A[row_of[i]][col] = 1
        A[row_of[j]][col] = 1
        if bounds:
            A[len(nodes) + col][col] = 1
    c = [instance.edges[e].w for e in free]
    return free, nodes, c, A, rhs


def _lp_value(instance, fixed):
    rel = _relaxation(instance, fixed)
    if rel is None:
        return None
    free, _, c, A, rhs = rel
    base = sum((instance.edges[e].w * v for e, v in fixed.items()), Fraction(0))
    if not free:
        return base, dict(fixed)
    res = simplex_max(c, A, rhs)
    x = dict(fixed)
    for col, e in enumerate(free):
        x[e] = res.x[col]
    return base + res.objective, x


def best_point(instance: NetworkInstance, domain=HALF_DOMAIN, fixed: dict | None = None,
               floor: Fraction | None = None):
    """Exact max of ``w.x`` over LP-feasible ``x`` with coordinates in ``domain``.

    Branch-and-bound on the LP relaxation. Only solutions strictly better
    than ``floor`` are sought; returns ``(value, x)`` or ``None``.
    """
    stack = [dict(fixed or {})]
    best = None
    while stack:
        fx = stack.pop()
        got = _lp_value(instance, fx)
        if got is None:
            continue
        bound, x = got
        target = best[0] if best is not None else floor
        if target is not None and bound <= target:
            continue
        off = next((e for e in range(instance.m) if x[e] not in domain), None)
        if off is None:
            best = (bound, x)
            continue
        for v in domain:
            child = dict(fx)
            child[off] = v
            stack.append(child)
    if best is None:
        return None
    return best[0], [best[1][e] for e in range(instance.m)]


def second_best_value(instance: NetworkInstance, xstar, domain=HALF_DOMAIN):
    """Max of ``w.x`` over domain points of the polytope other than ``xstar`` (``None`` if none)."""
    best = None
    for k in range(instance.m):
        prefix = {e: xstar[e] for e in range(k)}
        for v in domain:
            if v == xstar[k]:
                continue
            fx = dict(prefix)
            fx[k] = v
            got = best_point(instance, domain, fx, floor=best)
            if got is not None:
                best = got[0]
    return best


# -- LP solution ------------------------------------------------------------------------

@dataclass
class LpSolution:
    x: list[Fraction]
    y_nodes: list[Fraction]
    y_edges: list[Fraction] | None  # present when some capacity exceeds one
    objective: Fraction
    dual_objective: Fraction
    integral: bool
    unique_integral: bool | None = None

    def matching(self) -> frozenset | None:
        if not self.integral:
            return None
        return frozenset(e for e, v in enumerate(self.x) if v == 1)


def solve_lp(instance: NetworkInstance, certify_unique: bool = True,
             config: OracleConfig = DEFAULT_CONFIG) -> LpSolution:
    """Exact primal/dual optimum of the (b-)matching LP."""
    rel = _relaxation(instance, {})
    free, nodes, c, A, rhs = rel
    y_nodes = [Fraction(0)] * instance.n
    bounds = not instance.unit_capacities
    y_edges = [Fraction(0)] * instance.m if bounds else None
    if free:
        res = simplex_max(c, A, rhs)
        x = res.x
        for k, v in enumerate(nodes):
            y_nodes[v] = res.y[k]
        if bounds:
            for col in range(len(free)):
                y_edges[col] = res.y[len(nodes) + col]
        objective = res.objective
    else:
        x, objective = [], Fraction(0)
    dual = sum((instance.capacities[v] * y for v, y in enumerate(y_nodes)), Fraction(0))
    if y_edges is not None:
        dual += sum(y_edges, Fraction(0))
    integral = all(v.denominator == 1 for v in x)
    sol = LpSolution(list(x), y_nodes, y_edges, objective, dual, integral)
    if certify_unique:
        sol.unique_integral = integral and lp_gap(instance, config).unique
    return sol


@dataclass
class GapReport:
    g: Fraction
    optimum: Fraction
    x_star: list[Fraction]
    second: Fraction | None
    unique: bool
    method: str = field(default="enumerate")


def lp_gap(instance: NetworkInstance, config: OracleConfig = DEFAULT_CONFIG, method: str = "auto") -> GapReport:
    """Optimum minus the best *other* half-integral point of the LP polytope.

    ``g = 0`` when the optimum over half-integral points is not unique. An
    edgeless graph has a single point, reported as unique with ``g = 0``.
    ``method`` is ``"enumerate"``, ``"branch"`` or ``"auto"`` (enumerate
    within the guard, branch-and-bound beyond it).
    """
    if method == "auto":
        method = "enumerate" if instance.m <= config.half_guard else "branch"
    if method == "enumerate":
        if instance.m > config.half_guard:
            raise InstanceTooLarge(f"{instance.m} edges exceeds the half-integral guard {config.half_guard}")
        value, points, second = _enumerate_half_integral(instance)
        xstar = list(points[0])
        if len(points) > 1:
            return GapReport(Fraction(0), value, xstar, value, False, method)
    elif method == "branch":
        value, xstar = best_point(instance, HALF_DOMAIN)
        second = second_best_value(instance, xstar, HALF_DOMAIN)
    else:
        raise ValueError(f"unknown method {method!r}")
    if second is None:  # no edges: the zero vector is the only point
        return GapReport(Fraction(0), value, xstar, None, True, method)
    g = value - second
    return GapReport(g, value, xstar, second, g > 0, method)


def max_weight_b_matching(instance: NetworkInstance, config: OracleConfig = DEFAULT_CONFIG):
    """``(weight, edge set)`` of a maximum weight b-matching."""
    if instance.m <= config.subset_guard and instance.m <= 16:
        en = enumerate_b_matchings(instance, config)
        return en.best_weight, en.best
    value, x = best_point(instance, INT_DOMAIN)
    return value, frozenset(e for e, v in enumerate(x) if v == 1)


def matching_gap(instance: NetworkInstance, config: OracleConfig = DEFAULT_CONFIG) -> Fraction:
    """Weight of the best b-matching minus the best *different* b-matching."""
    if instance.m <= config.subset_guard and instance.m <= 16:
        en = enumerate_b_matchings(instance, config)
        if not en.unique:
            return Fraction(0)
        return en.best_weight - (en.second_weight if en.second_weight is not None else 0)
    value, x = best_point(instance, INT_DOMAIN)
    second = second_best_value(instance, x, INT_DOMAIN)
    return value - (second if second is not None else 0)


# -- certificates ----------------------------------------------------------------------

def check_complementary_slackness(instance: NetworkInstance, lp: LpSolution) -> bool:
    """Feasibility of both sides plus the three slackness conditions, in exact arithmetic."""
    pairs = instance.edge_pairs()
    y, ye = lp.y_nodes, lp.y_edges
    load = [Fraction(0)] * instance.n
    for e, (i, j) in enumerate(pairs):
        xe = lp.x[e]
        if xe < 0 or (ye is not None and xe > 1):
            return False
        load[i] += xe
        load[j] += xe
        yij = ye[e] if ye is not None else 0
        if yij < 0:
            return False
        slack = yij + y[i] + y[j] - instance.edges[e].w
        if slack < 0 or xe * slack != 0:
            return False
        if ye is not None and (xe - 1) * yij != 0:
            return False
    for v in range(instance.n):
        if y[v] < 0 or load[v] > instance.capacities[v]:
            return False
        if (load[v] - instance.capacities[v]) * y[v] != 0:
            return False
    return True


def stable_outcome_from_dual(instance: NetworkInstance, lp: LpSolution,
                             config: OracleConfig = DEFAULT_CONFIG) -> TradeOutcome | None:
    """Stable outcome on an integral optimum with shares ``y_j + y_ij/2``; ``None`` if none exists."""
    if lp.integral:
        matching = lp.matching()
    else:
        weight, matching = max_weight_b_matching(instance, config)
        if weight < lp.objective:
            return None
    ye = lp.y_edges or [Fraction(0)] * instance.m
    shares = np.zeros(2 * instance.m)
    for e in matching:
        i, j = instance.edge_pairs()[e]
        shares[2 * e] = float(lp.y_nodes[j] + ye[e] / 2)      # j's share
        shares[2 * e + 1] = float(lp.y_nodes[i] + ye[e] / 2)  # i's share
    outcome = TradeOutcome(frozenset(matching), shares)
    tol = 1e-12 * max(instance.w_max, 1.0)
    if check_stability(instance, outcome, tol):
        raise RuntimeError("dual construction produced an unstable outcome")
    return outcome


def dual_certificate_from_earnings(instance: NetworkInstance, gamma, tol: float = 1e-9,
                                   config: OracleConfig = DEFAULT_CONFIG) -> bool:
    """Whether ``gamma`` (within ``tol``) is an optimal dual solution of the matching LP."""
    g = [Fraction(float(v)) for v in gamma]
    t = Fraction(tol) * max(1, Fraction(instance.w_max))
    if any(v < -t for v in g):
        return False
    pairs = instance.edge_pairs()
    if instance.unit_capacities:
        for e, (i, j) in enumerate(pairs):
            if g[i] + g[j] < instance.edges[e].w - t:
                return False
        objective = sum(g, Fraction(0))
    else:
        objective = sum((instance.capacities[v] * g[v] for v in range(instance.n)), Fraction(0))
        objective += sum((max(Fraction(0), instance.edges[e].w - g[i] - g[j])
                          for e, (i, j) in enumerate(pairs)), Fraction(0))
    best, _ = max_weight_b_matching(instance, config)
    return abs(objective - best) <= t
