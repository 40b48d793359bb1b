"""Approximate unequal-division solutions in two steps.

First a stable outcome is read off an exact dual optimum of the matching LP.
Then the matching is held fixed and every matched edge is repeatedly
re-split by its prescribed fraction of the current surplus, with damping.
Each blended step stays stable, and the number of steps is bounded by
``1/(pi kappa (1-kappa) eps^2)`` at unit weight scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import best_alternatives
from .instance import NetworkInstance, rescale
from .oracle import solve_lp, stable_outcome_from_dual
from .outcomes import TradeOutcome, check_stability, outcome_violations

OK = "ok"
ERROR = "ERROR"
UNSTABLE = "UNSTABLE"
GUARD_EXCEEDED = "guard-exceeded"


@dataclass
class RebalanceConfig:
    kappa: float = 0.5
    eps: float = 1e-3
    max_iters: int | None = None  # default: twice the iteration bound

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.kappa <= 0.5:
            out.append(f"kappa must lie in (0, 1/2], got {self.kappa}")
        if not self.eps > 0:
            out.append(f"eps must be positive, got {self.eps}")
        return out

    def bound(self) -> int:
        return math.ceil(1.0 / (math.pi * self.kappa * (1 - self.kappa) * self.eps ** 2))

    def guard(self) -> int:
        return self.max_iters if self.max_iters is not None else 2 * self.bound()


@dataclass
class RebalanceResult:
    status: str
    outcome: TradeOutcome | None
    gamma: np.ndarray | None = None
    iterations: int = 0
    final_gap: float = float("nan")      # |gamma_reb - gamma| at exit
    audit: list = field(default_factory=list)  # (t, stable, sum drift) per iterate
    message: str = ""
    scale: float = 1.0

    @property
    def ok(self) -> bool:
        return self.status == OK


def rebalanced_targets(instance: NetworkInstance, matching: frozenset, gamma: np.ndarray) -> np.ndarray:
    """Per-node ``alt_i + r_ij * surplus_ij`` on matched edges; 0 on unmatched nodes."""
    # value offered to dst by src's side: (w - gamma_src)+
    vals = np.maximum(instance.w_dir - gamma[instance.src], 0.0)
    alt = best_alternatives(instance, vals)  # slot i->j: alternative of i excluding j
    target = np.zeros(instance.n)
    for e in matching:
        d = 2 * e
        i, j = int(instance.src[d]), int(instance.dst[d])
        surp = instance.w[e] - alt[d] - alt[d + 1]
        target[i] = alt[d] + instance.r_dir[d] * surp
        target[j] = alt[d + 1] + instance.r_dir[d + 1] * surp
    return target


def edge_rebalancing(instance: NetworkInstance, stable: TradeOutcome, config: RebalanceConfig) -> RebalanceResult:
    """Rebalance a stable 1-exchange outcome to an eps-correct division, keeping it stable."""
    problems = config.problems()
    if not instance.unit_capacities:
        problems.append("rebalancing is defined for unit capacities")
    if not problems:
        problems += outcome_violations(instance, stable)
    tol = 1e-12 * max(instance.w_max, 1.0)
    if not problems and check_stability(instance, stable, tol):
        problems.append("input outcome is not stable")
    if problems:
        return RebalanceResult(ERROR, None, message="; ".join(problems))

    matching = stable.matching
    pairs = [(int(instance.src[2 * e]), int(instance.dst[2 * e]), e) for e in sorted(matching)]
    gamma = stable.earnings(instance)
    kappa = config.kappa
    guard = config.guard()
    audit = []
    t = 0
    while True:
        outcome = TradeOutcome.from_earnings(instance, matching, gamma)
        drift = max((abs(gamma[i] + gamma[j] - instance.w[e]) for i, j, e in pairs), default=0.0)
        audit.append((t, not check_stability(instance, outcome, tol), drift))
        target = rebalanced_targets(instance, matching, gamma)
        gap = float(np.max(np.abs(target - gamma))) if instance.n else 0.0
        if gap <= config.eps:
            return RebalanceResult(OK, outcome, gamma, t, gap, audit)
        if t >= guard:
            return RebalanceResult(GUARD_EXCEEDED, outcome, gamma, t, gap, audit,
                                   message=f"no convergence within {guard} iterations")
        gamma = kappa * target + (1 - kappa) * gamma
        t += 1


def fptas(instance: NetworkInstance, eps: float, kappa: float = 0.5, max_iters: int | None = None) -> RebalanceResult:
    """An eps-UD solution, or status ``UNSTABLE`` when no stable outcome exists.

    Weights are rescaled so the largest is 1 (eps scaled alike) and the
    resulting shares are scaled back.
    """
    if not eps > 0:
        return RebalanceResult(ERROR, None, message="eps must be positive")
    if not instance.unit_capacities:
        return RebalanceResult(ERROR, None, message="unequal division needs unit capacities")
    scaled, factor = rescale(instance)
    W = float(factor)
    lp = solve_lp(scaled, certify_unique=False)
    start = stable_outcome_from_dual(scaled, lp)
    if start is None:
        return RebalanceResult(UNSTABLE, None, message="no stable outcome exists", scale=W)
    res = edge_rebalancing(scaled, start, RebalanceConfig(kappa, eps / W, max_iters))
    res.scale = W
    if res.outcome is not None:
        res.gamma = res.gamma * W
        res.outcome = TradeOutcome.from_earnings(instance, res.outcome.matching, res.gamma)
        res.final_gap *= W
    return res
