"""Trade outcomes and the solution-concept checkers.

A :class:`TradeOutcome` is a (b-)matching plus per-directed-edge profit
shares. ``shares[d]`` for slot ``d = k -> i`` is what ``i`` earns on edge
``(k, i)``; node earnings are the ``b_i``-th largest incoming share.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .dynamics import EQUAL, bmax, compute_offers
from .instance import NetworkInstance


class MalformedOutcomeError(ValueError):
    """The matching/shares pair is not a valid trade outcome."""


def pos(x: float) -> float:
    return x if x > 0 else 0.0


@dataclass(frozen=True)
class TradeOutcome:
    matching: frozenset  # edge ids
    shares: np.ndarray   # length 2m, indexed by directed slot

    @classmethod
    def from_earnings(cls, instance: NetworkInstance, matching: Iterable, gamma) -> "TradeOutcome":
        """Build a 1-exchange outcome ``(M, gamma)``: matched nodes keep ``gamma_i`` as their share."""
        edges = _edge_ids(instance, matching)
        shares = np.zeros(2 * instance.m)
        for e in edges:
            d = 2 * e
            shares[d] = gamma[instance.dst[d]]
            shares[d + 1] = gamma[instance.src[d]]
        return cls(frozenset(edges), shares)

    @classmethod
    def from_state(cls, instance: NetworkInstance, alpha, matching: Iterable | None = None,
                   mode: str = EQUAL) -> "TradeOutcome | None":
        """Outcome read off a message state: the induced (or given) matching with offer shares."""
        if matching is None:
            matching = induced_matching(instance, alpha, mode=mode)
            if matching is None:
                return None
        edges = _edge_ids(instance, matching)
        offers = compute_offers(instance, alpha, mode)
        shares = np.zeros(2 * instance.m)
        for e in edges:
            shares[2 * e] = offers[2 * e]
            shares[2 * e + 1] = offers[2 * e + 1]
        return cls(frozenset(edges), shares)

    def pairs(self, instance: NetworkInstance) -> list[tuple[int, int]]:
        return sorted(instance.edge_pairs()[e] for e in self.matching)

    def earnings(self, instance: NetworkInstance) -> np.ndarray:
        gamma = np.zeros(instance.n)
        for i in range(instance.n):
            incoming = [self.shares[instance.directed(k, i)] for k in instance.neighbors(i)
                        if instance.edge_id(k, i) in self.matching]
            gamma[i] = bmax(incoming, instance.capacities[i])
        return gamma


def _edge_ids(instance: NetworkInstance, matching: Iterable) -> list[int]:
    out = []
    for item in matching:
        if isinstance(item, (int, np.integer)):
            out.append(int(item))
        else:
            i, j = item
            out.append(instance.edge_id(int(i), int(j)))
    return sorted(set(out))


def matching_pairs(instance: NetworkInstance, matching) -> list[tuple[int, int]]:
    pairs = instance.edge_pairs()
    return sorted(tuple(sorted(pairs[e])) for e in _edge_ids(instance, matching))


def is_b_matching(instance: NetworkInstance, matching) -> bool:
    deg = [0] * instance.n
    for e in _edge_ids(instance, matching):
        a, b = instance.edge_pairs()[e]
        deg[a] += 1
        deg[b] += 1
    return all(d <= c for d, c in zip(deg, instance.capacities))


# -- induced matching ---------------------------------------------------------

def induced_matching(instance: NetworkInstance, alpha, tol: float | None = None,
                     mode: str = EQUAL) -> frozenset | None:
    """The (b-)matching induced by a message state, or ``None`` when there is none.

    A node with at least ``b_i`` positive offers must see its top ``b_i``
    separated from the next one by more than ``tol`` and is paired with
    those senders; a node with fewer positive offers is paired with all of
    its positive senders. The pairing must be mutual.
    """
    if tol is None:
        tol = 1e-9 * instance.w_max
    offers = compute_offers(instance, alpha, mode)
    partners: list[set[int]] = []
    for i in range(instance.n):
        b = instance.capacities[i]
        inc = sorted(((offers[instance.directed(k, i)], k) for k in instance.neighbors(i)),
                     key=lambda vk: (-vk[0], vk[1]))
        positive = [(v, k) for v, k in inc if v > tol]
        if len(positive) >= b:
            nxt = inc[b][0] if len(inc) > b else 0.0
            if inc[b - 1][0] - nxt <= tol:
                return None
            partners.append({k for _, k in inc[:b]})
        else:
            partners.append({k for _, k in positive})
    edges = set()
    for i, ps in enumerate(partners):
        for k in ps:
            if i not in partners[k]:
                return None
            edges.add(instance.edge_id(i, k))
    return frozenset(edges)


# -- validity and checkers ---------------------------------------------------

def outcome_violations(instance: NetworkInstance, outcome: TradeOutcome, tol: float | None = None) -> list[str]:
    """Reasons why ``outcome`` is not a valid trade outcome (empty if valid)."""
    if tol is None:
        tol = 1e-12 * max(instance.w_max, 1.0)
    problems = []
    if len(outcome.shares) != 2 * instance.m:
        return [f"expected {2 * instance.m} shares, got {len(outcome.shares)}"]
    if not is_b_matching(instance, outcome.matching):
        problems.append("matching violates node capacities")
    for e, (i, j) in enumerate(instance.edge_pairs()):
        s_ij, s_ji = outcome.shares[2 * e], outcome.shares[2 * e + 1]
        if s_ij < -tol or s_ji < -tol:
            problems.append(f"edge ({i},{j}): negative share")
        if e in outcome.matching:
            if abs(s_ij + s_ji - float(instance.edges[e].w)) > tol:
                problems.append(f"edge ({i},{j}): shares sum to {s_ij + s_ji}, weight {instance.edges[e].w}")
        elif abs(s_ij) > tol or abs(s_ji) > tol:
            problems.append(f"edge ({i},{j}): unmatched edge carries a share")
    return problems


def _require_valid(instance, outcome):
    problems = outcome_violations(instance, outcome)
    if problems:
        raise MalformedOutcomeError("; ".join(problems))


def check_stability(instance: NetworkInstance, outcome: TradeOutcome, tol: float | None = None) -> list[tuple[int, int]]:
    """Unmatched edges ``(i, j)`` with ``gamma_i + gamma_j < w_ij - tol``."""
    _require_valid(instance, outcome)
    if tol is None:
        tol = 1e-12 * instance.w_max
    gamma = outcome.earnings(instance)
    bad = []
    for e, (i, j) in enumerate(instance.edge_pairs()):
        if e not in outcome.matching and gamma[i] + gamma[j] < instance.w[e] - tol:
            bad.append((i, j))
    return bad


def outside_options(instance: NetworkInstance, gamma, i: int, j: int) -> float:
    """``b_i``-th largest of ``(w_ik - gamma_k)+`` over neighbours ``k != j``."""
    vals = [pos(instance.w[instance.edge_id(i, k)] - gamma[k]) for k in instance.neighbors(i) if k != j]
    return bmax(vals, instance.capacities[i])


def balance_residual(instance: NetworkInstance, outcome: TradeOutcome) -> float:
    """Largest gap between the two endpoints' surpluses over their outside options, over matched edges."""
    _require_valid(instance, outcome)
    gamma = outcome.earnings(instance)
    worst = 0.0
    for e in outcome.matching:
        i, j = instance.edge_pairs()[e]
        gain_i = outcome.shares[2 * e + 1] - outside_options(instance, gamma, i, j)
        gain_j = outcome.shares[2 * e] - outside_options(instance, gamma, j, i)
        worst = max(worst, abs(gain_i - gain_j))
    return float(worst)


def surplus(instance: NetworkInstance, gamma, i: int, j: int) -> float:
    w = instance.w[instance.edge_id(i, j)]
    return w - outside_options(instance, gamma, i, j) - outside_options(instance, gamma, j, i)


def correct_division_residual(instance: NetworkInstance, outcome: TradeOutcome) -> float:
    """Largest ``|gamma_i - alt_i - r_ij * surplus_ij|`` over matched edges (1-exchange only)."""
    if not instance.unit_capacities:
        raise ValueError("correct division is defined for unit capacities only")
    _require_valid(instance, outcome)
    gamma = outcome.earnings(instance)
    worst = 0.0
    for e in outcome.matching:
        i, j = instance.edge_pairs()[e]
        r = float(instance.r_dir[2 * e])
        dev = gamma[i] - outside_options(instance, gamma, i, j) - r * surplus(instance, gamma, i, j)
        worst = max(worst, abs(dev))
    return float(worst)


def is_stable(instance, outcome, tol=None) -> bool:
    return not check_stability(instance, outcome, tol)


def is_eps_nb(instance: NetworkInstance, outcome: TradeOutcome, eps: float, tol: float | None = None) -> bool:
    if outcome_violations(instance, outcome):
        return False
    return is_stable(instance, outcome, tol) and bool(balance_residual(instance, outcome) <= eps)


def is_eps_ud(instance: NetworkInstance, outcome: TradeOutcome, eps: float, tol: float | None = None) -> bool:
    if not instance.unit_capacities:
        raise ValueError("UD solutions are defined for unit capacities only")
    if outcome_violations(instance, outcome):
        return False
    return is_stable(instance, outcome, tol) and bool(correct_division_residual(instance, outcome) <= eps)


# -- outcome files -------------------------------------------------------------

def outcome_to_dict(instance: NetworkInstance, outcome: TradeOutcome) -> dict:
    pairs = instance.edge_pairs()
    shares = {}
    for e in sorted(outcome.matching):
        i, j = pairs[e]
        shares[f"{i}->{j}"] = float(outcome.shares[2 * e])
        shares[f"{j}->{i}"] = float(outcome.shares[2 * e + 1])
    return {"matching": [list(pairs[e]) for e in sorted(outcome.matching)], "shares": shares}


def outcome_from_dict(instance: NetworkInstance, data: dict) -> TradeOutcome:
    try:
        edges = [instance.edge_id(int(i), int(j)) for i, j in data["matching"]]
        shares = np.zeros(2 * instance.m)
        for key, value in data.get("shares", {}).items():
            a, b = key.split("->")
            shares[instance.directed(int(a), int(b))] = float(value)
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedOutcomeError(f"bad outcome file: {exc}") from None
    return TradeOutcome(frozenset(edges), shares)


def save_outcome(instance, outcome, path) -> None:
    Path(path).write_text(json.dumps(outcome_to_dict(instance, outcome), indent=1) + "\n")


def load_outcome(instance, path) -> TradeOutcome:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedOutcomeError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return outcome_from_dict(instance, data)
