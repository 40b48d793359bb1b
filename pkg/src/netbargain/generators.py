"""Instance and initial-state generators.

Hand-made examples with known answers, the slow-convergence ring with its
near-fixed-point messages, and seeded random instances for experiments.
All generators are deterministic given their arguments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .instance import HALF, Edge, NetworkInstance, make_instance, to_fraction


@dataclass
class GeneratedCase:
    instance: NetworkInstance
    alpha0: np.ndarray | None = None
    expected: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)


def chain_example() -> GeneratedCase:
    """Four traders on a path, weights 8, 6, 2."""
    inst = make_instance(4, [(0, 1, 8), (1, 2, 6), (2, 3, 2)], labels="ABCD")
    expected = {
        "gamma": [1.5, 6.5, 1.0, 1.0],
        "matching": [(0, 1), (2, 3)],
        "matching_weight": Fraction(10),
        "fixed_point_iteration": 6,
    }
    return GeneratedCase(inst, np.zeros(6), expected, {"gamma": "REFERENCE", "matching": "REFERENCE"})


def g1_example() -> GeneratedCase:
    """Path a - c - d with weights 2 and 1: c's outside option is 1, so the split is 0.5 / 1.5."""
    inst = make_instance(3, [(0, 1, 2), (1, 2, 1)], labels=["a", "c", "d"])
    expected = {"gamma": [0.5, 1.5, 0.0], "matching": [(0, 1)]}
    return GeneratedCase(inst, None, expected, {"gamma": "REFERENCE", "w_cd": "inferred"})


def _geom(beta: Fraction, upto: int) -> Fraction:
    """``sum_{j=0}^{upto} beta^j`` (zero for an empty range)."""
    return sum((beta ** j for j in range(upto + 1)), Fraction(0))


def ring_slow_instance(N: int, r=Fraction(1, 3)) -> GeneratedCase:
    """Ring on ``8N`` nodes whose given messages are a ``beta^(N-1)``-fixed point with no induced matching.

    Here ``beta = r / (1 - r)``. Node ``l`` of the construction (1-based)
    is node ``l - 1`` of the instance.
    """
    if isinstance(N, bool) or not isinstance(N, int) or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N!r}")
    r = to_fraction(r)
    if not 0 < r < HALF:
        raise ValueError(f"r must lie in (0, 1/2), got {r}")
    n = 8 * N
    beta = r / (1 - r)
    W = 2 + 2 / (1 - beta)
    half = W / 2

    def R(l):
        return n - l + 1

    # split fraction kept by the first node, keyed by directed pair of ring positions
    split: dict[tuple[int, int], Fraction] = {}

    def set_split(a, b, value):
        split[(a, b)] = value
        split[(b, a)] = 1 - value

    for l in range(1, 4 * N):
        set_split(l, l + 1, HALF)
    for k in range(2, N + 1):
        set_split(2 * k - 1, 2 * k - 2, r)
    for i in range(N - 1):
        set_split(2 * N + 2 * i + 1, 2 * N + 2 * i + 2, r)
    for l in range(4 * N + 1, n):
        set_split(l, l + 1, split[(R(l), R(l + 1))])
    set_split(n, 1, HALF)
    set_split(4 * N, 4 * N + 1, HALF)

    A: dict[tuple[int, int], Fraction] = {}
    A[(n, 1)] = A[(1, n)] = half - 1
    for i in range(N):
        A[(2 * i + 1, 2 * i + 2)] = half - _geom(beta, i - 1)
        A[(2 * i + 2, 2 * i + 1)] = half + _geom(beta, i)
    for i in range(1, N):
        A[(2 * i, 2 * i + 1)] = half + _geom(beta, i - 2)
        A[(2 * i + 1, 2 * i)] = half - _geom(beta, i)
    A[(2 * N, 2 * N + 1)] = half + _geom(beta, N - 1)
    A[(2 * N + 1, 2 * N)] = half - _geom(beta, N - 1)
    for i in range(N - 1):
        A[(2 * N + 2 * i + 1, 2 * N + 2 * i + 2)] = half - _geom(beta, N - i - 1)
        A[(2 * N + 2 * i + 2, 2 * N + 2 * i + 1)] = half + _geom(beta, N - i - 3)
    for i in range(1, N):
        A[(2 * N + 2 * i, 2 * N + 2 * i + 1)] = half + _geom(beta, N - i - 1)
        A[(2 * N + 2 * i + 1, 2 * N + 2 * i)] = half - _geom(beta, N - i - 2)
    A[(4 * N - 1, 4 * N)] = A[(4 * N, 4 * N - 1)] = half - 1
    A[(4 * N, 4 * N + 1)] = A[(4 * N + 1, 4 * N)] = half
    for l in range(4 * N + 1, n):
        A[(l, l + 1)] = A[(R(l), R(l + 1))]
        A[(l + 1, l)] = A[(R(l + 1), R(l))]

    edges = []
    for l in range(1, n + 1):
        a, b = (l, l + 1) if l < n else (n, 1)
        w = W - 1 if (a, b) == (4 * N, 4 * N + 1) else W
        edges.append(Edge(a - 1, b - 1, w, split[(a, b)]))
    inst = NetworkInstance(n, tuple(edges))
    alpha = np.zeros(2 * inst.m)
    for (a, b), value in A.items():
        alpha[inst.directed(a - 1, b - 1)] = float(value)

    expected = {
        "residual": beta ** (N - 1),
        "induced": None,
        "matching": [(2 * k, 2 * k + 1) for k in range(n // 2)],
        "matching_gap": Fraction(1),
        "W": W,
        "beta": beta,
        "alpha_exact": {(a - 1, b - 1): v for (a, b), v in A.items()},
    }
    prov = {"residual": "DERIVED", "induced": "DERIVED", "matching_gap": "REFERENCE"}
    return GeneratedCase(inst, alpha, expected, prov)


def _positive_uniform(rng: np.random.Generator, digits: int | None) -> Fraction:
    """Uniform(0, 1], resampled until positive after rounding."""
    while True:
        u = 1.0 - rng.random()  # (0, 1]
        if digits is not None:
            u = round(u, digits)
        if u > 0:
            return to_fraction(u)


def _weight(rng, weight_dist: str, digits):
    if weight_dist == "uniform":
        return _positive_uniform(rng, digits)
    if weight_dist == "ones":
        return Fraction(1)
    if weight_dist == "grid":  # tenths, to provoke ties
        return Fraction(int(rng.integers(1, 11)), 10)
    raise ValueError(f"unknown weight distribution {weight_dist!r}")


def random_bipartite(n1: int, n2: int, edge_prob: float = 0.5, weight_dist: str = "uniform",
                     seed: int | None = 0, digits: int | None = None) -> GeneratedCase:
    """Bipartite graph, sides ``0..n1-1`` and ``n1..n1+n2-1``; weights in (0, 1]."""
    if n1 < 0 or n2 < 0 or not 0 <= edge_prob <= 1:
        raise ValueError("need n1, n2 >= 0 and edge_prob in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n1):
        for j in range(n2):
            if rng.random() < edge_prob:
                edges.append(Edge(i, n1 + j, _weight(rng, weight_dist, digits)))
    inst = NetworkInstance(n1 + n2, tuple(edges))
    return GeneratedCase(inst, None, {"seed": seed}, {})


def random_instance(n: int, edge_prob: float = 0.5, seed: int | None = 0, *, max_b: int = 1,
                    split_range: tuple[float, float] | None = None, weight_dist: str = "uniform",
                    digits: int | None = None, connected: bool = False) -> GeneratedCase:
    """Erdos-Renyi graph with weights in (0, 1], capacities in ``1..max_b`` and optional random splits."""
    if n < 0 or max_b < 1 or not 0 <= edge_prob <= 1:
        raise ValueError("need n >= 0, max_b >= 1 and edge_prob in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = []
    if connected and n > 1:  # random spanning tree first
        order = rng.permutation(n)
        for k in range(1, n):
            a, b = int(order[k]), int(order[rng.integers(0, k)])
            pairs.append((min(a, b), max(a, b)))
    have = set(pairs)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in have and rng.random() < edge_prob:
                pairs.append((i, j))
    pairs.sort()
    edges = []
    for i, j in pairs:
        w = _weight(rng, weight_dist, digits)
        if split_range is None:
            edges.append(Edge(i, j, w))
        else:
            lo, hi = split_range
            edges.append(Edge(i, j, w, to_fraction(round(float(rng.uniform(lo, hi)), 6))))
    caps = tuple(int(c) for c in rng.integers(1, max_b + 1, size=n)) if max_b > 1 else None
    return GeneratedCase(NetworkInstance(n, tuple(edges), caps), None, {"seed": seed}, {})


def complete_bipartite(n1: int, n2: int, w=1) -> NetworkInstance:
    edges = [Edge(i, n1 + j, w) for i in range(n1) for j in range(n2)]
    return NetworkInstance(n1 + n2, tuple(edges))


def perturb(instance: NetworkInstance, eta, seed: int | None = 0) -> NetworkInstance:
    """Add ``eta * U_e`` to every weight, ``U_e`` independent Uniform[0, 1] (seeded)."""
    eta = to_fraction(eta)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if eta == 0:
        return instance
    rng = np.random.default_rng(seed)
    noise = rng.random(instance.m)
    return instance.with_weights([e.w + eta * to_fraction(float(u)) for e, u in zip(instance.edges, noise)])


def alpha_to_dict(instance: NetworkInstance, alpha) -> dict:
    """Message file payload ``{"alpha": {"i\\\\j": value}}``."""
    out = {}
    for d in range(2 * instance.m):
        out[f"{instance.src[d]}\\{instance.dst[d]}"] = float(alpha[d])
    return {"alpha": out}


def alpha_from_dict(instance: NetworkInstance, data: dict) -> np.ndarray:
    alpha = np.full(2 * instance.m, np.nan)
    for key, value in data["alpha"].items():
        a, b = key.split("\\")
        alpha[instance.directed(int(a), int(b))] = float(value)
    if np.isnan(alpha).any():
        raise ValueError("message file does not cover every directed edge")
    return alpha
