"""Message-passing bargaining dynamics.

State is the vector ``alpha`` of best-alternative messages, one entry per
directed edge slot (see :mod:`netbargain.instance`). Offers, earnings and
profit shares are deterministic functions of ``alpha``.

The synchronous kernel is vectorised: per node, incoming offers are gathered
into a zero-padded row and sorted once, which gives the ``b``-th largest
offer and, for every directed edge, the ``b``-th largest offer *excluding*
one sender by a single comparison.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .instance import NetworkInstance

EQUAL = "equal"
UD = "ud"
MODES = (EQUAL, UD)

SYNC = "sync"
NODE_DAMPED = "node-damped"
TIME_VARYING = "time-varying"
ASYNC = "async"
SCHEDULES = (SYNC, NODE_DAMPED, TIME_VARYING, ASYNC)

REACHED_EPS = "reached-eps"
MAX_ITERS = "max-iters"
EXACT_FIXED_POINT = "exact-fixed-point"

EXACT_TOL = 1e-13  # relative to W_max


class ConfigError(ValueError):
    pass


def _normalize_mode(mode: str) -> str:
    mode = {"unequal-division": UD, "unequal": UD}.get(mode, mode)
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    return mode


def split_vector(instance: NetworkInstance, mode: str) -> np.ndarray:
    """Per-directed-edge share of the surplus kept by the sender's side."""
    if _normalize_mode(mode) == EQUAL:
        return np.full(2 * instance.m, 0.5)
    return instance.r_dir


# -- primitives --------------------------------------------------------------

def compute_offers(instance: NetworkInstance, alpha, mode: str = EQUAL) -> np.ndarray:
    """Offers ``m[i->j] = (w - a_ij)+ - r_ij (w - a_ij - a_ji)+`` for every slot."""
    alpha = np.asarray(alpha, dtype=float)
    w = instance.w_dir
    r = split_vector(instance, mode)
    rev = alpha.reshape(-1, 2)[:, ::-1].reshape(-1)
    return np.maximum(w - alpha, 0.0) - r * np.maximum(w - alpha - rev, 0.0)


def bmax(values, b: int) -> float:
    """``b``-th largest of ``values``; 0 when there are fewer than ``b`` of them."""
    if b < 1:
        raise ValueError("b must be at least 1")
    vals = sorted(values, reverse=True)
    return float(vals[b - 1]) if len(vals) >= b else 0.0


def best_alternative(instance: NetworkInstance, offers, i: int, j: int) -> float:
    """``b_i``-th best offer to ``i`` from neighbours other than ``j`` (scalar path)."""
    instance.directed(i, j)  # raises for non-edges
    incoming = [offers[instance.directed(k, i)] for k in instance.neighbors(i) if k != j]
    return bmax(incoming, int(instance.capacities[i]))


def _sorted_incoming(instance: NetworkInstance, offers: np.ndarray) -> np.ndarray:
    padded = np.append(offers, 0.0)[instance.in_slots]
    width = max(instance.in_slots.shape[1], int(instance.b.max(initial=1))) + 1
    out = np.zeros((instance.n, width))
    if padded.shape[1]:
        out[:, : padded.shape[1]] = -np.sort(-padded, axis=1)
    return out


def _kth(instance: NetworkInstance, srt: np.ndarray):
    rows = np.arange(instance.n)
    return srt[rows, instance.b - 1], srt[rows, instance.b]


def best_alternatives(instance: NetworkInstance, offers: np.ndarray) -> np.ndarray:
    """Vectorised best alternatives: entry ``d`` is the alternative of ``src[d]`` excluding ``dst[d]``."""
    if instance.m == 0:
        return np.zeros(0)
    kth, nxt = _kth(instance, _sorted_incoming(instance, offers))
    src = instance.src
    own = offers.reshape(-1, 2)[:, ::-1].reshape(-1)  # offer from dst[d] to src[d]
    # removing a value that sits in the top b shifts the b-th largest down by one
    return np.where(own >= kth[src], nxt[src], kth[src])


def compute_earnings(instance: NetworkInstance, offers) -> np.ndarray:
    """``gamma_i`` = ``b_i``-th largest incoming offer."""
    if instance.m == 0:
        return np.zeros(instance.n)
    kth, _ = _kth(instance, _sorted_incoming(instance, np.asarray(offers, dtype=float)))
    return kth


def compute_shares(instance: NetworkInstance, offers) -> np.ndarray:
    """Profit shares: slot ``d`` (``k -> i``) keeps its offer iff it ranks in ``i``'s top ``b_i``.

    Ties are ranked by offer value, then by lower sender id first.
    """
    offers = np.asarray(offers, dtype=float)
    shares = np.zeros_like(offers)
    for i in range(instance.n):
        ranked = sorted(((offers[instance.directed(k, i)], k) for k in instance.neighbors(i)),
                        key=lambda vk: (-vk[0], vk[1]))
        for value, k in ranked[: instance.capacities[i]]:
            shares[instance.directed(k, i)] = value
    return shares


def apply_T(instance: NetworkInstance, alpha, mode: str = EQUAL) -> np.ndarray:
    """The best-alternative map ``alpha -> T(alpha)`` whose damped iteration is the dynamics."""
    return best_alternatives(instance, compute_offers(instance, alpha, mode))


def eps_residual(instance: NetworkInstance, alpha, mode: str = EQUAL) -> float:
    """``max_d |alpha_d - T(alpha)_d|``; ``alpha`` is an eps-fixed point iff this is <= eps."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 0:
        return 0.0
    return float(np.max(np.abs(alpha - apply_T(instance, alpha, mode))))


def rate_bound_iterations(kappa: float, eps: float) -> float:
    """Iterations after which a unit-scale instance is guaranteed to be an eps-fixed point."""
    if not 0 < kappa < 1:
        raise ConfigError("the rate bound needs kappa in (0, 1)")
    return 1.0 / (math.pi * kappa * (1 - kappa) * eps * eps)


def rate_bound_residual(kappa: float, t: int) -> float:
    """Residual bound ``1/sqrt(pi kappa (1-kappa) t)`` at iteration ``t >= 1`` (unit scale)."""
    if not 0 < kappa < 1:
        raise ConfigError("the rate bound needs kappa in (0, 1)")
    return 1.0 / math.sqrt(math.pi * kappa * (1 - kappa) * t)


# -- configuration and schedules --------------------------------------------

@dataclass
class DynamicsConfig:
    mode: str = EQUAL
    kappa: float = 0.5
    schedule: str = SYNC
    node_kappa: Sequence[float] | None = None
    kappa_seq: Sequence[float] | Callable[[int], float] | None = None
    async_order: Sequence[int] | None = None
    async_damping: float | None = None  # default 1/(2|E|)
    max_iters: int = 10_000
    target_eps: float = 0.0
    record_every: int = 1

    def check(self, instance: NetworkInstance | None = None) -> None:
        self.mode = _normalize_mode(self.mode)
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not 0 < self.kappa <= 1:
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.kappa == 1 and self.schedule in (SYNC, NODE_DAMPED):
            warnings.warn("kappa = 1 is undamped: synchronous updates may oscillate on even cycles",
                          RuntimeWarning, stacklevel=3)
        if self.max_iters < 0 or self.record_every < 1 or self.target_eps < 0:
            raise ConfigError("max_iters >= 0, record_every >= 1 and target_eps >= 0 required")
        if self.schedule == NODE_DAMPED:
            if self.node_kappa is None:
                raise ConfigError("node-damped schedule needs node_kappa")
            if instance is not None and len(self.node_kappa) != instance.n:
                raise ConfigError("node_kappa needs one entry per node")
            if any(not 0 < k <= 1 for k in self.node_kappa):
                raise ConfigError("node damping factors must lie in (0, 1]")
        if self.schedule == TIME_VARYING:
            if self.kappa_seq is None:
                raise ConfigError("time-varying schedule needs kappa_seq")
            if not callable(self.kappa_seq):
                if len(self.kappa_seq) == 0 or any(not 0 < k <= 1 for k in self.kappa_seq):
                    raise ConfigError("kappa_seq entries must lie in (0, 1]")
        if self.schedule == ASYNC:
            if self.async_damping is not None and not 0 < self.async_damping <= 1:
                raise ConfigError("async_damping must lie in (0, 1]")
            if instance is not None and self.async_order is not None:
                if sorted(self.async_order) != list(range(2 * instance.m)):
                    raise ConfigError("async_order must be a permutation of the directed edges")

    def kappa_at(self, t: int) -> float:
        seq = self.kappa_seq
        if callable(seq):
            k = float(seq(t))
            if not 0 < k <= 1:
                raise ConfigError(f"kappa_seq({t}) = {k} outside (0, 1]")
            return k
        return float(seq[min(t, len(seq) - 1)])


def async_cycle(instance: NetworkInstance, alpha, mode: str = EQUAL,
                order: Sequence[int] | None = None, damping: float | None = None) -> np.ndarray:
    """One update cycle: each directed message updated once, in ``order``, with damping ``damping``."""
    a = np.array(alpha, dtype=float)
    m2 = 2 * instance.m
    if m2 == 0:
        return a
    lam = 1.0 / m2 if damping is None else damping
    order = range(m2) if order is None else order
    r = split_vector(instance, mode)
    w = instance.w_dir
    for d in order:
        i, j = int(instance.src[d]), int(instance.dst[d])
        incoming = []
        for k in instance.neighbors(i):
            if k == j:
                continue
            dk = instance.directed(k, i)
            a_k, a_i = a[dk], a[dk ^ 1]
            incoming.append(max(w[dk] - a_k, 0.0) - r[dk] * max(w[dk] - a_k - a_i, 0.0))
        target = bmax(incoming, int(instance.capacities[i]))
        a[d] = (1 - lam) * a[d] + lam * target
    return a


def async_cycle_residual(instance: NetworkInstance, alpha, mode: str = EQUAL,
                         order: Sequence[int] | None = None) -> float:
    """Residual of the operator whose damped form is one update cycle.

    With ``c = (1 - 1/2m)^{2m}`` a cycle equals ``(1-c) T_cyc + c I``, so
    ``|T_cyc a - a| = |cycle(a) - a| / (1 - c)``.
    """
    m2 = 2 * instance.m
    if m2 == 0:
        return 0.0
    a = np.asarray(alpha, dtype=float)
    c = (1 - 1 / m2) ** m2
    return float(np.max(np.abs(async_cycle(instance, a, mode, order) - a))) / (1 - c)


def step(instance: NetworkInstance, alpha, config: DynamicsConfig, t: int = 0) -> np.ndarray:
    """Advance the messages by one iteration (one full cycle for the async schedule)."""
    alpha = np.asarray(alpha, dtype=float)
    if config.schedule == ASYNC:
        return async_cycle(instance, alpha, config.mode, config.async_order, config.async_damping)
    target = apply_T(instance, alpha, config.mode)
    if config.schedule == SYNC:
        kappa = config.kappa
    elif config.schedule == NODE_DAMPED:
        kappa = np.asarray(config.node_kappa, dtype=float)[instance.src]
    else:
        kappa = config.kappa_at(t)
    if np.isscalar(kappa) and kappa == 1.0:
        return target
    return (1 - kappa) * alpha + kappa * target


# -- driver ------------------------------------------------------------------

@dataclass
class RunTrace:
    residual_history: list = field(default_factory=list)      # (t, residual)
    earnings_snapshots: list = field(default_factory=list)    # (t, gamma)
    induced_matching_history: list = field(default_factory=list)  # (t, matching or None)
    stop_reason: str | None = None
    iterations: int = 0

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1][1] if self.residual_history else float("nan")


def initial_alpha(instance: NetworkInstance, kind: str = "zero", seed: int | None = None) -> np.ndarray:
    if kind == "zero":
        return np.zeros(2 * instance.m)
    if kind == "uniform":
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, instance.w_max, size=2 * instance.m)
    raise ConfigError(f"unknown initial condition {kind!r}")


def run(instance: NetworkInstance, alpha0, config: DynamicsConfig,
        on_record: Callable[[int, np.ndarray, float], None] | None = None):
    """Iterate until the residual drops to ``target_eps``, an exact fixed point, or ``max_iters``.

    The residual is recorded at every iteration ``t = 0 .. T``; earnings and
    induced matchings every ``record_every`` iterations and at the end.
    Returns ``(alpha_T, trace)``.
    """
    from .outcomes import induced_matching

    config.check(instance)
    alpha = np.array(alpha0, dtype=float)
    if alpha.shape != (2 * instance.m,):
        raise ConfigError(f"alpha0 must have {2 * instance.m} entries")
    scale = instance.w_max if instance.w_max > 0 else 1.0
    if np.any(alpha < 0) or np.any(alpha > scale * (1 + 1e-12)):
        raise ConfigError("alpha0 must lie in [0, W_max]")
    exact = EXACT_TOL * scale
    trace = RunTrace()

    def record(t, a, res):
        gamma = compute_earnings(instance, compute_offers(instance, a, config.mode))
        trace.earnings_snapshots.append((t, gamma))
        trace.induced_matching_history.append((t, induced_matching(instance, a, mode=config.mode)))
        if on_record is not None:
            on_record(t, a, res)

    t = 0
    while True:
        res = eps_residual(instance, alpha, config.mode)
        trace.residual_history.append((t, res))
        if res < exact:
            trace.stop_reason = EXACT_FIXED_POINT
        elif res <= config.target_eps:
            trace.stop_reason = REACHED_EPS
        elif t >= config.max_iters:
            trace.stop_reason = MAX_ITERS
        if trace.stop_reason is not None:
            record(t, alpha, res)
            break
        if t % config.record_every == 0:
            record(t, alpha, res)
        alpha = step(instance, alpha, config, t)
        t += 1
    trace.iterations = t
    return alpha, trace
