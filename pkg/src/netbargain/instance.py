"""Exchange-network instances: weighted graph, node capacities, split fractions.

Weights and split fractions are held as exact :class:`fractions.Fraction`
values. Float arrays used by the dynamics are derived once at construction
and cached on the (immutable) instance.

Directed edges are indexed ``0 .. 2m-1``: edge ``e = (i, j)`` owns slot
``2e`` for ``i -> j`` and ``2e + 1`` for ``j -> i``, so the reverse of slot
``d`` is ``d ^ 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HALF = Fraction(1, 2)


class InstanceError(ValueError):
    """Raised when an instance file cannot be parsed or fails validation."""


def to_fraction(value) -> Fraction:
    """Parse a weight/fraction given as int, decimal string, ``"p/q"`` or float.

    Floats go through ``repr`` so that ``0.1`` becomes exactly ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a number")


def fraction_to_text(x: Fraction) -> str:
    """Decimal string when the expansion terminates, else ``"p/q"``."""
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(x.numerator)
    scaled = x * 10**digits
    assert scaled.denominator == 1
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    w: Fraction
    r: Fraction = HALF  # share of surplus going to ``i``; ``j`` gets ``1 - r``

    def __post_init__(self):
        object.__setattr__(self, "w", to_fraction(self.w))
        object.__setattr__(self, "r", to_fraction(self.r))


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Immutable exchange network.

    ``capacities`` defaults to all ones (the 1-exchange rule); edges default
    to the balanced split ``r = 1/2``.
    """

    n: int
    edges: tuple[Edge, ...]
    capacities: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None

    # derived, filled in __post_init__
    w: np.ndarray = field(init=False, repr=False)
    w_max: float = field(init=False)
    src: np.ndarray = field(init=False, repr=False)
    dst: np.ndarray = field(init=False, repr=False)
    w_dir: np.ndarray = field(init=False, repr=False)
    r_dir: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)
    in_slots: np.ndarray = field(init=False, repr=False)
    _edge_index: dict = field(init=False, repr=False)
    _neighbors: tuple = field(init=False, repr=False)

    def __post_init__(self):
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        caps = tuple(int(c) for c in self.capacities) if self.capacities is not None else (1,) * self.n
        object.__setattr__(self, "capacities", caps)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

        m = len(edges)
        w = np.array([float(e.w) for e in edges], dtype=float)
        src = np.empty(2 * m, dtype=np.intp)
        dst = np.empty(2 * m, dtype=np.intp)
        r_dir = np.empty(2 * m, dtype=float)
        for k, e in enumerate(edges):
            src[2 * k], dst[2 * k] = e.i, e.j
            src[2 * k + 1], dst[2 * k + 1] = e.j, e.i
            r_dir[2 * k] = float(e.r)
            r_dir[2 * k + 1] = float(1 - e.r)
        set_ = object.__setattr__
        set_(self, "w", w)
        set_(self, "w_max", float(max((e.w for e in edges), default=Fraction(0))))
        set_(self, "src", src)
        set_(self, "dst", dst)
        set_(self, "w_dir", np.repeat(w, 2))
        set_(self, "r_dir", r_dir)
        set_(self, "b", np.array(caps, dtype=np.intp))

        index = {}
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        incoming: list[list[int]] = [[] for _ in range(self.n)]
        for d in range(2 * m):
            i, j = int(src[d]), int(dst[d])
            index.setdefault((i, j), d)
            if 0 <= i < self.n and 0 <= j < self.n:
                nbrs[i].append(j)
                incoming[j].append(d)
        set_(self, "_edge_index", index)
        set_(self, "_neighbors", tuple(tuple(x) for x in nbrs))
        width = max([len(x) for x in incoming] + [0])
        slots = np.full((self.n, width), 2 * m, dtype=np.intp)  # 2m -> padding zero
        for v, ds in enumerate(incoming):
            slots[v, : len(ds)] = ds
        set_(self, "in_slots", slots)

    # -- basic accessors -------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def weights(self) -> list[Fraction]:
        return [e.w for e in self.edges]

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    def directed(self, i: int, j: int) -> int:
        """Slot of the directed edge ``i -> j``."""
        try:
            return self._edge_index[(i, j)]
        except KeyError:
            raise KeyError(f"({i}, {j}) is not an edge") from None

    def edge_id(self, i: int, j: int) -> int:
        return self.directed(i, j) // 2

    def edge_pairs(self) -> list[tuple[int, int]]:
        return [(e.i, e.j) for e in self.edges]

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else str(i)

    def split(self, i: int, j: int) -> float:
        """``r_ij``: fraction of the surplus that goes to ``i`` on edge ``(i, j)``."""
        return float(self.r_dir[self.directed(i, j)])

    @property
    def unit_capacities(self) -> bool:
        return all(c == 1 for c in self.capacities)

    def with_splits(self, splits: Sequence) -> "NetworkInstance":
        edges = tuple(Edge(e.i, e.j, e.w, s) for e, s in zip(self.edges, splits, strict=True))
        return NetworkInstance(self.n, edges, self.capacities, self.labels)

    def with_weights(self, weights: Sequence) -> "NetworkInstance":
        edges = tuple(Edge(e.i, e.j, w, e.r) for e, w in zip(self.edges, weights, strict=True))
        return NetworkInstance(self.n, edges, self.capacities, self.labels)

    def with_capacities(self, capacities: Sequence[int]) -> "NetworkInstance":
        return NetworkInstance(self.n, self.edges, tuple(capacities), self.labels)

    def __eq__(self, other):
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return (self.n, self.edges, self.capacities, self.labels) == (
            other.n, other.edges, other.capacities, other.labels)

    def __hash__(self):
        return hash((self.n, self.edges, self.capacities, self.labels))


def make_instance(n: int, edges: Iterable, capacities=None, labels=None) -> NetworkInstance:
    """Convenience constructor taking ``(i, j, w)`` or ``(i, j, w, r)`` tuples."""
    return NetworkInstance(n, tuple(e if isinstance(e, Edge) else Edge(*e) for e in edges),
                           None if capacities is None else tuple(capacities),
                           None if labels is None else tuple(labels))


def validate(instance: NetworkInstance) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    if instance.n < 0:
        problems.append(f"negative node count {instance.n}")
    seen = {}
    for k, e in enumerate(instance.edges):
        tag = f"edge {k} ({e.i},{e.j})"
        if not (0 <= e.i < instance.n and 0 <= e.j < instance.n):
            problems.append(f"{tag}: endpoint out of range")
        if e.i == e.j:
            problems.append(f"{tag}: self-loop")
        if e.w <= 0:
            problems.append(f"{tag}: non-positive weight {e.w}")
        if not 0 < e.r < 1:
            problems.append(f"{tag}: split fraction {e.r} outside (0,1)")
        key = frozenset((e.i, e.j))
        if key in seen:
            problems.append(f"{tag}: parallel edge (duplicates edge {seen[key]})")
        else:
            seen[key] = k
    if len(instance.capacities) != instance.n:
        problems.append(f"capacity table has {len(instance.capacities)} entries for {instance.n} nodes")
    for v, c in enumerate(instance.capacities):
        if c < 1:
            problems.append(f"node {v}: capacity {c} < 1")
    if instance.labels is not None:
        if len(instance.labels) != instance.n:
            problems.append("label table length differs from node count")
        elif len(set(instance.labels)) != instance.n:
            problems.append("duplicate node labels")
    return problems


def rescale(instance: NetworkInstance) -> tuple[NetworkInstance, Fraction]:
    """Divide every weight by the largest one. Returns ``(scaled, factor)``."""
    if not instance.edges:
        return instance, Fraction(1)
    factor = max(e.w for e in instance.edges)
    return instance.with_weights([e.w / factor for e in instance.edges]), factor


# -- serialization ---------------------------------------------------------

def to_dict(instance: NetworkInstance) -> dict:
    edges = []
    for e in instance.edges:
        rec = {"i": e.i, "j": e.j, "w": fraction_to_text(e.w)}
        if e.r != HALF:
            rec["r"] = fraction_to_text(e.r)
        edges.append(rec)
    out: dict = {"nodes": list(instance.labels) if instance.labels else instance.n, "edges": edges}
    caps = {str(v): c for v, c in enumerate(instance.capacities) if c != 1}
    if caps:
        out["capacities"] = caps
    return out


def from_dict(data: dict, *, check: bool = True) -> NetworkInstance:
    if not isinstance(data, dict):
        raise InstanceError("instance must be a JSON object")
    if "nodes" not in data or "edges" not in data:
        raise InstanceError("instance needs 'nodes' and 'edges'")
    nodes = data["nodes"]
    if isinstance(nodes, int) and not isinstance(nodes, bool):
        n, labels = nodes, None
    elif isinstance(nodes, list):
        n, labels = len(nodes), [str(s) for s in nodes]
    else:
        raise InstanceError("'nodes' must be an integer or a list of labels")
    lookup = {s: k for k, s in enumerate(labels)} if labels else {}

    def node_ref(value, where):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, str) and value in lookup:
            return lookup[value]
        raise InstanceError(f"{where}: unknown node {value!r}")

    edges = []
    for k, rec in enumerate(data["edges"]):
        where = f"edges[{k}]"
        if not isinstance(rec, dict):
            raise InstanceError(f"{where}: expected an object")
        try:
            i = node_ref(rec["i"], where)
            j = node_ref(rec["j"], where)
            w = to_fraction(rec["w"])
            r = to_fraction(rec.get("r", HALF))
        except KeyError as exc:
            raise InstanceError(f"{where}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"{where}: {exc}") from None
        edges.append(Edge(i, j, w, r))
    caps = [1] * n
    for key, c in (data.get("capacities") or {}).items():
        try:
            v = lookup[key] if key in lookup else int(key)
        except ValueError:
            raise InstanceError(f"capacities: unknown node {key!r}") from None
        if not (0 <= v < n):
            raise InstanceError(f"capacities: node {key!r} out of range")
        if not isinstance(c, int) or isinstance(c, bool):
            raise InstanceError(f"capacities[{key!r}]: expected an integer")
        caps[v] = c
    inst = NetworkInstance(n, tuple(edges), tuple(caps), tuple(labels) if labels else None)
    if check:
        problems = validate(inst)
        if problems:
            raise InstanceError("invalid instance: " + "; ".join(problems))
    return inst


def save(instance: NetworkInstance, path) -> None:
    Path(path).write_text(json.dumps(to_dict(instance), indent=1) + "\n")


def load(path) -> NetworkInstance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(data)
