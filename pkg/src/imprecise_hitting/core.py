"""Imprecise Markov chains and their lower/upper transition operators.

A chain is given row by row: every state owns a credal set of outgoing
probability rows, either as a finite list of vertices (the credal set is
their convex hull) or as interval bounds on each coordinate. Because rows
are specified separately, the set of compatible transition matrices is the
product of the row sets, and every operator below works one row at a time.

Functions on the state space take values in the reals extended with
``+inf``. They are stored as float64 arrays; ``-inf`` and ``nan`` are rejected
on entry, and products follow the convention ``0 * inf = 0`` (see
:func:`ext_matvec`).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import (
    BoundOrderError,
    DimensionMismatch,
    IntervalInfeasible,
    RowSumError,
    UnknownStateInTarget,
    ValidationError,
    VertexExplosion,
)

Bound = Literal["lower", "upper"]

ROW_SUM_TOL = 1e-9
INTERVAL_SUM_TOL = 1e-12
# Leftover mass below this is treated as rounding noise by the greedy allocation.
MASS_TOL = 1e-12
DEDUP_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9
VERTEX_CAP = 10_000


def check_bound(bound: str) -> str:
    if bound not in ("lower", "upper"):
        raise ValueError(f"bound must be 'lower' or 'upper', got {bound!r}")
    return bound


# ---------------------------------------------------------------------------
# extended reals


def as_ext_vector(values, size: int | None = None) -> np.ndarray:
    """Validate and copy a vector of values in ``R ∪ {+inf}``."""
    f = np.array(values, dtype=float)
    if f.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d vector, got shape {f.shape}")
    if size is not None and f.shape[0] != size:
        raise DimensionMismatch(f"expected {size} entries, got {f.shape[0]}")
    if np.isnan(f).any():
        raise ValueError("extended vectors cannot contain nan")
    if np.isneginf(f).any():
        raise ValueError("extended vectors cannot contain -inf")
    return f


def ext_matvec(rows: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Row-wise inner products ``rows @ f`` with ``0 * inf = 0``.

    Columns are accumulated left to right, so two identical rows always give
    bit-identical results regardless of the other rows in the batch.
    """
    rows = np.atleast_2d(rows)
    finite = np.isfinite(f)
    out = np.zeros(rows.shape[0])
    for j in np.flatnonzero(finite):
        out += rows[:, j] * f[j]
    if not finite.all():
        out[(rows[:, ~finite] > 0).any(axis=1)] = np.inf
    return out


def ext_dot(row: np.ndarray, f: np.ndarray) -> float:
    return float(ext_matvec(row[None, :], f)[0])


# ---------------------------------------------------------------------------
# state space and rows


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValidationError("state space must contain at least one state")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"state labels must be distinct: {list(labels)}")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise UnknownStateInTarget(f"unknown state {label!r}") from None


def _greedy_row(lower: np.ndarray, upper: np.ndarray, order: Iterable[int]) -> np.ndarray:
    """Start from the lower bounds and hand out the free mass in ``order``."""
    row = lower.copy()
    remaining = 1.0 - float(lower.sum())
    for y in order:
        if remaining < MASS_TOL:
            break
        add = min(upper[y] - lower[y], remaining)
        if add > 0:
            row[y] += add
            remaining -= add
    return row


def _stable_order(keys: np.ndarray) -> np.ndarray:
    return np.argsort(keys, kind="stable")


class RowCredalSet:
    """Closed convex set of probability rows for one state."""

    size: int

    def vertices(self, cap: int = VERTEX_CAP) -> np.ndarray:
        raise NotImplementedError

    def extremal(self, f: np.ndarray, bound: Bound) -> np.ndarray:
        """A row attaining the minimum (or maximum) of ``<row, f>``."""
        raise NotImplementedError

    def support(self) -> np.ndarray:
        """Boolean mask of states that some row can give positive mass."""
        raise NotImplementedError

    def lower_positive(self, mask: np.ndarray) -> bool:
        """True when every row puts positive mass on ``mask``."""
        raise NotImplementedError

    def row_within(self, inside: np.ndarray, goal: np.ndarray) -> np.ndarray | None:
        """A row supported in ``inside`` with positive mass on ``goal``, if any."""
        raise NotImplementedError

    def contains(self, row: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def mix(self, base: np.ndarray, lam: float) -> "RowCredalSet":
        """The set ``{lam * base + (1 - lam) * r}`` over rows ``r`` of this set."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_spec(spec) -> "RowCredalSet":
        if isinstance(spec, RowCredalSet):
            return spec
        if not isinstance(spec, Mapping):
            raise ValidationError(f"row spec must be a mapping, got {type(spec).__name__}")
        if "vertices" in spec and "intervals" not in spec:
            return VertexRow(spec["vertices"])
        if "intervals" in spec and "vertices" not in spec:
            iv = spec["intervals"]
            if not isinstance(iv, Mapping) or set(iv) != {"lower", "upper"}:
                raise ValidationError("intervals must have exactly 'lower' and 'upper'")
            return IntervalRow(iv["lower"], iv["upper"])
        raise ValidationError("row spec needs exactly one of 'vertices' or 'intervals'")


class VertexRow(RowCredalSet):
    """Convex hull of finitely many probability rows."""

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValidationError("vertex list must be a non-empty list of rows")
        if not np.isfinite(v).all():
            raise ValidationError("vertex entries must be finite")
        if (v < 0).any() or (v > 1).any():
            raise RowSumError("vertex entries must lie in [0, 1]")
        sums = v.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise RowSumError(f"vertex {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        v.setflags(write=False)
        self.rows = v
        self.size = v.shape[1]

    def __repr__(self):
        return f"VertexRow({self.rows.tolist()})"

    def __eq__(self, other):
        return isinstance(other, VertexRow) and np.array_equal(self.rows, other.rows)

    def vertices(self, cap=VERTEX_CAP):
        kept = []
        for r in self.rows:
            if not any(np.max(np.abs(r - q)) <= DEDUP_TOL for q in kept):
                kept.append(r)
                if len(kept) > cap:
                    raise VertexExplosion(f"more than {cap} vertices")
        return np.array(kept)

    def extremal(self, f, bound):
        values = ext_matvec(self.rows, f)
        idx = np.argmin(values) if bound == "lower" else np.argmax(values)
        return self.rows[idx].copy()

    def support(self):
        return (self.rows > 0).any(axis=0)

    def lower_positive(self, mask):
        return bool((self.rows[:, mask].sum(axis=1) > 0).all())

    def row_within(self, inside, goal):
        for r in self.rows:
            if not (r[~inside] > 0).any() and r[goal].sum() > 0:
                return r.copy()
        return None

    def contains(self, row, tol=MEMBERSHIP_TOL):
        row = np.asarray(row, dtype=float)
        if row.shape != (self.size,):
            return False
        if (row < -tol).any() or abs(row.sum() - 1.0) > tol:
            return False
        m = self.rows.shape[0]
        a = np.vstack([self.rows.T, np.ones((1, m))])
        b = np.concatenate([row, [1.0]])
        _, rnorm = nnls(a, b)
        return bool(rnorm <= tol)

    def mix(self, base, lam):
        return VertexRow(lam * np.asarray(base) + (1.0 - lam) * self.rows)

    def to_spec(self):
        return {"vertices": self.rows.tolist()}


class IntervalRow(RowCredalSet):
    """Rows ``q`` with ``lower <= q <= upper`` coordinatewise and ``sum(q) = 1``."""

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=float)
        up = np.array(upper, dtype=float)
        if lo.ndim != 1 or lo.shape != up.shape or lo.size == 0:
            raise DimensionMismatch(
                f"interval bounds must be equal-length vectors, got {lo.shape} and {up.shape}"
            )
        if not (np.isfinite(lo).all() and np.isfinite(up).all()):
            raise ValidationError("interval bounds must be finite")
        if (lo < 0).any() or (up > 1).any():
            raise BoundOrderError("interval bounds must lie in [0, 1]")
        bad = np.flatnonzero(lo > up)
        if bad.size:
            y = int(bad[0])
            raise BoundOrderError(f"lower[{y}] = {lo[y]!r} exceeds upper[{y}] = {up[y]!r}")
        if lo.sum() > 1 + INTERVAL_SUM_TOL:
            raise IntervalInfeasible(f"lower bounds sum to {lo.sum()!r} > 1")
        if up.sum() < 1 - INTERVAL_SUM_TOL:
            raise IntervalInfeasible(f"upper bounds sum to {up.sum()!r} < 1")
        lo.setflags(write=False)
        up.setflags(write=False)
        self.lower = lo
        self.upper = up
        self.size = lo.shape[0]

    def __repr__(self):
        return f"IntervalRow({self.lower.tolist()}, {self.upper.tolist()})"

    def __eq__(self, other):
        return (
            isinstance(other, IntervalRow)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def greedy(self, order) -> np.ndarray:
        return _greedy_row(self.lower, self.upper, order)

    def extremal(self, f, bound):
        # ties in f are broken by ascending state index (stable sort)
        order = _stable_order(f) if bound == "lower" else _stable_order(-f)
        return self.greedy(order)

    def support(self):
        out = np.zeros(self.size, dtype=bool)
        rest = np.arange(self.size)
        for y in range(self.size):
            out[y] = self.greedy([y, *rest[rest != y]])[y] > 0
        return out

    def lower_positive(self, mask):
        idx = np.arange(self.size)
        row = self.greedy(np.concatenate([idx[~mask], idx[mask]]))
        return bool(row[mask].sum() > 0)

    def row_within(self, inside, goal):
        idx = np.arange(self.size)
        order = np.concatenate([idx[inside & goal], idx[inside & ~goal], idx[~inside]])
        row = self.greedy(order)
        if (row[~inside] > 0).any() or row[goal].sum() <= 0:
            return None
        return row

    def contains(self, row, tol=MEMBERSHIP_TOL):
        row = np.asarray(row, dtype=float)
        if row.shape != (self.size,):
            return False
        return bool(
            (row >= self.lower - tol).all()
            and (row <= self.upper + tol).all()
            and abs(row.sum() - 1.0) <= tol
        )

    def mix(self, base, lam):
        base = np.asarray(base, dtype=float)
        lo = lam * base + (1.0 - lam) * self.lower
        up = lam * base + (1.0 - lam) * self.upper
        # rounding can push lo above up by an ulp when the interval is a point
        return IntervalRow(np.minimum(lo, up), np.clip(up, 0.0, 1.0))

    def vertices(self, cap=VERTEX_CAP):
        return _interval_vertices(self.lower, self.upper, cap)

    def to_spec(self):
        return {"intervals": {"lower": self.lower.tolist(), "upper": self.upper.tolist()}}


def _interval_vertices(lo: np.ndarray, up: np.ndarray, cap: int) -> np.ndarray:
    """Vertices of ``{q : lo <= q <= up, sum q = 1}``.

    At a vertex at most one coordinate sits strictly inside its bounds, so we
    pick that free coordinate, put every other one at a bound (depth-first,
    pruning branches that cannot close the sum) and solve for the free one.
    """
    k = lo.size
    found: dict[tuple, np.ndarray] = {}
    tol = DEDUP_TOL

    def record(q):
        key = tuple(np.round(q, 11))
        if key not in found:
            found[key] = q
            if len(found) > cap:
                raise VertexExplosion(f"more than {cap} vertices")

    for j in range(k):
        others = [i for i in range(k) if i != j]
        rest_lo = np.concatenate([np.cumsum(lo[others][::-1])[::-1], [0.0]])
        rest_up = np.concatenate([np.cumsum(up[others][::-1])[::-1], [0.0]])
        target_hi = 1.0 - lo[j]
        target_lo = 1.0 - up[j]
        q = np.zeros(k)

        def dfs(pos, acc):
            if acc + rest_lo[pos] > target_hi + tol or acc + rest_up[pos] < target_lo - tol:
                return
            if pos == len(others):
                free = 1.0 - acc
                if abs(free - lo[j]) <= tol:
                    free = lo[j]
                elif abs(free - up[j]) <= tol:
                    free = up[j]
                q[j] = min(max(free, lo[j]), up[j])
                record(q.copy())
                return
            i = others[pos]
            for value in (lo[i], up[i]) if lo[i] != up[i] else (lo[i],):
                q[i] = value
                dfs(pos + 1, acc + value)

        dfs(0, 0.0)
    return np.array(list(found.values()))


def row_vertices(row: RowCredalSet, cap: int = VERTEX_CAP) -> np.ndarray:
    """All extreme points of a row credal set, deduplicated."""
    return row.vertices(cap)


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True)
class ImpreciseChain:
    states: StateSpace
    rows: tuple[RowCredalSet, ...]
    _stack: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        k = self.states.size
        if len(rows) != k:
            raise DimensionMismatch(f"{k} states but {len(rows)} rows")
        for label, r in zip(self.states.labels, rows):
            if r.size != k:
                raise DimensionMismatch(f"row {label!r} has {r.size} entries, expected {k}")
        # all vertex rows stacked, for one batched inner product per sweep
        vstates = [x for x, r in enumerate(rows) if isinstance(r, VertexRow)]
        blocks = [rows[x].rows for x in vstates]
        offsets = np.cumsum([0] + [b.shape[0] for b in blocks])
        stacked = np.vstack(blocks) if blocks else np.zeros((0, k))
        object.__setattr__(self, "_stack", (vstates, offsets, stacked))

    @property
    def size(self) -> int:
        return self.states.size

    @property
    def labels(self) -> tuple[str, ...]:
        return self.states.labels

    def replace_rows(self, updates: Mapping[int, RowCredalSet]) -> "ImpreciseChain":
        rows = list(self.rows)
        for x, r in updates.items():
            rows[x] = r
        return ImpreciseChain(self.states, tuple(rows))


def target_mask(chain: ImpreciseChain, target: Iterable[int]) -> np.ndarray:
    mask = np.zeros(chain.size, dtype=bool)
    for x in target:
        if not 0 <= int(x) < chain.size:
            raise UnknownStateInTarget(f"target index {x} out of range")
        mask[int(x)] = True
    return mask


def validate_chain(states: Sequence, target: Iterable, rows: Sequence) -> tuple[ImpreciseChain, frozenset]:
    """Build a chain and a target set from raw pieces, collecting every violation.

    ``target`` holds state labels. ``rows`` holds one entry per state, either
    a :class:`RowCredalSet` or a spec mapping with ``vertices`` or
    ``intervals``. Nothing is renormalised: any violation raises, and the
    raised error carries the full list in ``violations``.
    """
    space = StateSpace(tuple(states))
    violations: list[ValidationError] = []
    built: list[RowCredalSet] = []
    if len(rows) != space.size:
        raise DimensionMismatch(f"{space.size} states but {len(rows)} rows")
    for label, spec in zip(space.labels, rows):
        try:
            r = RowCredalSet.from_spec(spec)
            if r.size != space.size:
                raise DimensionMismatch(
                    f"row has {r.size} entries, expected {space.size}"
                )
            built.append(r)
        except ValidationError as exc:
            violations.append(type(exc)(f"row {label!r}: {exc}"))
    members = set()
    for label in target:
        try:
            members.add(space.index(label))
        except UnknownStateInTarget:
            violations.append(UnknownStateInTarget(f"target names unknown state {label!r}"))
    if violations:
        first = violations[0]
        raise type(first)(str(first), violations)
    return ImpreciseChain(space, tuple(built)), frozenset(members)


# ---------------------------------------------------------------------------
# operators


def select_extremal_matrix(chain: ImpreciseChain, f, bound: Bound) -> np.ndarray:
    """A compatible transition matrix whose rows attain the lower/upper operator on ``f``.

    Vertex rows pick the lowest-index optimal vertex; interval rows use the
    greedy allocation with ties broken by state index.
    """
    check_bound(bound)
    f = as_ext_vector(f, chain.size)
    k = chain.size
    out = np.empty((k, k))
    vstates, offsets, stacked = chain._stack
    if vstates:
        values = ext_matvec(stacked, f)
        pick = np.argmin if bound == "lower" else np.argmax
        for n, x in enumerate(vstates):
            lo, hi = offsets[n], offsets[n + 1]
            out[x] = stacked[lo + pick(values[lo:hi])]
    for x, r in enumerate(chain.rows):
        if not isinstance(r, VertexRow):
            out[x] = r.extremal(f, bound)
    return out


def lower_transition_apply(chain: ImpreciseChain, f) -> np.ndarray:
    f = as_ext_vector(f, chain.size)
    return ext_matvec(select_extremal_matrix(chain, f, "lower"), f)


def upper_transition_apply(chain: ImpreciseChain, f) -> np.ndarray:
    f = as_ext_vector(f, chain.size)
    return ext_matvec(select_extremal_matrix(chain, f, "upper"), f)


def transition_apply(chain: ImpreciseChain, f, bound: Bound) -> np.ndarray:
    if check_bound(bound) == "lower":
        return lower_transition_apply(chain, f)
    return upper_transition_apply(chain, f)


def power_transition(chain: ImpreciseChain, f, n: int, bound: Bound) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    g = as_ext_vector(f, chain.size)
    for _ in range(n):
        g = transition_apply(chain, g, bound)
    return g


def possible_support(chain: ImpreciseChain, x: int) -> frozenset:
    return frozenset(int(y) for y in np.flatnonzero(chain.rows[x].support()))


def support_graph(chain: ImpreciseChain) -> np.ndarray:
    """Adjacency matrix: ``G[x, y]`` iff some row of ``x`` can move to ``y``."""
    return np.array([r.support() for r in chain.rows])


def backward_closure(adj: np.ndarray, seeds: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Mask of ``seeds`` plus states in ``allowed`` with a path into ``seeds``.

    Intermediate states on the path must also lie in ``allowed``.
    """
    reached = seeds.copy()
    queue = deque(np.flatnonzero(seeds))
    while queue:
        y = queue.popleft()
        for x in np.flatnonzero(adj[:, y] & allowed & ~reached):
            reached[x] = True
            queue.append(x)
    return reached


def backward_distance(adj: np.ndarray, seeds: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Fewest steps from each state into ``seeds`` (``-1`` if unreachable), paths as above."""
    dist = np.full(adj.shape[0], -1)
    dist[seeds] = 0
    queue = deque(np.flatnonzero(seeds))
    while queue:
        y = queue.popleft()
        for x in np.flatnonzero(adj[:, y] & allowed & (dist < 0)):
            dist[x] = dist[y] + 1
            queue.append(x)
    return dist


def contains_matrix(chain: ImpreciseChain, matrix, tol: float = MEMBERSHIP_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (chain.size, chain.size):
        return False
    return all(r.contains(matrix[x], tol) for x, r in enumerate(chain.rows))


def is_transition_matrix(matrix, tol: float = ROW_SUM_TOL) -> bool:
    m = np.asarray(matrix, dtype=float)
    return bool(
        m.ndim == 2
        and m.shape[0] == m.shape[1]
        and (m >= 0).all()
        and (np.abs(m.sum(axis=1) - 1) <= tol).all()
    )
