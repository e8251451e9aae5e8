"""Lower and upper hitting times and probabilities of an imprecise chain.

Two routes are offered. :func:`iterate_hitting_time` and
:func:`iterate_hitting_prob` run the monotone recursions

    h(0) = 1_{A^c},  h(n+1) = 1_{A^c} + 1_{A^c} * T h(n)
    p(0) = 1_A,      p(n+1) = 1_A + 1_{A^c} * T p(n)

with ``T`` the lower or upper transition operator; ``h(n)`` is the lower
(upper) expectation of the hitting time capped at ``n + 1`` and ``p(n)`` that
of visiting the target within ``n`` steps. :func:`solve_exact` instead fixes
the structurally infinite/zero states and runs policy iteration on the rest.

Infinite hitting times are never inferred from growth of the iterates; they
come from :func:`infinite_states_hitting_time`, which is purely structural.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .core import (
    Bound,
    ImpreciseChain,
    as_ext_vector,
    check_bound,
    target_mask,
    transition_apply,
)
from .errors import NotConverged
from .precise import Quantity, ResidualReport, check_quantity, hitting_rhs, residual_report
from .structure import (
    DEFAULT_LAMBDAS,
    LambdaWitness,
    classify_states,
    lambda_witnesses,
    lower_finite_region,
    optimal_matrix,
)

TIME_TOL = 1e-10
PROB_TOL = 1e-12
MAX_ITER = 10**6
EXACT_RESIDUAL_TOL = 1e-10
ROUNDING_FLOOR = np.finfo(float).eps

Reason = Literal["converged", "max_iter", "exact_classified"]


@dataclass
class IterationTrace:
    """Iterates of a recursion with their step sizes and fixed-point residuals.

    ``deltas[n]`` is the max-norm change from iterate ``n - 1`` to ``n`` (the
    zero vector stands in for iterate ``-1``); ``residuals[n]`` is the
    fixed-point residual of iterate ``n``. Both are taken over the states whose
    limit is finite.
    """

    values: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    reason: Reason = "converged"

    def snapshots(self):
        return list(zip(range(len(self.values)), self.deltas, self.residuals))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        return self.values[n]


@dataclass
class HittingResult:
    quantity: Quantity
    bound: Bound
    values: np.ndarray
    trace: IterationTrace
    residual: float
    witness: np.ndarray | LambdaWitness | None = None
    infinite: frozenset = frozenset()


def _step(chain, a, g, quantity, bound):
    return hitting_rhs(a, transition_apply(chain, g, bound), quantity)


def fixed_point_report(chain: ImpreciseChain, target: Iterable[int], g, quantity: Quantity,
                       bound: Bound) -> ResidualReport:
    g = as_ext_vector(g, chain.size)
    a = target_mask(chain, target)
    return residual_report(g, _step(chain, a, g, check_quantity(quantity), check_bound(bound)))


def fixed_point_residual(chain: ImpreciseChain, target: Iterable[int], g, quantity: Quantity,
                         bound: Bound) -> float:
    """Max-norm of ``g - rhs(g)`` over the states where both are finite."""
    return fixed_point_report(chain, target, g, quantity, bound).residual


def recursion_prefix(chain: ImpreciseChain, target: Iterable[int], quantity: Quantity,
                     bound: Bound, n: int) -> list[np.ndarray]:
    """The first ``n + 1`` iterates of the recursion."""
    a = target_mask(chain, target)
    g = (~a if quantity == "time" else a).astype(float)
    out = [g]
    for _ in range(n):
        g = _step(chain, a, g, quantity, bound)
        out.append(g)
    return out


def infinite_states_hitting_time(chain: ImpreciseChain, target: Iterable[int],
                                 bound: Bound) -> frozenset:
    """States whose lower (upper) expected hitting time is ``+inf``.

    Upper: the classes ``B ∪ U``. Lower: the complement of the region where
    some compatible matrix hits the target almost surely.
    """
    target = frozenset(int(x) for x in target)
    if check_bound(bound) == "upper":
        report = classify_states(chain, target)
        return report.B | report.U
    return frozenset(range(chain.size)) - lower_finite_region(chain, target)


def _trivial(chain, a, quantity, bound):
    k = chain.size
    if not a.any():
        values = np.full(k, np.inf) if quantity == "time" else np.zeros(k)
    elif a.all():
        values = np.zeros(k) if quantity == "time" else np.ones(k)
    else:
        return None
    infinite = frozenset(range(k)) if np.isinf(values).any() else frozenset()
    trace = IterationTrace([values], [0.0], [0.0], "exact_classified")
    return HittingResult(quantity, bound, values, trace, 0.0, None, infinite)


def _settled(deltas, tol, live_values) -> bool:
    """Step below ``tol`` and geometric tail estimate below ``tol`` too.

    With contraction estimate ``r`` the remaining distance to the limit is
    about ``d r / (1 - r)``, which a bare step test ignores on slowly mixing
    chains. ``r`` is a geometric mean over the second half of the history, so
    rounding noise in single steps does not fool it. Steps at rounding level
    always stop.
    """
    n = len(deltas) - 1
    d = deltas[-1]
    scale = max(1.0, float(np.max(live_values, initial=0.0)))
    if d <= ROUNDING_FLOOR * scale:
        return True
    m = max(1, n // 2)
    old = deltas[-1 - m]
    if old <= 0:
        return True
    rate = (d / old) ** (1.0 / m)
    return rate < 1 and d * rate / (1 - rate) < tol


def _iterate(chain, target, quantity, bound, tol, max_iter, infinite):
    a = target_mask(chain, target)
    live = np.ones(chain.size, dtype=bool)
    live[list(infinite)] = False

    def dist(u, v):
        return float(np.max(np.abs(u[live] - v[live]), initial=0.0))

    g = (~a if quantity == "time" else a).astype(float)
    trace = IterationTrace([g], [dist(g, np.zeros_like(g))], [], "converged")
    for _ in range(max_iter):
        # the recursion is monotone; max() only absorbs rounding in the greedy sums
        nxt = np.maximum(_step(chain, a, g, quantity, bound), g)
        d = dist(nxt, g)
        trace.residuals.append(d)
        trace.values.append(nxt)
        trace.deltas.append(d)
        g = nxt
        if d < tol and _settled(trace.deltas, tol, g[live]):
            break
    else:
        trace.reason = "max_iter"
        raise NotConverged(
            f"{bound} hitting {quantity}: delta {trace.deltas[-1]:.3g} after {max_iter} iterations"
        )
    values = g.copy()
    values[~live] = np.inf
    residual = fixed_point_residual(chain, target, values, quantity, bound)
    trace.residuals.append(dist(_step(chain, a, g, quantity, bound), g))
    return HittingResult(quantity, bound, values, trace, residual, None, frozenset(infinite))


def iterate_hitting_time(chain: ImpreciseChain, target: Iterable[int], bound: Bound = "lower",
                         tol: float = TIME_TOL, max_iter: int = MAX_ITER) -> HittingResult:
    """Lower or upper expected hitting times by value iteration.

    The trace holds the plain recursion, whose ``n``-th iterate is the
    expectation of the hitting time capped at ``n + 1``. States classified as
    infinite grow without bound there; they are left out of the stopping rule
    and reported as ``+inf``.
    """
    check_bound(bound)
    target = frozenset(int(x) for x in target)
    if tol <= 0:
        raise ValueError("tol must be positive")
    trivial = _trivial(chain, target_mask(chain, target), "time", bound)
    if trivial is not None:
        return trivial
    infinite = infinite_states_hitting_time(chain, target, bound)
    return _iterate(chain, target, "time", bound, tol, max_iter, infinite)


def iterate_hitting_prob(chain: ImpreciseChain, target: Iterable[int], bound: Bound = "lower",
                         tol: float = PROB_TOL, max_iter: int = MAX_ITER) -> HittingResult:
    """Lower or upper hitting probabilities by value iteration.

    No convergence rate is known for the upper probability in general; the
    stopping rule is a plain step-size test.
    """
    check_bound(bound)
    target = frozenset(int(x) for x in target)
    if tol <= 0:
        raise ValueError("tol must be positive")
    trivial = _trivial(chain, target_mask(chain, target), "prob", bound)
    if trivial is not None:
        return trivial
    return _iterate(chain, target, "prob", bound, tol, max_iter, frozenset())


def solve_exact(chain: ImpreciseChain, target: Iterable[int], quantity: Quantity,
                bound: Bound, lambda_schedule=DEFAULT_LAMBDAS) -> HittingResult:
    """Exact bound via structural pinning and policy iteration.

    The witness is a compatible matrix attaining the bound, except for the
    upper hitting probability, where it is a :class:`LambdaWitness`.
    """
    check_quantity(quantity)
    check_bound(bound)
    target = frozenset(int(x) for x in target)
    a = target_mask(chain, target)
    trivial = _trivial(chain, a, quantity, bound)
    if trivial is not None:
        return trivial
    report = classify_states(chain, target)
    values, matrix = optimal_matrix(chain, target, quantity, bound, report)
    rep = fixed_point_report(chain, target, values, quantity, bound)
    finite = np.isfinite(values)
    scale = max(1.0, float(np.max(values[finite], initial=0.0)))
    if not rep.consistent or rep.residual > EXACT_RESIDUAL_TOL * scale:
        raise NotConverged(
            f"exact {bound} hitting {quantity} fails its fixed-point check "
            f"(residual {rep.residual:.3g})"
        )
    if quantity == "prob" and bound == "upper":
        witness = lambda_witnesses(chain, target, lambda_schedule)
    else:
        witness = matrix
    trace = IterationTrace([values], [0.0], [rep.residual], "exact_classified")
    infinite = frozenset(np.flatnonzero(np.isinf(values)).tolist())
    return HittingResult(quantity, bound, values, trace, rep.residual, witness, infinite)


def solve(chain, target, quantity: Quantity, bound: Bound, exact: bool = False,
          tol: float | None = None, max_iter: int = MAX_ITER) -> HittingResult:
    if exact:
        return solve_exact(chain, target, quantity, bound)
    if check_quantity(quantity) == "time":
        return iterate_hitting_time(chain, target, bound, tol or TIME_TOL, max_iter)
    return iterate_hitting_prob(chain, target, bound, tol or PROB_TOL, max_iter)


def _fmt(x: float) -> str:
    return "inf" if np.isinf(x) else format(float(x), ".17g")


def emit_trace(trace: IterationTrace, path, labels=None) -> None:
    """Write the trace as CSV: one row per (iteration, state).

    ``delta`` and ``residual`` are the per-iteration figures from the trace,
    repeated on each state's row.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "state", "value", "delta", "residual"])
        for n, g in enumerate(trace.values):
            delta = trace.deltas[n] if n < len(trace.deltas) else float("nan")
            res = trace.residuals[n] if n < len(trace.residuals) else float("nan")
            for x, value in enumerate(g):
                name = labels[x] if labels is not None else x
                writer.writerow([n, name, _fmt(value), _fmt(delta), _fmt(res)])
