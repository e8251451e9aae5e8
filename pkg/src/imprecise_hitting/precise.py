"""Hitting probabilities and expected hitting times of one transition matrix.

Both quantities are the minimal non-negative solutions of their linear
fixed-point systems. Minimality is enforced by construction: states that
cannot reach the target get probability 0, states that escape the target
with positive probability get hitting time ``+inf``, and the linear system is
only solved on what is left, where it is non-singular.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
import scipy.linalg

from .core import as_ext_vector, backward_closure, ext_matvec
from .errors import DimensionMismatch, SingularSystem

Quantity = Literal["time", "prob"]

PIVOT_TOL = 1e-12


def check_quantity(quantity: str) -> str:
    if quantity not in ("time", "prob"):
        raise ValueError(f"quantity must be 'time' or 'prob', got {quantity!r}")
    return quantity


@dataclass(frozen=True)
class PreciseSolution:
    values: np.ndarray
    target: frozenset
    pinned: frozenset  # states fixed to 0 (prob) or +inf (time) by graph analysis
    interior: frozenset  # states obtained from the linear solve
    residual: float


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    consistent: bool  # rhs infinite exactly where the candidate is


def _as_matrix(T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got shape {T.shape}")
    return T


def _mask(k: int, states: Iterable[int]) -> np.ndarray:
    m = np.zeros(k, dtype=bool)
    m[list(states)] = True
    return m


def cannot_reach_set(T, target: Iterable[int]) -> frozenset:
    T = _as_matrix(T)
    k = T.shape[0]
    a = _mask(k, target)
    reach = backward_closure(T > 0, a, np.ones(k, dtype=bool))
    return frozenset(int(x) for x in np.flatnonzero(~reach))


def _solve(S: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(I - S) x = b`` by partially pivoted LU."""
    if S.size == 0:
        return np.zeros(0)
    lu, piv = scipy.linalg.lu_factor(np.eye(S.shape[0]) - S, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystem("hitting system is singular on the solved block")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def precise_hitting_prob(T, target: Iterable[int]) -> PreciseSolution:
    T = _as_matrix(T)
    k = T.shape[0]
    target = frozenset(int(x) for x in target)
    a = _mask(k, target)
    zero = _mask(k, cannot_reach_set(T, target))
    rest = ~a & ~zero
    p = np.zeros(k)
    p[a] = 1.0
    idx = np.flatnonzero(rest)
    p[idx] = _solve(T[np.ix_(idx, idx)], T[np.ix_(idx, np.flatnonzero(a))].sum(axis=1))
    p = np.clip(p, 0.0, 1.0)
    residual = check_minimal_solution(T, target, p, "prob").residual
    return PreciseSolution(p, target, frozenset(np.flatnonzero(zero).tolist()),
                           frozenset(idx.tolist()), residual)


def escape_set(T, target: Iterable[int]) -> frozenset:
    """States outside the target that avoid it forever with positive probability."""
    T = _as_matrix(T)
    k = T.shape[0]
    a = _mask(k, target)
    zero = _mask(k, cannot_reach_set(T, target))
    esc = backward_closure(T > 0, zero, ~a)
    return frozenset(int(x) for x in np.flatnonzero(esc))


def precise_hitting_time(T, target: Iterable[int]) -> PreciseSolution:
    T = _as_matrix(T)
    k = T.shape[0]
    target = frozenset(int(x) for x in target)
    a = _mask(k, target)
    inf = _mask(k, escape_set(T, target))
    rest = ~a & ~inf
    h = np.zeros(k)
    h[inf] = np.inf
    idx = np.flatnonzero(rest)
    h[idx] = _solve(T[np.ix_(idx, idx)], np.ones(idx.size))
    residual = check_minimal_solution(T, target, h, "time").residual
    return PreciseSolution(h, target, frozenset(np.flatnonzero(inf).tolist()),
                           frozenset(idx.tolist()), residual)


def precise_solve(T, target: Iterable[int], quantity: Quantity) -> PreciseSolution:
    if check_quantity(quantity) == "time":
        return precise_hitting_time(T, target)
    return precise_hitting_prob(T, target)


def hitting_rhs(target_mask: np.ndarray, applied: np.ndarray, quantity: Quantity) -> np.ndarray:
    """Right-hand side ``1_{A^c} + 1_{A^c} * Tg`` (time) or ``1_A + 1_{A^c} * Tg`` (prob)."""
    out = np.where(target_mask, 0.0, applied)
    if quantity == "time":
        out[~target_mask] += 1.0
    else:
        out[target_mask] = 1.0
    return out


def residual_report(candidate: np.ndarray, rhs: np.ndarray) -> ResidualReport:
    cand_inf = np.isinf(candidate)
    rhs_inf = np.isinf(rhs)
    finite = ~cand_inf & ~rhs_inf
    res = float(np.max(np.abs(candidate[finite] - rhs[finite]), initial=0.0))
    return ResidualReport(res, bool((cand_inf == rhs_inf).all()))


def check_minimal_solution(T, target: Iterable[int], candidate, quantity: Quantity) -> ResidualReport:
    T = _as_matrix(T)
    k = T.shape[0]
    g = as_ext_vector(candidate, k)
    a = _mask(k, target)
    rhs = hitting_rhs(a, ext_matvec(T, g), check_quantity(quantity))
    return residual_report(g, rhs)
