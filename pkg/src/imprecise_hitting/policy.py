"""Policy iteration over compatible transition matrices.

Each round evaluates the current matrix exactly with the precise solver and
then switches a row only where the greedy row is strictly better. Keeping a
row on ties matters: for upper hitting probabilities a tied switch can close
off a set of states that never reaches the target, and the evaluation would
then drop to the wrong (smaller) fixed point.
"""

from __future__ import annotations

import numpy as np

from .core import Bound, ImpreciseChain, ext_matvec, select_extremal_matrix
from .errors import PolicyCycle
from .precise import Quantity, precise_solve

IMPROVEMENT_TOL = 1e-12


def improve_policy(
    chain: ImpreciseChain,
    target: frozenset,
    quantity: Quantity,
    bound: Bound,
    matrix: np.ndarray,
    frozen: np.ndarray,
    max_rounds: int = 10_000,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Improve ``matrix`` on the rows not marked ``frozen``.

    Returns ``(values, matrix, rounds)`` where ``values`` is the precise
    solution of the final matrix.
    """
    matrix = np.array(matrix, dtype=float)
    frozen = frozen.copy()
    frozen[list(target)] = True
    for rounds in range(max_rounds):
        values = precise_solve(matrix, target, quantity).values
        candidate = select_extremal_matrix(chain, values, bound)
        current = ext_matvec(matrix, values)
        proposed = ext_matvec(candidate, values)
        scale = np.where(np.isfinite(current), np.maximum(1.0, np.abs(current)), 1.0)
        slack = IMPROVEMENT_TOL * scale
        if bound == "lower":
            better = proposed < current - slack
        else:
            better = proposed > current + slack
        better &= ~frozen
        if not better.any():
            return values, matrix, rounds
        matrix[better] = candidate[better]
    raise PolicyCycle(f"no stable policy after {max_rounds} rounds")
