"""State classifications and witness constructions for hitting problems.

For hitting times the state space splits into three classes, computed on the
A-inert modification (target states made absorbing):

* ``B``: states outside the target that reach it with lower probability zero
  at every horizon;
* ``U``: other non-target states that can reach ``B``;
* ``Z``: everything else, target included.

The upper expected hitting time is infinite exactly on ``B ∪ U``. For hitting
probabilities, ``C`` collects the non-target states that cannot reach the
target at all, which is where the upper hitting probability vanishes.

The upper hitting probability need not be attained by a single compatible
matrix in general, so its witness comes from perturbed sets
``{lam * T + (1 - lam) * V : V compatible}`` around a base matrix ``T`` that
reaches the target from every state outside ``C``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    Bound,
    ImpreciseChain,
    VertexRow,
    backward_closure,
    backward_distance,
    check_bound,
    contains_matrix,
    select_extremal_matrix,
    support_graph,
    target_mask,
    transition_apply,
)
from .errors import LambdaOutOfRange, WitnessVerificationFailed
from .policy import improve_policy
from .precise import Quantity, check_quantity, hitting_rhs, precise_solve, residual_report

DEFAULT_LAMBDAS = tuple(2.0 ** -i for i in range(1, 21))


@dataclass(frozen=True)
class ClassificationReport:
    B: frozenset
    U: frozenset
    Z: frozenset
    C: frozenset
    lower_finite_region: frozenset
    computed_on: str = "A-inert modification"

    def to_dict(self, labels: Sequence[str]) -> dict:
        def names(s):
            return [labels[i] for i in sorted(s)]

        return {
            "B": names(self.B),
            "U": names(self.U),
            "Z": names(self.Z),
            "C": names(self.C),
            "lower_finite_region": names(self.lower_finite_region),
            "computed_on": self.computed_on,
        }

    def to_json(self, labels: Sequence[str]) -> str:
        return json.dumps(self.to_dict(labels), sort_keys=True)


@dataclass(frozen=True)
class LambdaWitness:
    lam: float
    matrix: np.ndarray
    achieved: np.ndarray
    # (lam, achieved) for every schedule point, in schedule order
    sequence: tuple = field(default=(), repr=False)
    # witness matrix for every schedule point, in schedule order
    matrices: tuple = field(default=(), repr=False)


def _frozen(mask: np.ndarray) -> frozenset:
    return frozenset(int(x) for x in np.flatnonzero(mask))


def a_inert_modification(chain: ImpreciseChain, target: Iterable[int]) -> ImpreciseChain:
    k = chain.size
    return chain.replace_rows({x: VertexRow(np.eye(k)[x]) for x in sorted(set(target))})


def zero_lower_reach(chain: ImpreciseChain, target: Iterable[int]) -> frozenset:
    """The set ``B``: where ``T_low^n 1_A`` stays zero for every ``n`` on the inert chain.

    Only the zero pattern of ``T_low^n 1_A`` matters, and on an inert chain it
    shrinks monotonically, so at most ``k`` sweeps are needed.
    """
    inert = a_inert_modification(chain, target)
    positive = target_mask(chain, target)
    for _ in range(chain.size + 1):
        nxt = positive.copy()
        for x in np.flatnonzero(~positive):
            if inert.rows[x].lower_positive(positive):
                nxt[x] = True
        if (nxt == positive).all():
            break
        positive = nxt
    return _frozen(~positive)


def _attractor(chain: ImpreciseChain, inside: np.ndarray, a: np.ndarray):
    """Grow ``a`` by states having a row inside ``inside`` that hits the grown set.

    Returns the final set and, for each added state, the row that admitted it.
    """
    reached = a & inside
    rows = {}
    changed = True
    while changed:
        changed = False
        for x in np.flatnonzero(inside & ~reached):
            row = chain.rows[x].row_within(inside, reached)
            if row is not None:
                reached[x] = True
                rows[int(x)] = row
                changed = True
    return reached, rows


def lower_finite_region(chain: ImpreciseChain, target: Iterable[int]) -> frozenset:
    """States from which some compatible matrix hits the target with probability one.

    Standard almost-sure reachability: shrink a candidate region until every
    state in it has a row that stays in the region and moves closer to the
    target.
    """
    a = target_mask(chain, target)
    region = np.ones(chain.size, dtype=bool)
    while True:
        reached, _ = _attractor(chain, region, a)
        if (reached == region).all():
            return _frozen(region)
        region = reached


def classify_states(chain: ImpreciseChain, target: Iterable[int]) -> ClassificationReport:
    target = frozenset(int(x) for x in target)
    a = target_mask(chain, target)
    k = chain.size
    b = np.zeros(k, dtype=bool)
    b[list(zero_lower_reach(chain, target))] = True
    inert_graph = support_graph(a_inert_modification(chain, target))
    u = backward_closure(inert_graph, b, ~a) & ~b
    z = ~(b | u)
    c = ~backward_closure(support_graph(chain), a, np.ones(k, dtype=bool))
    return ClassificationReport(
        B=_frozen(b),
        U=_frozen(u),
        Z=_frozen(z),
        C=_frozen(c),
        lower_finite_region=lower_finite_region(chain, target),
    )


def _layered_rows(chain: ImpreciseChain, graph: np.ndarray, goal: np.ndarray,
                  allowed: np.ndarray) -> dict:
    """Rows moving every state one BFS layer closer to ``goal``.

    A state at distance ``d`` maximises its mass on the layer at distance
    ``d - 1``, which is positive by definition of the distance.
    """
    dist = backward_distance(graph, goal, allowed)
    rows = {}
    for d in range(1, int(dist.max(initial=0)) + 1):
        layer = (dist == d - 1).astype(float)
        sel = select_extremal_matrix(chain, layer, "upper")
        for x in np.flatnonzero(dist == d):
            rows[int(x)] = sel[x]
    return rows


def build_lambda_base(chain: ImpreciseChain, target: Iterable[int]) -> np.ndarray:
    """A compatible matrix reaching the target with positive probability from outside ``C``.

    Each state at minimal horizon ``n`` puts maximal mass on the states at
    horizon ``n - 1``; target and ``C`` rows are left at the default row.
    """
    a = target_mask(chain, target)
    base = select_extremal_matrix(chain, np.zeros(chain.size), "lower")
    rows = _layered_rows(chain, support_graph(chain), a, ~a)
    for x, r in rows.items():
        base[x] = r
    return base


def lambda_chain(chain: ImpreciseChain, base, lam: float) -> ImpreciseChain:
    if not 0.0 < lam < 1.0:
        raise LambdaOutOfRange(f"lambda must lie in (0, 1), got {lam!r}")
    base = np.asarray(base, dtype=float)
    return chain.replace_rows({x: r.mix(base[x], lam) for x, r in enumerate(chain.rows)})


def _upper_time_rows(chain: ImpreciseChain, a: np.ndarray, report: ClassificationReport) -> dict:
    """Rows for ``B`` (stay in ``B``) and ``U`` (move toward ``B``)."""
    k = chain.size
    b = np.zeros(k, dtype=bool)
    b[list(report.B)] = True
    rows = {}
    if b.any():
        stay = select_extremal_matrix(chain, b.astype(float), "upper")
        rows.update({int(x): stay[x] for x in np.flatnonzero(b)})
        inert_graph = support_graph(a_inert_modification(chain, _frozen(a)))
        rows.update(_layered_rows(chain, inert_graph, b, ~a))
    return rows


def optimal_matrix(chain: ImpreciseChain, target: Iterable[int], quantity: Quantity,
                   bound: Bound, report: ClassificationReport | None = None):
    """Exact bound values with the final policy-iteration matrix.

    Structural classes are fixed first; policy iteration only moves rows of
    states whose value is finite and not pinned.
    """
    check_quantity(quantity)
    check_bound(bound)
    target = frozenset(int(x) for x in target)
    a = target_mask(chain, target)
    k = chain.size
    report = report or classify_states(chain, target)
    matrix = select_extremal_matrix(chain, np.zeros(k), "lower")
    if quantity == "time" and bound == "lower":
        region = np.zeros(k, dtype=bool)
        region[list(report.lower_finite_region)] = True
        _, rows = _attractor(chain, region, a)
        frozen = ~region
    elif quantity == "time":
        z = np.zeros(k, dtype=bool)
        z[list(report.Z)] = True
        matrix[z] = select_extremal_matrix(chain, (~a).astype(float), "upper")[z]
        rows = _upper_time_rows(chain, a, report)
        frozen = ~z
    elif bound == "lower":
        b = np.zeros(k, dtype=bool)
        b[list(report.B)] = True
        matrix = select_extremal_matrix(chain, a.astype(float), "lower")
        stay = select_extremal_matrix(chain, b.astype(float), "upper")
        rows = {int(x): stay[x] for x in np.flatnonzero(b)}
        frozen = b
    else:
        matrix = build_lambda_base(chain, target)
        rows = {}
        frozen = np.zeros(k, dtype=bool)
        frozen[list(report.C)] = True
    for x, r in rows.items():
        matrix[x] = r
    values, matrix, _ = improve_policy(chain, target, quantity, bound, matrix, frozen)
    return values, matrix


def lambda_witnesses(chain: ImpreciseChain, target: Iterable[int],
                     schedule: Sequence[float] = DEFAULT_LAMBDAS) -> LambdaWitness:
    """Exact upper hitting probabilities of the perturbed sets along ``schedule``.

    Every matrix in a perturbed set is compatible with ``chain``, so each
    achieved vector is a certified lower bound on the upper hitting
    probability.
    """
    target = frozenset(int(x) for x in target)
    if not schedule:
        raise LambdaOutOfRange("lambda schedule is empty")
    report = classify_states(chain, target)
    base = build_lambda_base(chain, target)
    frozen = np.zeros(chain.size, dtype=bool)
    frozen[list(report.C)] = True
    sequence, matrices = [], []
    last = None
    for lam in schedule:
        perturbed = lambda_chain(chain, base, lam)
        values, matrix, _ = improve_policy(perturbed, target, "prob", "upper", base, frozen)
        if not (contains_matrix(perturbed, matrix) and contains_matrix(chain, matrix)):
            raise WitnessVerificationFailed(f"lambda={lam}: witness leaves the credal set")
        sequence.append((float(lam), values))
        matrices.append(matrix)
        last = (float(lam), matrix, values)
    return LambdaWitness(last[0], last[1], last[2], tuple(sequence), tuple(matrices))


def _verify(chain, target, quantity, bound, values, matrix, infinite):
    a = target_mask(chain, target)
    if not contains_matrix(chain, matrix):
        raise WitnessVerificationFailed("witness matrix is not compatible with the chain")
    solved = precise_solve(matrix, target, quantity).values
    if not np.array_equal(np.isinf(solved), np.isinf(values)):
        raise WitnessVerificationFailed("witness infinite pattern differs from the bound")
    fin = np.isfinite(solved)
    if fin.any() and np.max(np.abs(solved[fin] - values[fin])) > 1e-8:
        raise WitnessVerificationFailed("witness values differ from the bound")
    rhs = hitting_rhs(a, transition_apply(chain, values, bound), quantity)
    rep = residual_report(values, rhs)
    scale = max(1.0, float(np.max(np.abs(values[fin]), initial=0.0)))
    if not rep.consistent or rep.residual > 1e-10 * scale:
        raise WitnessVerificationFailed(
            f"bound fails its fixed-point equation (residual {rep.residual:.3g})"
        )
    if infinite is not None:
        expected = np.zeros(chain.size, dtype=bool)
        expected[list(infinite)] = True
        if quantity == "time" and not np.array_equal(np.isinf(values), expected):
            raise WitnessVerificationFailed("infinite states disagree with the classification")


def extract_witness(chain: ImpreciseChain, target: Iterable[int], quantity: Quantity,
                    bound: Bound, lambda_schedule: Sequence[float] | None = None):
    """A compatible matrix attaining the bound, or a lambda witness for the upper probability."""
    check_quantity(quantity)
    check_bound(bound)
    target = frozenset(int(x) for x in target)
    if quantity == "prob" and bound == "upper":
        return lambda_witnesses(chain, target, lambda_schedule or DEFAULT_LAMBDAS)
    report = classify_states(chain, target)
    values, matrix = optimal_matrix(chain, target, quantity, bound, report)
    if quantity == "time":
        infinite = set(report.B | report.U) if bound == "upper" else (
            set(range(chain.size)) - set(report.lower_finite_region))
    else:
        infinite = None
    _verify(chain, target, quantity, bound, values, matrix, infinite)
    return matrix
