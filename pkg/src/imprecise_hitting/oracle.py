"""Independent checks of the library values.

Three oracles, none of which touches the iteration or policy code paths:

* :func:`brute_force_envelope` solves every vertex chain (one extreme row per
  state) with the precise solver and takes the pointwise min/max;
* :func:`backward_induction_truncated` recurses over the full history tree,
  optimizing a vertex row at every history;
* :func:`monte_carlo_envelope_check` simulates a randomly drawn
  history-dependent compatible process.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core import (
    Bound,
    ImpreciseChain,
    StateSpace,
    VertexRow,
    check_bound,
    row_vertices,
    target_mask,
)
from .errors import PreconditionError, TreeTooLarge, VertexExplosion
from .iteration import recursion_prefix, solve_exact
from .precise import Quantity, check_quantity, precise_solve

ENUMERATION_CAP = 10**5
AGREEMENT_TOL = 1e-8
MAX_TREE_DEPTH = 20
TREE_BUDGET = 2 * 10**6


def worker_count() -> int:
    """Thread count from ``IMC_THREADS``; unset means serial, 0 means auto."""
    raw = os.environ.get("IMC_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    n = int(raw)
    return (os.cpu_count() or 1) if n <= 0 else n


def _vertex_lists(chain: ImpreciseChain, cap: int) -> list[np.ndarray]:
    verts = [row_vertices(r) for r in chain.rows]
    count = math.prod(len(v) for v in verts)
    if count > cap:
        raise VertexExplosion(f"{count} vertex chains exceed the cap of {cap}")
    return verts


def enumerate_vertex_chains(chain: ImpreciseChain, cap: int = ENUMERATION_CAP) -> Iterator[np.ndarray]:
    """All matrices picking one vertex per row, in lexicographic order."""
    verts = _vertex_lists(chain, cap)
    for pick in itertools.product(*(range(len(v)) for v in verts)):
        yield np.array([verts[x][i] for x, i in enumerate(pick)])


def agree(u, v, tol: float = AGREEMENT_TOL) -> bool:
    """Equal ``+inf`` patterns and finite entries within ``tol``."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    iu, iv = np.isinf(u), np.isinf(v)
    if not np.array_equal(iu, iv):
        return False
    return bool(np.all(np.abs(u[~iu] - v[~iu]) <= tol))


@dataclass
class EnvelopeReport:
    """Oracle extremes, the matching library values and agreement flags.

    ``brute`` maps ``min_time``/``max_time``/``min_prob``/``max_prob`` to value
    vectors, ``witnesses`` maps the same keys to per-state attaining matrices
    (``witnesses[key][x]`` attains the extreme at ``x``). ``monte_carlo`` holds
    the simulation summary when the report comes from the sampler.
    """

    labels: tuple
    brute: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    library: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    monte_carlo: dict | None = None
    chains_checked: int = 0

    @property
    def ok(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        from .modelio import encode

        doc = {
            "labels": list(self.labels),
            "chains_checked": self.chains_checked,
            "brute": {k: encode(v) for k, v in self.brute.items()},
            "witnesses": {k: [encode(m) for m in ms] for k, ms in self.witnesses.items()},
            "library": {k: encode(v) for k, v in self.library.items()},
            "flags": dict(self.flags),
        }
        if self.monte_carlo is not None:
            doc["monte_carlo"] = encode(self.monte_carlo)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _solve_pair(args):
    matrix, target = args
    return (precise_solve(matrix, target, "time").values,
            precise_solve(matrix, target, "prob").values)


def brute_force_envelope(chain: ImpreciseChain, target: Iterable[int],
                         cap: int = ENUMERATION_CAP, tol: float = AGREEMENT_TOL) -> EnvelopeReport:
    """Envelope over the vertex chains, compared with :func:`solve_exact`.

    Flags ``min_time``, ``max_time`` and ``min_prob`` demand equality within
    ``tol``; ``max_prob`` only checks that no vertex chain exceeds the upper
    probability, since that supremum need not be attained.
    """
    target = frozenset(int(x) for x in target)
    matrices = list(enumerate_vertex_chains(chain, cap))
    jobs = [(m, target) for m in matrices]
    threads = worker_count()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_solve_pair, jobs))
    else:
        results = [_solve_pair(j) for j in jobs]
    times = np.array([r[0] for r in results])
    probs = np.array([r[1] for r in results])
    k = chain.size
    brute, witnesses = {}, {}
    for key, table, pick in (("min_time", times, np.argmin), ("max_time", times, np.argmax),
                             ("min_prob", probs, np.argmin), ("max_prob", probs, np.argmax)):
        idx = pick(table, axis=0)
        brute[key] = table[idx, np.arange(k)]
        witnesses[key] = [matrices[i] for i in idx]
    library = {
        "lower_time": solve_exact(chain, target, "time", "lower").values,
        "upper_time": solve_exact(chain, target, "time", "upper").values,
        "lower_prob": solve_exact(chain, target, "prob", "lower").values,
        "upper_prob": solve_exact(chain, target, "prob", "upper").values,
    }
    flags = {
        "min_time": agree(brute["min_time"], library["lower_time"], tol),
        "max_time": agree(brute["max_time"], library["upper_time"], tol),
        "min_prob": agree(brute["min_prob"], library["lower_prob"], tol),
        "max_prob": bool(np.all(brute["max_prob"] <= library["upper_prob"] + tol)),
    }
    return EnvelopeReport(chain.labels, brute, witnesses, library, flags,
                          chains_checked=len(matrices))


def backward_induction_truncated(chain: ImpreciseChain, target: Iterable[int], n: int,
                                 bound: Bound, quantity: Quantity,
                                 budget: int = TREE_BUDGET) -> np.ndarray:
    """Optimal truncated value over history-dependent vertex choices.

    For ``quantity="time"`` this is the lower/upper expectation of
    ``min(hitting time, n + 1)``; for ``"prob"`` of the indicator of visiting
    the target among the first ``n + 1`` states. The recursion walks the
    whole depth-``n`` history tree and never memoizes on the current state.
    """
    bound = check_bound(bound)
    quantity = check_quantity(quantity)
    if n < 0:
        raise PreconditionError("n must be non-negative")
    if n > MAX_TREE_DEPTH:
        raise TreeTooLarge(f"depth {n} exceeds {MAX_TREE_DEPTH}")
    k = chain.size
    if k ** (n + 1) > budget:
        raise TreeTooLarge(f"history tree with {k}**{n + 1} leaves exceeds budget {budget}")
    a = target_mask(chain, target)
    verts = [row_vertices(r) for r in chain.rows]
    choose = min if bound == "lower" else max

    def value(history: tuple, remaining: int) -> float:
        x = history[-1]
        if a[x]:
            return 1.0 if quantity == "prob" else 0.0
        stay = 0.0 if quantity == "prob" else 1.0
        if remaining == 0:
            return stay
        children = {y: value(history + (y,), remaining - 1)
                    for y in range(k) if any(v[y] > 0 for v in verts[x])}
        best = choose(sum(v[y] * c for y, c in children.items() if v[y] > 0)
                      for v in verts[x])
        return stay + best

    return np.array([value((x,), n) for x in range(k)])


def _simulate(verts, a, start, horizon, samples, rng):
    """Truncated hitting time and visit indicator for ``samples`` paths."""
    k = len(verts)
    state = np.full(samples, start)
    hit = np.full(samples, horizon + 1)
    hit[a[state]] = 0
    alive = hit > horizon
    for t in range(1, horizon + 1):
        nxt = state.copy()
        for x in range(k):
            sel = np.flatnonzero(alive & (state == x))
            if sel.size == 0:
                continue
            v = verts[x]
            weights = rng.dirichlet(np.ones(len(v)), size=sel.size)
            rows = weights @ v
            cdf = np.cumsum(rows, axis=1)
            u = rng.random(sel.size) * cdf[:, -1]
            nxt[sel] = np.minimum((cdf <= u[:, None]).sum(axis=1), k - 1)
        state = nxt
        newly = alive & a[state]
        hit[newly] = t
        alive &= ~newly
    return hit.astype(float), (hit <= horizon).astype(float)


def monte_carlo_envelope_check(chain: ImpreciseChain, target: Iterable[int], horizon: int = 10,
                               samples: int = 100_000, seed: int = 0,
                               policy: str = "random-compatible") -> EnvelopeReport:
    """Sample a random history-dependent compatible process from every state.

    At each step of each path the next row is a fresh Dirichlet mixture of the
    current state's vertices. The empirical means of the truncated hitting
    time and visit indicator must lie in the iteration envelope at
    ``horizon``, widened by three standard errors.
    """
    if policy != "random-compatible":
        raise PreconditionError(f"unknown sampling policy {policy!r}")
    if horizon < 1:
        raise PreconditionError("horizon must be at least 1")
    if samples < 1:
        raise PreconditionError("samples must be at least 1")
    target = frozenset(int(x) for x in target)
    a = target_mask(chain, target)
    verts = [row_vertices(r) for r in chain.rows]
    rng = np.random.default_rng(seed)
    envelope = {
        (q, b): recursion_prefix(chain, target, q, b, horizon)[horizon]
        for q in ("time", "prob") for b in ("lower", "upper")
    }
    summary = {"horizon": horizon, "samples": samples, "seed": seed, "policy": policy}
    stats = {q: {"mean": [], "stderr": [], "violations": []} for q in ("time", "prob")}
    for x in range(chain.size):
        times, visits = _simulate(verts, a, x, horizon, samples, rng)
        for q, data in (("time", times), ("prob", visits)):
            mean = float(data.mean())
            se = float(data.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
            lo = envelope[(q, "lower")][x] - 3 * se - 1e-12
            hi = envelope[(q, "upper")][x] + 3 * se + 1e-12
            stats[q]["mean"].append(mean)
            stats[q]["stderr"].append(se)
            if not lo <= mean <= hi:
                stats[q]["violations"].append(chain.labels[x])
    flags = {}
    for q in ("time", "prob"):
        stats[q]["lower"] = envelope[(q, "lower")]
        stats[q]["upper"] = envelope[(q, "upper")]
        summary[q] = stats[q]
        flags[f"mc_{q}"] = not stats[q]["violations"]
    return EnvelopeReport(chain.labels, flags=flags, monte_carlo=summary)


def random_chain(seed: int, k: int | None = None, max_vertices: int = 3,
                 density: float = 0.6) -> tuple[ImpreciseChain, frozenset]:
    """A seeded random vertex-row chain and target set.

    Each state gets 1 to ``max_vertices`` vertices. A vertex draws a random
    support (each state kept with probability ``density``) and spreads mass on
    it by normalized exponentials; sparse supports make traps and unreachable
    states common.
    """
    rng = np.random.default_rng(seed)
    if k is None:
        k = int(rng.integers(2, 5))
    rows = []
    for _ in range(k):
        m = int(rng.integers(1, max_vertices + 1))
        vs = []
        for _ in range(m):
            support = rng.random(k) < density
            if not support.any():
                support[rng.integers(k)] = True
            w = np.where(support, rng.exponential(size=k), 0.0)
            vs.append(w / w.sum())
        rows.append(VertexRow(vs))
    size = int(rng.integers(1, k)) if k > 1 else 1
    target = frozenset(int(i) for i in rng.choice(k, size=size, replace=False))
    return ImpreciseChain(StateSpace(tuple(str(i) for i in range(k))), tuple(rows)), target


def random_corpus(count: int = 200, seed: int = 0, max_states: int = 4,
                  max_vertices: int = 3) -> list[tuple[ImpreciseChain, frozenset]]:
    """``count`` random chains with seeds ``seed, seed + 1, ...``."""
    out = []
    for i in range(count):
        k = int(np.random.default_rng([seed, i]).integers(2, max_states + 1))
        out.append(random_chain(seed + i, k, max_vertices))
    return out


def write_corpus(directory, count: int = 200, seed: int = 0) -> list[Path]:
    """Write a random corpus as model files ``chain-<seed>.json``."""
    from .modelio import write_model

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, (chain, target) in enumerate(random_corpus(count, seed)):
        path = directory / f"chain-{seed + i:05d}.json"
        write_model(path, chain, target)
        paths.append(path)
    return paths
