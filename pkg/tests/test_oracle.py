import json

import numpy as np
import pytest

from imprecise_hitting.core import ImpreciseChain, StateSpace, VertexRow
from imprecise_hitting.errors import PreconditionError, TreeTooLarge, VertexExplosion
from imprecise_hitting.iteration import recursion_prefix
from imprecise_hitting.modelio import parse_model
from imprecise_hitting.oracle import (
    agree,
    backward_induction_truncated,
    brute_force_envelope,
    enumerate_vertex_chains,
    monte_carlo_envelope_check,
    random_chain,
    random_corpus,
    worker_count,
    write_corpus,
)


def test_enumeration_counts(trap, geo, ruin):
    assert len(list(enumerate_vertex_chains(trap[0]))) == 2
    assert len(list(enumerate_vertex_chains(geo[0]))) == 2
    assert len(list(enumerate_vertex_chains(ruin[0]))) == 1


def test_enumeration_order(trap):
    first, second = enumerate_vertex_chains(trap[0])
    np.testing.assert_array_equal(first[1], [1, 0, 0])
    np.testing.assert_array_equal(second[1], [0, 0, 1])


def test_enumeration_cap(trap):
    with pytest.raises(VertexExplosion):
        list(enumerate_vertex_chains(trap[0], cap=1))


def test_brute_geo(geo):
    chain, a = geo
    r = brute_force_envelope(chain, a)
    assert r.brute["min_time"][1] == pytest.approx(4 / 3)
    assert r.brute["max_time"][1] == pytest.approx(4)
    assert r.ok and r.chains_checked == 2


def test_brute_trap(trap):
    chain, a = trap
    r = brute_force_envelope(chain, a)
    assert r.brute["max_time"][1] == np.inf
    assert r.brute["max_prob"][1] == 1 == r.library["upper_prob"][1]
    np.testing.assert_array_equal(r.witnesses["max_time"][1][1], [0, 0, 1])
    assert r.ok


def test_report_json(trap):
    chain, a = trap
    doc = json.loads(brute_force_envelope(chain, a).to_json())
    assert doc["brute"]["max_time"] == [0.0, "inf", "inf"]
    assert all(doc["flags"].values())


def test_threads_match_serial(monkeypatch):
    chain, a = random_chain(7, 4)
    serial = brute_force_envelope(chain, a)
    monkeypatch.setenv("IMC_THREADS", "3")
    assert worker_count() == 3
    threaded = brute_force_envelope(chain, a)
    for key in serial.brute:
        np.testing.assert_array_equal(serial.brute[key], threaded.brute[key])
    monkeypatch.setenv("IMC_THREADS", "0")
    assert worker_count() >= 1


def test_agree():
    assert agree([0, np.inf], [1e-9, np.inf])
    assert not agree([0, np.inf], [0, 5.0])
    assert not agree([0, 1], [0, 1.1])


def test_tree_examples(geo, trap):
    chain, a = geo
    for b in ("lower", "upper"):
        np.testing.assert_array_equal(backward_induction_truncated(chain, a, 0, b, "time"), [0, 1])
    assert backward_induction_truncated(chain, a, 2, "upper", "time")[1] == pytest.approx(2.3125)
    chain, a = trap
    assert backward_induction_truncated(chain, a, 3, "lower", "prob")[1] == 0


def test_tree_matches_recursion():
    for seed in range(10):
        chain, a = random_chain(seed, 3)
        for q in ("time", "prob"):
            for b in ("lower", "upper"):
                prefix = recursion_prefix(chain, a, q, b, 4)
                for n in range(5):
                    got = backward_induction_truncated(chain, a, n, b, q)
                    np.testing.assert_allclose(got, prefix[n], atol=1e-10)


def test_tree_limits(geo):
    chain, a = geo
    with pytest.raises(TreeTooLarge):
        backward_induction_truncated(chain, a, 21, "lower", "time")
    with pytest.raises(TreeTooLarge):
        backward_induction_truncated(chain, a, 12, "lower", "time", budget=100)


def test_monte_carlo_geo(geo):
    chain, a = geo
    r = monte_carlo_envelope_check(chain, a, horizon=10, samples=20_000, seed=3)
    assert r.ok
    mc = r.monte_carlo["time"]
    assert mc["lower"][1] - 3 * mc["stderr"][1] <= mc["mean"][1] <= mc["upper"][1] + 3 * mc["stderr"][1]


def test_monte_carlo_precise(ruin):
    chain, a = ruin
    r = monte_carlo_envelope_check(chain, a, horizon=10, samples=20_000, seed=1)
    exact = recursion_prefix(chain, a, "prob", "lower", 10)[10]
    got = np.array(r.monte_carlo["prob"]["mean"])
    se = np.array(r.monte_carlo["prob"]["stderr"])
    assert np.all(np.abs(got - exact) <= 3 * se + 1e-12)


def test_monte_carlo_deterministic(trap):
    chain, a = trap
    r1 = monte_carlo_envelope_check(chain, a, 5, 1000, seed=9)
    r2 = monte_carlo_envelope_check(chain, a, 5, 1000, seed=9)
    assert r1.to_json() == r2.to_json()


def test_monte_carlo_guards(geo):
    chain, a = geo
    with pytest.raises(PreconditionError):
        monte_carlo_envelope_check(chain, a, 10, 0)
    with pytest.raises(PreconditionError):
        monte_carlo_envelope_check(chain, a, 0, 10)


def test_monte_carlo_truncated_mean():
    # E[min(H, 4)] = 1 + 1/2 + 1/4 + 1/8 for a fair leave-or-stay state
    rows = (VertexRow([[1, 0]]), VertexRow([[0.5, 0.5]]))
    chain = ImpreciseChain(StateSpace(("a", "b")), rows)
    r = monte_carlo_envelope_check(chain, {0}, 3, 5000, seed=0)
    assert r.ok
    m = r.monte_carlo["time"]["mean"][1]
    assert m == pytest.approx(1.875, abs=0.05)


def test_random_chain_seeded():
    c1, a1 = random_chain(5)
    c2, a2 = random_chain(5)
    assert c1 == c2 and a1 == a2
    assert 0 < len(a1) < c1.size
    assert all(len(r.vertices()) <= 3 for r in c1.rows)


def test_corpus_files(tmp_path):
    paths = write_corpus(tmp_path, count=5, seed=100)
    corpus = random_corpus(5, seed=100)
    for path, (chain, target) in zip(paths, corpus):
        assert parse_model(path) == (chain, target)
