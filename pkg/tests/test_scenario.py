import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icobounds.certificates import ocb_process_and_instruments, closed_form_biased_ocb
from icobounds.errors import ScenarioMismatchError
from icobounds.scenario import (
    ConditionalDistribution,
    Correlation,
    Scenario,
    algebraic_max,
    biased_lgyni,
    biased_ocb,
    causal_bound_bipartite,
    causal_bound_bruteforce,
    evaluate,
    gyni,
    lgyni,
    ocb,
    ocb_lazy_component,
    ocb_setting,
    perfect_gyni_distribution,
    project_trigger,
    uniform_distribution,
)

BITS = Scenario((2, 2), (2, 2))


def random_distribution(rng, sc):
    t = rng.random(sc.table_shape)
    return ConditionalDistribution(sc, t / t.sum(axis=tuple(range(sc.parties)), keepdims=True))


def test_gyni_table():
    c = gyni()
    for a1, a2, x1, x2 in itertools.product(range(2), repeat=4):
        assert c.coefficients[a1, a2, x1, x2] == (0.25 if (a1 == x2 and a2 == x1) else 0.0)
    assert algebraic_max(c) == 1.0


def test_ocb_table():
    c = ocb()
    assert np.array_equal(c.coefficients, biased_ocb(1.0).coefficients)
    for a1, a2, x1, b, k in itertools.product(range(2), repeat=5):
        expect = 0.25 * (a1 == b) if k == 0 else 0.25 * (a2 == x1)
        assert c.coefficients[a1, a2, x1, ocb_setting(b, k)] == expect
    assert algebraic_max(c) == 2.0


def test_lgyni_relates_to_biased_lgyni():
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = random_distribution(rng, BITS)
        assert evaluate(lgyni(), p) == pytest.approx((3 * evaluate(biased_lgyni(1 / 3), p) + 1) / 4, abs=1e-14)


def test_biased_lgyni_range():
    with pytest.raises(ValueError):
        biased_lgyni(1.5)
    with pytest.raises(ValueError):
        biased_lgyni(-0.1)


def test_evaluate_examples():
    assert evaluate(gyni(), uniform_distribution(BITS)) == pytest.approx(0.25)
    assert evaluate(gyni(), perfect_gyni_distribution()) == 1.0
    for alpha in (0.5, 1.0, 2.0):
        p = ocb_process_and_instruments(alpha).distribution
        assert evaluate(biased_ocb(alpha), p) == pytest.approx(closed_form_biased_ocb(alpha), abs=1e-12)
    with pytest.raises(ScenarioMismatchError):
        evaluate(ocb(), uniform_distribution(BITS))


def test_algebraic_max_zero():
    assert algebraic_max(Correlation(BITS, np.zeros((2, 2, 2, 2)))) == 0.0


def test_causal_bounds():
    assert causal_bound_bipartite(ocb()) == 1.5
    assert causal_bound_bipartite(gyni()) == 0.5
    assert causal_bound_bipartite(lgyni()) == 0.75
    for alpha in np.linspace(0, 1, 21):
        c = biased_lgyni(alpha)
        expect = max(1 - alpha, (1 + alpha) / 2)
        assert abs(causal_bound_bipartite(c) - expect) <= 1e-12
        assert abs(causal_bound_bruteforce(c) - expect) <= 1e-12


def test_causal_bound_rejects_other_party_counts():
    c = Correlation(Scenario((2,), (2,)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        causal_bound_bipartite(c)


tables = st.lists(st.floats(-1, 1, allow_nan=False, width=32), min_size=16, max_size=16)


@settings(max_examples=60, deadline=None)
@given(tables)
def test_causal_bound_properties(vals):
    c = Correlation(BITS, np.array(vals).reshape(2, 2, 2, 2))
    cb = causal_bound_bipartite(c)
    assert cb <= algebraic_max(c) + 1e-12
    assert cb == pytest.approx(causal_bound_bruteforce(c), abs=1e-12)
    # relabel outcomes of A and settings of B
    t = c.coefficients[::-1, :, :, ::-1]
    assert causal_bound_bipartite(Correlation(BITS, t)) == pytest.approx(cb, abs=1e-12)


def test_causal_bound_bruteforce_on_ocb_scenario():
    for alpha in (0.0, 0.5, 1.0, 2.0):
        c = biased_ocb(alpha)
        assert causal_bound_bipartite(c) == pytest.approx(causal_bound_bruteforce(c), abs=1e-12)
    assert causal_bound_bipartite(ocb_lazy_component(0, 0, 1.0)) == pytest.approx(causal_bound_bruteforce(ocb_lazy_component(0, 0, 1.0)))


def test_evaluate_is_linear(rng):
    p, q = random_distribution(rng, BITS), random_distribution(rng, BITS)
    c1, c2 = gyni(), lgyni()
    mix = ConditionalDistribution(BITS, 0.3 * p.table + 0.7 * q.table)
    assert evaluate(c1, mix) == pytest.approx(0.3 * evaluate(c1, p) + 0.7 * evaluate(c1, q))
    both = Correlation(BITS, 2 * c1.coefficients + c2.coefficients, c2.offset)
    assert evaluate(both, p) == pytest.approx(2 * evaluate(c1, p) + evaluate(c2, p))


def test_project_trigger_examples():
    p = perfect_gyni_distribution()
    q = project_trigger(p, (1, 1)).table
    assert np.allclose(q[:, :, 0, 0], 0.25)
    assert np.array_equal(q[:, :, 1, 1], p.table[:, :, 1, 1])
    # x = (1, 0): party 1 at trigger keeps a1 = x2 = 0; party 2 becomes uniform
    assert np.allclose(q[:, :, 1, 0], [[0.5, 0.5], [0, 0]])
    u = uniform_distribution(BITS)
    assert np.array_equal(project_trigger(u, (0, 1)).table, u.table)


def test_project_trigger_is_idempotent_projection(rng):
    sc = Scenario((2, 3), (3, 2))
    for _ in range(50):
        p = random_distribution(rng, sc)
        xi = (int(rng.integers(2)), int(rng.integers(3)))
        once = project_trigger(p, xi)
        assert np.allclose(project_trigger(once, xi).table, once.table, atol=1e-15)
        assert once.table.min() >= 0
        assert np.allclose(once.table.sum(axis=(0, 1)), 1)


def test_distribution_validation():
    with pytest.raises(ValueError):
        ConditionalDistribution(BITS, np.full((2, 2, 2, 2), 0.3))
    bad = np.full((2, 2, 2, 2), 0.25)
    bad[0, 0, 0, 0], bad[1, 1, 0, 0] = -0.1, 0.6
    with pytest.raises(ValueError):
        ConditionalDistribution(BITS, bad)


def test_json_round_trips(rng):
    c = biased_ocb(0.7)
    assert Correlation.from_json(c.to_json()) == c
    p = random_distribution(rng, BITS)
    assert ConditionalDistribution.from_json(p.to_json()) == p
    c2 = lgyni()
    assert Correlation.from_json(c2.to_json()).offset == c2.offset
