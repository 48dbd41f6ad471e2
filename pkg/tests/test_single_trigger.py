import numpy as np
import pytest

from icobounds.certificates import closed_form_biased_ocb
from icobounds.errors import NotSingleTriggerError
from icobounds.linalg import partial_trace
from icobounds.nosig import identity_process, nosig_affine, probability_from_process
from icobounds.scenario import Correlation, Scenario, algebraic_max, biased_lgyni, causal_bound_bipartite, gyni, lgyni, ocb_lazy_component
from icobounds.single_trigger import (
    canonical_instruments,
    canonical_shape,
    detect_trigger,
    ico_bound_single_trigger,
    operator_Q,
    operator_span_residual,
    performance_operator,
    projector_P,
    recover_coefficients,
    single_trigger_operator,
)

BITS = Scenario((2, 2), (2, 2))


def random_single_trigger(rng, sc, xi, nonneg=False):
    t = rng.random(sc.table_shape) if nonneg else rng.normal(size=sc.table_shape)
    n = sc.parties
    for i in range(n):
        mean = t.mean(axis=i, keepdims=True)
        off = (np.arange(sc.settings[i]) != xi[i]).reshape([1] * (n + i) + [-1] + [1] * (n - i - 1))
        t = np.where(off, np.broadcast_to(mean, t.shape), t)
    return Correlation(sc, t)


def test_P_and_Q_examples():
    xi = (1, 1)
    p = projector_P(xi, (0, 0), (1, 1), BITS)
    assert p.trace() == pytest.approx(1.0)
    assert np.linalg.matrix_rank(p.matrix) == 1
    assert projector_P(xi, (0, 0), (0, 0), BITS).trace() == pytest.approx(1.0)
    assert operator_Q(xi, (0, 0), (0, 0), BITS).trace() == pytest.approx(0.25)
    assert operator_Q(xi, (0, 0), (1, 0), BITS).trace() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        projector_P(xi, (2, 0), (0, 0), BITS)


def test_P_Q_duality():
    xi = (0, 1)
    idx = [(a, x) for x in BITS.setting_tuples() for a in BITS.outcome_tuples()]
    for a, x in idx:
        p = projector_P(xi, a, x, BITS)
        for b, y in idx:
            val = np.vdot(operator_Q(xi, b, y, BITS).matrix, p.matrix).real
            if y != x:
                assert val == pytest.approx(0.0)
            elif all(a[i] == b[i] for i in range(2) if x[i] == xi[i]):
                # non-trigger outcomes are indistinguishable, each carries weight 1/m
                k = sum(x[i] != xi[i] for i in range(2))
                assert val == pytest.approx(0.5**k)
            else:
                assert val == pytest.approx(0.0)


def test_recovery_round_trip_100_tables(rng):
    worst = 0.0
    scenarios = [BITS, Scenario((2, 3), (3, 2)), Scenario((3, 2), (2, 2))]
    for k in range(100):
        sc = scenarios[k % 3]
        xi = tuple(int(rng.integers(n)) for n in sc.settings)
        c = random_single_trigger(rng, sc, xi)
        omega = single_trigger_operator(c, xi).matrix
        rec = recover_coefficients(omega, xi, sc)
        worst = max(worst, float(np.max(np.abs(rec - c.coefficients))))
        assert operator_span_residual(omega, xi, sc) <= 1e-12
    assert worst <= 1e-12


def test_zero_correlation_gives_zero_operator():
    c = Correlation(BITS, np.zeros((2, 2, 2, 2)))
    assert np.array_equal(single_trigger_operator(c, (0, 0)).matrix, np.zeros((64, 64)))
    assert np.array_equal(performance_operator(c, canonical_instruments(BITS, (0, 0))).matrix, np.zeros((64, 64)))


def test_trigger_detection():
    assert detect_trigger(lgyni()) == (1, 1)
    assert detect_trigger(ocb_lazy_component(1, 0, 1.0)) == (1, 1)
    with pytest.raises(NotSingleTriggerError):
        detect_trigger(gyni())
    with pytest.raises(NotSingleTriggerError):
        detect_trigger(lgyni(), (0, 0))


def test_canonical_instrument_sums():
    sc = BITS
    inst = canonical_instruments(sc, (1, 0))
    shape = canonical_shape(sc)
    for i, party in enumerate(shape.parties):
        for x in range(2):
            total = sum(inst.choi[i][x])
            tr_out = partial_trace(inst.as_labeled()[i][x][0].__class__(party.shape, total), party.out_labels).matrix
            assert np.allclose(tr_out, np.eye(2))
            if x == inst.triggers[i]:
                deph = sum(np.kron(np.kron(np.diag(e), np.diag(e)), np.diag(np.eye(2)[x])) for e in np.eye(2))
                assert np.allclose(total, deph)


def test_performance_operator_matches_single_trigger_operator(rng):
    c = random_single_trigger(rng, BITS, (1, 0))
    lhs = performance_operator(c, canonical_instruments(BITS, (1, 0))).matrix
    assert np.allclose(lhs, single_trigger_operator(c, (1, 0)).matrix, atol=1e-14)


def test_identity_process_with_canonical_instruments():
    shape = canonical_shape(BITS)
    inst = canonical_instruments(BITS, (1, 1))
    p = probability_from_process(identity_process(shape), inst.choi)
    assert np.allclose(p.table[:, :, 0, 0], 0.25)
    assert np.allclose(p.table.sum(axis=(0, 1)), 1)


def test_ico_bound_lgyni():
    rep = ico_bound_single_trigger(lgyni())
    assert rep.value == pytest.approx(0.8194, abs=5e-3)
    assert rep.gap <= 1e-6
    assert rep.certificate_checks["solver_verification_ok"]
    assert rep.psd_restricted["agrees"]


def test_lgyni_via_biased_mapping():
    rep = ico_bound_single_trigger(biased_lgyni(1 / 3))
    assert (3 * rep.value + 1) / 4 == pytest.approx(ico_bound_single_trigger(lgyni()).value, abs=1e-6)


def test_ico_bound_normalization_functional():
    xi = (0, 1)
    tab = np.zeros((2, 2, 2, 2))
    tab[:, :, xi[0], xi[1]] = 1.0
    rep = ico_bound_single_trigger(Correlation(BITS, tab), xi)
    assert rep.value == pytest.approx(1.0, abs=1e-7)


def test_ico_bound_lazy_component():
    rep = ico_bound_single_trigger(ocb_lazy_component(0, 0, 1.0))
    assert rep.value == pytest.approx((2 + np.sqrt(2)) / 2, abs=1e-4)


def test_ico_bound_properties_on_random_tables(rng):
    aff = nosig_affine(canonical_shape(BITS))
    for _ in range(4):
        xi = (int(rng.integers(2)), int(rng.integers(2)))
        c = random_single_trigger(rng, BITS, xi, nonneg=True)
        rep = ico_bound_single_trigger(c, xi)
        assert rep.value >= causal_bound_bipartite(c) - 1e-7
        assert rep.value <= algebraic_max(c) + 1e-7
        omega = single_trigger_operator(c, xi).matrix
        assert np.linalg.eigvalsh(rep.certificate - omega).min() >= -1e-7
        assert aff.distance(rep.certificate / rep.eta) <= 1e-8


def test_lazy_component_bound_is_monotone():
    vals = [ico_bound_single_trigger(ocb_lazy_component(0, 0, a)).value for a in (0.25, 0.75)]
    assert vals[0] <= vals[1] + 1e-7
    assert vals[1] == pytest.approx(closed_form_biased_ocb(0.75), abs=1e-4)
