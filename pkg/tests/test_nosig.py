import itertools

import numpy as np
import pytest
from helpers import QUBIT_PAIR, random_instrument, random_process

from icobounds.certificates import OCB_PROCESS_SHAPE, ocb_dual_certificate, ocb_instruments, ocb_process, closed_form_biased_ocb, ocb_closed_form_distribution
from icobounds.errors import InvalidInstrumentError, ShapeError
from icobounds.linalg import choi_from_kraus, double_ket, partial_trace
from icobounds.nosig import (
    PartitionedShape,
    identity_process,
    is_nosig_channel,
    is_valid_process,
    nosig_affine,
    nosig_linear_polys,
    nosig_span,
    nosig_span_residual,
    nosig_subset_residual,
    probability_from_process,
    process_report,
    process_validity_constraints,
)
from icobounds.opbasis import nullspace_dimension_dense
from icobounds.scenario import OCB_SCENARIO
from icobounds.single_trigger import canonical_shape

SINGLE = PartitionedShape([([("in", 2)], [("out", 2)])])


def test_single_party_affine_dimension():
    aff = nosig_affine(SINGLE)
    assert aff.dimension == 12
    assert aff.contains(aff.base)


def test_affine_dimension_matches_dense_rank():
    for shape in (SINGLE, QUBIT_PAIR):
        polys = nosig_linear_polys(shape)
        assert nosig_affine(shape).dimension == nullspace_dimension_dense(shape.space, polys)


def _product_choi(ca, cb):
    # factor order A_in A_out B_in B_out
    return np.kron(ca, cb)


def _identity_choi():
    return np.outer(double_ket(np.eye(2)), double_ket(np.eye(2)))


def _depolarizing_choi():
    return np.eye(4) / 2


def test_is_nosig_channel_examples():
    assert is_nosig_channel(_product_choi(_identity_choi(), _depolarizing_choi()), QUBIT_PAIR)
    # B_out receives A_in; A_out is maximally mixed; B_in is discarded
    kraus = []
    for m, n in itertools.product(range(2), repeat=2):
        k = np.zeros((4, 4))  # rows (A_out, B_out), columns (A_in, B_in)
        for a in range(2):
            k[m * 2 + a, a * 2 + n] = 1 / np.sqrt(2)
        kraus.append(k)
    c = choi_from_kraus(kraus, [("A_in", 2), ("B_in", 2)], [("A_out", 2), ("B_out", 2)])
    c = c.permuted(["A_in", "A_out", "B_in", "B_out"])
    assert np.allclose(partial_trace(c, ["A_out", "B_out"]).matrix, np.eye(4))
    assert not is_nosig_channel(c.matrix, QUBIT_PAIR)


def test_ocb_certificate_is_scaled_nosig_channel():
    for alpha in (0.5, 1.0, 2.0):
        cert = ocb_dual_certificate(alpha)
        c = cert.canonical_operator / closed_form_biased_ocb(alpha)
        assert is_nosig_channel(c, canonical_shape(OCB_SCENARIO), tol=1e-9)


def test_span_examples():
    aff = nosig_affine(QUBIT_PAIR)
    rng = np.random.default_rng(3)
    for _ in range(5):
        point = aff.point(rng.normal(size=aff.dimension))
        assert nosig_span_residual(point, QUBIT_PAIR) <= 1e-9
    assert nosig_span_residual(np.zeros((16, 16)), QUBIT_PAIR) == 0.0
    assert nosig_span_residual(2.5 * aff.base, QUBIT_PAIR) <= 1e-12
    assert nosig_subset_residual(2.5 * aff.base, QUBIT_PAIR) > 1.0  # not trace preserving


def test_affine_membership_is_convex():
    aff = nosig_affine(QUBIT_PAIR)
    rng = np.random.default_rng(4)
    p, q = aff.point(rng.normal(size=aff.dimension)), aff.point(rng.normal(size=aff.dimension))
    for t in (0.0, 0.3, 1.0):
        assert aff.contains(t * p + (1 - t) * q)


def test_process_validity_examples():
    eye = np.eye(16)
    assert is_valid_process(QUBIT_PAIR, eye / 4)
    assert not is_valid_process(QUBIT_PAIR, 2 * eye / 4)
    for alpha in (0.0, 0.5, 1.0, 2.0):
        assert is_valid_process(OCB_PROCESS_SHAPE, ocb_process(alpha).matrix)
    cons = process_validity_constraints(QUBIT_PAIR)
    assert cons.normalization(eye / 4) == pytest.approx(1.0)
    trip = cons.to_triplets()
    assert len(trip["rhs"]) == nosig_span(QUBIT_PAIR).dimension()


def test_dual_affine_is_affine(rng):
    s1, s2 = random_process(rng, QUBIT_PAIR), random_process(rng, QUBIT_PAIR)
    cons = process_validity_constraints(QUBIT_PAIR)
    assert cons.residual(0.4 * s1 + 0.6 * s2) <= 1e-12
    assert cons.residual(2 * s1 - s2) <= 1e-12  # affine, not only convex


def test_probability_examples():
    shape = QUBIT_PAIR
    # identity process, any instrument -> outcome-independent normalized rows
    rng = np.random.default_rng(5)
    inst = [random_instrument(rng, 2, 2, 2, 2), random_instrument(rng, 2, 2, 2, 2)]
    p = probability_from_process(identity_process(shape), inst)
    assert np.allclose(p.table.sum(axis=(0, 1)), 1)
    # OCB process with its instruments reproduces the closed form
    for alpha in (0.5, 1.0):
        dist = probability_from_process(ocb_process(alpha), ocb_instruments())
        assert np.allclose(dist.table, ocb_closed_form_distribution(alpha), atol=1e-12)
    # outcome 0 always carries the full channel
    chan = [[_identity_choi(), np.zeros((4, 4))] for _ in range(2)]
    p = probability_from_process(random_process(rng, shape), [chan, chan], shape)
    assert np.allclose(p.table[0, 0], 1.0)


def test_invalid_instruments_are_rejected():
    bad = [[np.eye(4), np.eye(4)]]  # sums to 2 * identity Choi
    with pytest.raises(InvalidInstrumentError):
        probability_from_process(identity_process(QUBIT_PAIR), [bad, bad])


def test_normalization_under_random_instruments(rng):
    """Every process gives normalized distributions for 1000 random instrument sets."""
    worst = 0.0
    processes = [random_process(rng, QUBIT_PAIR) for _ in range(10)] + [np.eye(16) / 4]
    for k in range(1000):
        s = processes[k % len(processes)]
        n_a, n_b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m_a, m_b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        inst = [random_instrument(rng, 2, 2, n_a, m_a), random_instrument(rng, 2, 2, n_b, m_b)]
        p = probability_from_process(s, inst, QUBIT_PAIR, check=(k % 50 == 0))
        worst = max(worst, float(np.max(np.abs(p.table.sum(axis=(0, 1)) - 1))), float(-p.table.min()))
    assert worst <= 1e-8


def test_process_report_fields():
    rep = process_report(QUBIT_PAIR, np.eye(16) / 4)
    assert rep["min_eigenvalue"] == pytest.approx(0.25)
    assert rep["dual_affine_residual"] <= 1e-14
    assert rep["normalization"] == pytest.approx(1.0)


def test_dimension_guard():
    with pytest.raises(ShapeError):
        PartitionedShape([([("a", 8)], [("b", 8)]), ([("c", 8)], [("d", 8)])])
