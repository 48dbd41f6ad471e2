import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icobounds.certificates import (
    CERT_TOL,
    LGYNI_ALPHA_MAX,
    closed_form_biased_ocb,
    lgyni_certificate,
    lgyni_f,
    lgyni_root,
    ocb_dual_certificate,
    ocb_lazy_attainment,
    ocb_process_and_instruments,
    verify_all,
)
from icobounds.nosig import is_valid_process
from icobounds.scenario import biased_ocb, causal_bound_bipartite


def test_closed_form_examples():
    assert closed_form_biased_ocb(1.0) == pytest.approx(1 + math.sqrt(2) / 2, abs=1e-15)
    assert closed_form_biased_ocb(0.75) == pytest.approx(1.5, abs=1e-15)
    assert closed_form_biased_ocb(0.0) == pytest.approx(1.0, abs=1e-15)


def test_ocb_certificate_trace_at_alpha_one():
    cert = ocb_dual_certificate(1.0)
    assert np.trace(cert.operator) == pytest.approx(4 + 2 * math.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x_star,b_star", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_ocb_certificate_components(alpha, x_star, b_star):
    cert = ocb_dual_certificate(alpha, x_star, b_star)
    assert cert.ok, cert.transcript()
    ch = cert.checks
    assert ch["min_eig_C_minus_Omega"] >= -CERT_TOL
    assert abs(ch["eta"] - closed_form_biased_ocb(alpha)) <= CERT_TOL
    assert ch["affine_distance"] <= CERT_TOL
    assert abs(ocb_lazy_attainment(alpha, x_star, b_star) - cert.bound) <= CERT_TOL


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_ocb_attainment_sandwich(alpha):
    att = ocb_process_and_instruments(alpha)
    assert is_valid_process(att.process.shape, att.process.matrix)
    assert att.closed_form_residual <= CERT_TOL
    assert abs(att.value - closed_form_biased_ocb(alpha)) <= CERT_TOL
    assert att.value > causal_bound_bipartite(biased_ocb(alpha)) + 1e-3


def test_attainment_is_independent_of_the_input_state(rng):
    ref = ocb_process_and_instruments(1.0).distribution.table
    for _ in range(5):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho = np.outer(v, v.conj()) / np.vdot(v, v)
        tab = ocb_process_and_instruments(1.0, rho).distribution.table
        assert np.max(np.abs(tab - ref)) <= 1e-12


def test_ocb_certificate_rejects_bad_indices():
    with pytest.raises(ValueError):
        ocb_dual_certificate(1.0, 2, 0)


@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.15])
def test_lgyni_certificates(alpha):
    cert = lgyni_certificate(alpha)
    assert cert.ok, cert.transcript()
    assert abs(lgyni_f(cert.coefficients[0], alpha)) <= 1e-12
    assert cert.checks["trace_C_over_4"] == pytest.approx(1 - alpha, abs=1e-10)
    assert cert.bound == pytest.approx(1 - alpha)


def test_lgyni_boundary_root_is_zero():
    assert lgyni_root(LGYNI_ALPHA_MAX) == 0.0
    cert = lgyni_certificate(LGYNI_ALPHA_MAX)
    assert cert.ok, cert.transcript()


def test_lgyni_out_of_range():
    with pytest.raises(ValueError):
        lgyni_root(0.2)
    with pytest.raises(ValueError):
        lgyni_certificate(-0.01)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.0, max_value=LGYNI_ALPHA_MAX))
def test_lgyni_root_property(alpha):
    c0 = lgyni_root(alpha)
    assert 0.0 <= c0 <= math.sqrt((1 - 3 * alpha) / 2) + 1e-15
    assert abs(lgyni_f(c0, alpha)) <= 1e-12


def test_verify_all_subset():
    out = verify_all(ocb_alphas=(1.0,), lgyni_alphas=(0.1,))
    assert out["passed"]
    assert len(out["records"]) == 4 + 1 + 1
