import numpy as np
import pytest

from icobounds.certificates import ocb_process_and_instruments
from icobounds.relaxation import _projection_matrix, general_ico_upper_bound, membership_all_triggers, membership_necessary
from icobounds.scenario import (
    ConditionalDistribution,
    Scenario,
    causal_bound_bipartite,
    deterministic_distribution,
    gyni,
    lgyni,
    perfect_gyni_distribution,
    project_trigger,
    uniform_distribution,
)
from icobounds.single_trigger import ico_bound_single_trigger


@pytest.mark.parametrize("sc", [Scenario((2, 2), (2, 2)), Scenario((2, 3), (3, 2))])
def test_projection_matrix_is_an_orthogonal_projector(sc, rng):
    for xi in sc.trigger_vectors():
        m = _projection_matrix(sc, xi)
        assert np.allclose(m @ m, m, atol=1e-13)
        assert np.allclose(m, m.T, atol=1e-13)
        t = rng.random(sc.table_shape)
        t /= t.sum(axis=tuple(range(sc.parties)), keepdims=True)
        p = ConditionalDistribution(sc, t)
        assert np.allclose(m @ t.reshape(-1), project_trigger(p, xi).table.reshape(-1), atol=1e-14)


def test_uniform_point_is_feasible():
    for v in membership_all_triggers(uniform_distribution(gyni().scenario)):
        assert v.feasible
        assert v.certificate["reproduction_residual"] <= 1e-8
        assert v.certificate["min_eig_S"] >= -1e-8


def test_perfect_gyni_is_infeasible_for_every_trigger():
    for v in membership_all_triggers(perfect_gyni_distribution()):
        assert v.status == "infeasible", v.message
        if "certified_margin" in v.certificate:
            assert v.certificate["certified_margin"] > 0


def test_causal_deterministic_point_is_feasible():
    sc = gyni().scenario
    # Alice guesses 0, Bob copies the input he would receive in a causal order A before B
    p = deterministic_distribution(sc, lambda x: (0, x[0]))
    for xi in sc.trigger_vectors():
        assert membership_necessary(p, xi).feasible


def test_ocb_attainment_point_is_feasible():
    p = ocb_process_and_instruments(1.0).distribution
    verdicts = membership_all_triggers(p)
    assert len(verdicts) == 8
    assert all(v.feasible for v in verdicts)


def test_general_bound_matches_single_trigger_bound():
    c = lgyni()
    general = general_ico_upper_bound(c)
    single = ico_bound_single_trigger(c)
    assert general.bound == pytest.approx(single.value, abs=1e-6)
    assert general.checks["solver_verification_ok"]


def test_general_bound_gyni_and_checks():
    rep = general_ico_upper_bound(gyni())
    assert 0.62 <= rep.bound <= 0.7602
    assert rep.bound >= causal_bound_bipartite(gyni()) - 1e-7
    ch = rep.checks
    assert ch["decomposition_residual"] <= 1e-8
    assert ch["min_eig_C_minus_Omega"] >= -1e-6
    assert ch["span_residual"] <= 1e-8
    assert ch["certificate_bound"] == pytest.approx(rep.bound, abs=1e-5)


def test_general_bound_scales_linearly():
    c = gyni()
    base = general_ico_upper_bound(c).bound
    assert general_ico_upper_bound(c.scaled(3.0)).bound == pytest.approx(3 * base, abs=1e-5)
