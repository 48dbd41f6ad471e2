import numpy as np
import pytest

from icobounds.nosig import nosig_span
from icobounds.scenario import lgyni, ocb_lazy_component
from icobounds.sdp import ProgramBuilder, Tolerances, dense_rows, solve, verify
from icobounds.sdp.interchange import dumps, loads, programs_identical
from icobounds.single_trigger import build_primal_program, canonical_shape, single_trigger_operator

BACKENDS = ["ipm", "cvxpy", "cvxpy:scs"]


def _backend(name):
    if name.startswith("cvxpy"):
        pytest.importorskip("cvxpy")
    return name


def min_t_program():
    b = ProgramBuilder()
    t = b.add_variables(1, "t")
    b.add_block(-np.diag([1.0, 2.0]), [(t, dense_rows([np.eye(2)]))])
    b.set_objective(t, [1.0], "min")
    return b.build()


def _trace_one_block(b, constant_dim, cplx=False):
    """S = E00 + y0 (E11 - E00) + y1 X + y2 Y parametrizes trace-one 2x2 matrices."""
    y = b.add_variables(3 if cplx else 2, "s")
    mats = [np.diag([-1.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])]
    if cplx:
        mats.append(np.array([[0, -1j], [1j, 0]]))
    b.add_block(np.diag([1.0, 0.0]).astype(complex if cplx else float), [(y, dense_rows(mats))])
    return y


def max_trace_program():
    b = ProgramBuilder()
    y = _trace_one_block(b, 2)
    b.set_objective(y, [2.0, 0.0], "max", constant=1.0)  # Tr(diag(1,3) S) = 1 + 2 y0
    return b.build()


def infeasible_program():
    b = ProgramBuilder()
    y = b.add_variables(4, "s")
    basis = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros((2, 2))]
    b.add_block(np.zeros((2, 2)), [(y, dense_rows(basis))])
    b.add_equalities(y, [[1, 1, 0, 0], [1, -1, 0, 0]], [1.0, 2.0])
    b.set_objective(y, np.zeros(4), "max")
    return b.build()


def conic_infeasible_program():
    # S >= 0 with trace one (built in), and Tr(Z S) = 2 as an equality on y0
    b = ProgramBuilder()
    y = _trace_one_block(b, 2)
    b.add_equalities(y, [[-2.0, 0.0]], [1.0])
    b.set_objective(y, [0.0, 0.0], "max")
    return b.build()


def complex_program():
    # max Tr(H S), S a trace-one qubit state, H = [[1, i],[-i, 1]] has top eigenvalue 2
    b = ProgramBuilder()
    y = _trace_one_block(b, 2, cplx=True)
    b.set_objective(y, [0.0, 0.0, -2.0], "max", constant=1.0)  # Tr(HS) = 1 - 2 y2
    return b.build()


@pytest.mark.parametrize("backend", BACKENDS)
def test_min_t_example(backend):
    p = min_t_program()
    r = solve(p, backend=_backend(backend))
    assert r.status == "optimal"
    assert r.primal_value == pytest.approx(2.0, abs=1e-6)
    assert verify(p, r).ok


@pytest.mark.parametrize("backend", BACKENDS)
def test_max_trace_example(backend):
    p = max_trace_program()
    r = solve(p, backend=_backend(backend))
    assert r.status == "optimal"
    assert r.primal_value == pytest.approx(3.0, abs=1e-6)
    assert verify(p, r).ok


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("make", [infeasible_program, conic_infeasible_program])
def test_infeasible_examples(backend, make):
    p = make()
    r = solve(p, backend=_backend(backend))
    assert r.status == "infeasible"
    rec = verify(p, r)
    assert rec.ok, rec.issues
    assert rec.status == "infeasible"


@pytest.mark.parametrize("backend", BACKENDS)
def test_complex_block(backend):
    p = complex_program()
    r = solve(p, backend=_backend(backend))
    assert r.primal_value == pytest.approx(2.0, abs=1e-6)
    assert verify(p, r).ok


def test_verify_flags_a_tampered_report():
    p = max_trace_program()
    r = solve(p)
    r.primal_value += 0.1
    rec = verify(p, r)
    assert not rec.ok
    assert any("primal value" in s for s in rec.issues)


def test_weak_duality_on_reports():
    for p in (min_t_program(), max_trace_program(), complex_program()):
        r = solve(p)
        rec = verify(p, r)
        assert rec.checks["weak_duality"]


def test_idle_variable_is_dropped_or_unbounded():
    b = ProgramBuilder()
    y = b.add_variables(2, "y")
    b.add_block(np.eye(2), [(y[:1], dense_rows([-np.eye(2)]))])
    b.set_objective(y[:1], [1.0], "max")
    p = b.build()
    r = solve(p)
    assert r.status == "optimal" and r.primal_value == pytest.approx(1.0, abs=1e-6)
    assert r.y[1] == 0.0
    b.set_objective(y[1:], [1.0], "max")
    p = b.build()
    r = solve(p)
    assert r.status == "unbounded"
    assert verify(p, r).ok


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(min_t_program(), backend="nope")


def test_backend_env(monkeypatch):
    monkeypatch.setenv("ICO_SOLVER_BACKEND", "ipm")
    assert solve(min_t_program()).backend == "ipm"


def _strip_time(summary):
    return {k: v for k, v in summary.items() if k != "wall_time_s"}


def test_determinism_bitwise():
    omega = single_trigger_operator(lgyni()).matrix.real
    p, _, _ = build_primal_program(omega, canonical_shape(lgyni().scenario))
    r1, r2 = solve(p), solve(p)
    assert _strip_time(r1.summary()) == _strip_time(r2.summary())
    assert np.array_equal(r1.y, r2.y)
    assert all(np.array_equal(a, b) for a, b in zip(r1.dual_blocks, r2.dual_blocks))
    assert np.array_equal(r1.eq_multipliers, r2.eq_multipliers)


def _dual_value(c):
    """min Tr(C)/d_in over C in the span of no-signalling channels with C >= Omega."""
    omega = single_trigger_operator(c).matrix.real
    shape = canonical_shape(c.scenario)
    basis = nosig_span(shape).basis(real_only=True)
    dim = omega.shape[0]
    b = ProgramBuilder()
    z = b.add_variables(basis.shape[0], "z")
    b.add_block(-omega, [(z, basis)])
    traces = basis @ np.eye(dim).reshape(-1) / shape.d_in
    b.set_objective(z, np.real(traces), "min")
    return solve(b.build())


@pytest.mark.parametrize("make", [lgyni, pytest.param(lambda: ocb_lazy_component(1, 0, 1.0), marks=pytest.mark.slow, id="ocb_lazy")])
def test_primal_and_dual_formulations_agree(make):
    c = make()
    omega = single_trigger_operator(c).matrix.real
    p, _, _ = build_primal_program(omega, canonical_shape(c.scenario))
    primal = solve(p)
    dual = _dual_value(c)
    tol = Tolerances().gap
    scale = 1 + abs(primal.primal_value)
    assert abs(primal.primal_value - dual.primal_value) <= 2 * tol * scale


@pytest.mark.parametrize("make", [min_t_program, max_trace_program, infeasible_program, complex_program])
def test_interchange_round_trip(make):
    p = make()
    text = dumps(p)
    q = loads(text)
    assert programs_identical(p, q)
    assert dumps(q) == text


def test_interchange_round_trip_large():
    omega = single_trigger_operator(lgyni()).matrix.real
    p, _, _ = build_primal_program(omega, canonical_shape(lgyni().scenario))
    q = loads(dumps(p))
    assert programs_identical(p, q)
    assert solve(q).primal_value == solve(p).primal_value


def test_interchange_rejects_foreign_documents():
    with pytest.raises(ValueError):
        loads('{"format": "other"}')
