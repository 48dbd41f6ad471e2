"""Upper bounds for arbitrary correlations through single-trigger decompositions.

The decomposition program minimizes ``sum_xi Tr(C_xi)/d_in`` over operators
``Omega_xi`` in the span of the canonical ``P_xi`` operators whose recovered
tables add up to alpha, with ``C_xi`` in the span of no-signalling Choi
operators and ``C_xi >= Omega_xi``.  It is solved through its Lagrange dual

    max  sum alpha(a|x) p(a|x)
    s.t. for every xi there is a process matrix S_xi with
         Tr[S_xi P_{xi,a,x}] = Pi_xi(p)(a|x),

where ``Pi_xi`` uniformizes the outcomes of parties off their trigger.  The
multipliers of the equalities give the decomposition back: with tables
``beta_xi = Pi_xi(lambda_xi)`` one has ``sum beta_xi = alpha``,
``Omega_xi = sum beta_xi P_xi`` and ``C_xi = Omega_xi + X_xi`` where
``X_xi >= 0`` is the multiplier of ``S_xi >= 0``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .linalg import min_eigenvalue
from .nosig import ProcessConstraints, nosig_span, nosig_span_residual
from .scenario import ConditionalDistribution, Correlation, Scenario, check_trigger, project_trigger
from .sdp import ProgramBuilder, Tolerances, solve, verify
from .single_trigger import assemble_omega, canonical_shape, party_factor, recover_coefficients


def _projection_matrix(scenario: Scenario, xi) -> np.ndarray:
    """Matrix of ``Pi_xi`` acting on flattened tables (symmetric, idempotent)."""
    size = int(np.prod(scenario.table_shape))
    eye = np.eye(size).reshape((size,) + scenario.table_shape)
    n = scenario.parties
    out = np.array(eye)
    for i in range(n):
        marg = out.sum(axis=1 + i, keepdims=True) / scenario.outcomes[i]
        shape = [1] * (2 * n + 1)
        shape[1 + n + i] = scenario.settings[i]
        off = (np.arange(scenario.settings[i]) != xi[i]).reshape(shape)
        out = np.where(off, np.broadcast_to(marg, out.shape), out)
    return out.reshape(size, size).T


def _p_rows(scenario: Scenario, xi, basis: sp.csr_matrix, base: np.ndarray):
    """Rows ``Tr[D_k P_{xi,a,x}]`` (as a matrix over k) and ``Tr[S0 P]`` for each table entry."""
    n = scenario.parties
    cols, consts = [], []
    for idx in np.ndindex(*scenario.table_shape):
        a, x = idx[:n], idx[n:]
        mat = np.ones((1, 1))
        for i in range(n):
            mat = np.kron(mat, party_factor(xi[i], a[i], x[i], scenario.outcomes[i], scenario.settings[i]))
        cols.append(basis @ mat.reshape(-1))
        consts.append(float(np.sum(base.real * mat)))
    return np.array(cols), np.array(consts)


@dataclass
class DecompositionReport:
    bound: float
    triggers: list
    omegas: list  # per-trigger Omega_xi (dense)
    certificates: list  # per-trigger C_xi (dense, span of no-signalling)
    tables: list  # recovered per-trigger coefficient tables
    checks: dict
    solve: dict
    optimal_distribution: np.ndarray
    offset: float = 0.0
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "bound": self.bound,
            "triggers": [list(t) for t in self.triggers],
            "checks": self.checks,
            "solver": self.solve,
            "offset": self.offset,
            "wall_time_s": self.wall_time,
        }


def build_decomposition_program(c: Correlation, triggers=None):
    sc = c.scenario
    shape = canonical_shape(sc)
    cons = ProcessConstraints(shape)
    basis = cons.free.basis(real_only=True)
    triggers = [tuple(t) for t in (triggers if triggers is not None else sc.trigger_vectors())]
    size = int(np.prod(sc.table_shape))
    b = ProgramBuilder()
    p_idx = b.add_variables(size, "p")
    y_idx = []
    for xi in triggers:
        y = b.add_variables(basis.shape[0], f"s{xi}")
        y_idx.append(y)
        b.add_block(cons.base.real, [(y, basis)], name=f"S{xi}")
        rows, consts = _p_rows(sc, xi, basis, cons.base)
        proj = _projection_matrix(sc, xi)
        mat = np.hstack([rows, -proj])
        b.add_equalities(np.concatenate([y, p_idx]), mat, -consts)
    b.set_objective(p_idx, c.coefficients.reshape(-1), "max", constant=c.offset)
    return b.build(), triggers, p_idx, y_idx, cons, basis


def general_ico_upper_bound(c: Correlation, tol: Tolerances | None = None, backend: str | None = None, verbose: bool = False) -> DecompositionReport:
    t0 = time.perf_counter()
    sc = c.scenario
    program, triggers, p_idx, y_idx, cons, basis = build_decomposition_program(c)
    report = solve(program, tol, backend=backend, verbose=verbose)
    check = verify(program, report, tol)
    if report.status != "optimal":
        raise SolverError(f"decomposition SDP ended with status {report.status}: {report.message}", report)
    shape = canonical_shape(sc)
    size = int(np.prod(sc.table_shape))
    lam = report.eq_multipliers.reshape(len(triggers), size)
    span = nosig_span(shape)
    omegas, certs, tables = [], [], []
    worst_psd = math.inf
    worst_span = 0.0
    worst_recovery = 0.0
    total = np.zeros(sc.table_shape)
    bound = c.offset
    for k, xi in enumerate(triggers):
        beta = (_projection_matrix(sc, xi) @ lam[k]).reshape(sc.table_shape)
        omega = assemble_omega(sc, xi, beta)
        x = np.real(report.dual_blocks[k])
        cert = span.project(omega + x).real
        rec = recover_coefficients(omega, xi, sc)
        worst_recovery = max(worst_recovery, float(np.max(np.abs(rec - beta))))
        worst_psd = min(worst_psd, min_eigenvalue(cert - omega))
        worst_span = max(worst_span, nosig_span_residual(cert, shape))
        omegas.append(omega)
        certs.append(cert)
        tables.append(rec)
        total += rec
        bound += float(np.trace(cert)) / shape.d_in
    checks = {
        "decomposition_residual": float(np.max(np.abs(total - c.coefficients))),
        "recovery_residual": worst_recovery,
        "min_eig_C_minus_Omega": worst_psd,
        "span_residual": worst_span,
        "certificate_bound": bound,
        "solver_verification_ok": check.ok,
        "solver_issues": check.issues,
    }
    return DecompositionReport(
        bound=report.primal_value,
        triggers=triggers,
        omegas=omegas,
        certificates=certs,
        tables=tables,
        checks=checks,
        solve=report.summary(),
        optimal_distribution=report.y[p_idx].reshape(sc.table_shape),
        offset=c.offset,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# membership


FEASIBLE_MARGIN = -1e-7
INFEASIBLE_MARGIN = -1e-5


@dataclass
class MembershipVerdict:
    trigger: tuple
    status: str  # feasible | infeasible | undecided
    residual: float  # optimal t in max{t : S - tI >= 0}, or the equality inconsistency
    witness: np.ndarray | None = None
    certificate: dict = field(default_factory=dict)
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_json(self) -> dict:
        return {"trigger": list(self.trigger), "status": self.status, "residual": self.residual, "message": self.message, "certificate": {k: v for k, v in self.certificate.items() if np.isscalar(v)}}


def membership_necessary(p: ConditionalDistribution, xi, tol: Tolerances | None = None, backend: str | None = None) -> MembershipVerdict:
    """Is there a process matrix S with ``Tr[S P_{xi,a,x}] = Pi_xi(p)(a|x)``?

    Solved as ``max t`` subject to ``S(y) - t I >= 0`` and the equalities;
    the answer is yes iff ``t* >= 0``.  A clearly negative ``t*`` comes with a
    dual matrix X (trace one) and multipliers that separate: they are checked
    independently before the verdict "infeasible" is returned.
    """
    sc = p.scenario
    xi = check_trigger(sc, xi)
    shape = canonical_shape(sc)
    cons = ProcessConstraints(shape)
    basis = cons.free.basis(real_only=True)
    target = project_trigger(p, xi).table.reshape(-1)
    rows, consts = _p_rows(sc, xi, basis, cons.base)
    b = ProgramBuilder()
    y = b.add_variables(basis.shape[0], "s")
    t = b.add_variables(1, "t")
    dim = shape.space.dim
    eye = sp.csr_matrix(np.eye(dim).reshape(1, -1))
    b.add_block(cons.base.real, [(y, basis), (t, -eye)], name="S-tI")
    b.add_equalities(y, rows, target - consts)
    b.set_objective(t, [1.0], "max")
    program = b.build()
    report = solve(program, tol, backend=backend)
    if report.status == "infeasible" and "equality_ray" in report.certificate:
        return MembershipVerdict(xi, "infeasible", report.eq_residual, None, {"equality_ray": report.certificate["equality_ray"]}, "linear constraints are inconsistent")
    if report.status != "optimal":
        return MembershipVerdict(xi, "undecided", math.nan, None, {}, f"solver status {report.status}: {report.message}")
    t_star = report.primal_value
    s_mat = (cons.base + (report.y[y] @ basis).reshape(dim, dim)).real
    if t_star >= FEASIBLE_MARGIN:
        recon = rows @ report.y[y] + consts
        return MembershipVerdict(
            xi,
            "feasible",
            t_star,
            s_mat,
            {"reproduction_residual": float(np.max(np.abs(recon - target))), "min_eig_S": min_eigenvalue(s_mat)},
        )
    # separating functional: Tr(X S(y)) = value + r.y for every y meeting the equalities;
    # |y_k| <= ||S||_F <= Tr S = d_out for PSD S, which bounds the slack r.y
    x = np.real(report.dual_blocks[0])
    lam = report.eq_multipliers
    grad = basis @ x.reshape(-1) + rows.T @ lam
    value = float(np.sum(cons.base.real * x) - (target - consts) @ lam)
    min_eig_x = min_eigenvalue(x)
    slack = (float(np.sum(np.abs(grad))) + max(0.0, -min_eig_x)) * shape.d_out
    cert = {
        "separation_value": value,
        "stationarity_l1": float(np.sum(np.abs(grad))),
        "min_eig_X": min_eig_x,
        "trace_X": float(np.trace(x)),
        "certified_margin": -value - slack,
    }
    if t_star <= INFEASIBLE_MARGIN and cert["certified_margin"] > 0:
        return MembershipVerdict(xi, "infeasible", t_star, None, cert, "dual functional separates p from the canonical process set")
    return MembershipVerdict(xi, "undecided", t_star, s_mat, cert, "optimal margin too close to zero to decide")


def membership_all_triggers(p: ConditionalDistribution, tol: Tolerances | None = None, backend: str | None = None) -> list[MembershipVerdict]:
    return [membership_necessary(p, xi, tol, backend) for xi in p.scenario.trigger_vectors()]
