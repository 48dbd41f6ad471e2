"""Optional backend that hands programs to an external conic solver through cvxpy.

The report is filled in the same conventions as the built-in solver so that
:func:`icobounds.sdp.verify` can check it.  Equality multipliers are
recomputed from the stationarity conditions instead of trusting the sign
conventions of the external solver.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.linalg as sla

from .ipm import complexify_dual, dual_residual, realify_block
from .program import ConicProgram, SolveReport, Tolerances


def _solver_options(solver: str, tol: Tolerances) -> dict:
    if solver == "CLARABEL":
        return {"tol_gap_rel": tol.gap, "tol_gap_abs": tol.gap, "tol_feas": tol.equality, "max_iter": max(tol.max_iter, 200)}
    if solver == "SCS":
        return {"eps": min(tol.gap, 1e-6), "max_iters": 100000}
    return {}


def solve_cvxpy(program: ConicProgram, tol: Tolerances | None = None, solver: str | None = None, verbose: bool = False) -> SolveReport:
    import cvxpy as cp

    tol = tol or Tolerances()
    solver = solver or "CLARABEL"
    t0 = time.perf_counter()
    y = cp.Variable(program.n_vars)
    cons = []
    psd_cons = []
    realified = []
    data = []
    for b in program.blocks:
        if b.is_real:
            c, a = np.real(b.constant), b.coefficients.real.tocsr()
            realified.append(False)
        else:
            c, a = realify_block(b)
            realified.append(True)
        data.append((c, a))
        m = c.shape[0]
        expr = cp.reshape(a.T @ y, (m, m), order="C") + c
        con = 0.5 * (expr + expr.T) >> 0
        psd_cons.append(con)
        cons.append(con)
    eq_con = None
    if program.eq_rhs.size:
        eq_con = program.eq_matrix @ y == program.eq_rhs
        cons.append(eq_con)
    obj = program.objective @ y
    prob = cp.Problem(cp.Maximize(obj) if program.sense == "max" else cp.Minimize(obj), cons)
    try:
        prob.solve(solver=solver, verbose=verbose, **_solver_options(solver, tol))
    except cp.error.SolverError as exc:
        return _empty(program, "undecided", f"{solver} failed: {exc}", t0, solver)
    status = prob.status
    if status in ("infeasible", "infeasible_inaccurate"):
        rep = _empty(program, "undecided", f"{solver}: {status}", t0, solver)
        cert = _infeasibility_ray(program, data, solver, tol)
        if status == "infeasible" and cert is not None:
            rep.status, rep.certificate = "infeasible", cert
        return rep
    if status in ("unbounded", "unbounded_inaccurate"):
        return _empty(program, "unbounded" if status == "unbounded" else "undecided", f"{solver}: {status}", t0, solver)
    if y.value is None:
        return _empty(program, "undecided", f"{solver}: {status}", t0, solver)

    yv = np.asarray(y.value, dtype=float)
    sign = 1.0 if program.sense == "max" else -1.0
    xs = []
    for con, cplx in zip(psd_cons, realified):
        x = np.asarray(con.dual_value, dtype=float)
        x = 0.5 * (x + x.T)
        if np.trace(x) < 0:
            x = -x
        xs.append(complexify_dual(x) if cplx else x)
    # multipliers from  sign*c + <F_j, X> + E^T lam = 0
    grad = _stationarity(program, xs, sign * program.objective)
    lam = np.zeros(program.eq_rhs.size)
    if program.eq_rhs.size:
        lam = np.linalg.lstsq(program.eq_matrix.T.toarray(), -grad, rcond=None)[0]
    raw = sum(float(np.real(np.sum(b.constant * x.T))) for b, x in zip(program.blocks, xs)) - float(program.eq_rhs @ lam)
    dual = sign * raw + program.objective_constant
    primal = program.objective_value(yv)
    eigs = []
    for b in program.blocks:
        v = b.value(yv)
        eigs.append(float(sla.eigvalsh(0.5 * (v + v.conj().T), subset_by_index=[0, 0])[0]))
    eqr = float(np.max(np.abs(program.eq_matrix @ yv - program.eq_rhs))) if program.eq_rhs.size else 0.0
    gap = abs(primal - dual)
    ok = status == "optimal" and min(eigs, default=0.0) >= -tol.psd and eqr <= tol.equality and gap <= tol.gap * (1 + abs(primal) + abs(dual))
    return SolveReport(
        status="optimal" if ok else "undecided",
        primal_value=primal,
        dual_value=dual,
        gap=gap,
        y=yv,
        block_min_eigs=eigs,
        eq_residual=eqr,
        iterations=int(prob.solver_stats.num_iters or 0),
        wall_time=time.perf_counter() - t0,
        dual_blocks=xs,
        eq_multipliers=lam,
        dual_residual=dual_residual(program, xs, lam),
        message=f"{solver}: {status}",
        backend=f"cvxpy:{solver}",
    )


def _stationarity(program: ConicProgram, xs, base: np.ndarray) -> np.ndarray:
    grad = base.astype(float).copy()
    for b, x in zip(program.blocks, xs):
        coo = b.coefficients.tocoo()
        r, c = np.divmod(coo.col, b.size)
        np.add.at(grad, coo.row, np.real(coo.data * x[c, r]))
    return grad


def _infeasibility_ray(program: ConicProgram, data, solver: str, tol: Tolerances) -> dict | None:
    """Find a ray (X >= 0, lam) with A(X) + E^T lam = 0 and <F0,X> - f.lam = -1.

    cvxpy does not return Farkas certificates, so the alternative system is
    solved as a separate feasibility problem.
    """
    import cvxpy as cp

    f = program.eq_rhs
    if f.size:
        # inconsistent equalities: the component of f outside range(E) separates
        e = program.eq_matrix.toarray()
        w = f - e @ np.linalg.lstsq(e, f, rcond=None)[0]
        if float(w @ f) > 1e-9 * (1 + np.abs(f).max()):
            return {"equality_ray": w / float(w @ f)}
    xv = [cp.Variable((c.shape[0], c.shape[0]), symmetric=True) for c, _ in data]
    stat = 0
    value = 0
    for x, (c, a) in zip(xv, data):
        stat = stat + a @ cp.vec(x, order="C")
        value = value + cp.sum(cp.multiply(c, x))
    cons = [x >> 0 for x in xv]
    lam = None
    if f.size:
        lam = cp.Variable(f.size)
        stat = stat + program.eq_matrix.T @ lam
        value = value - f @ lam
    cons += [stat == 0, value == -1]
    prob = cp.Problem(cp.Minimize(sum(cp.trace(x) for x in xv)), cons)
    try:
        prob.solve(solver=solver, **_solver_options(solver, tol))
    except cp.error.SolverError:
        return None
    if prob.status != "optimal":
        return None
    xs = []
    for x, b in zip(xv, program.blocks):
        m = np.asarray(x.value, dtype=float)
        m = 0.5 * (m + m.T)
        xs.append(m if b.is_real else complexify_dual(m))
    lam_v = np.asarray(lam.value, dtype=float) if lam is not None else np.zeros(0)
    return {"ray_blocks": xs, "ray_multipliers": lam_v}


def _empty(program: ConicProgram, status: str, message: str, t0: float, solver: str) -> SolveReport:
    nan = float("nan")
    return SolveReport(
        status=status,
        primal_value=nan,
        dual_value=nan,
        gap=nan,
        y=np.full(program.n_vars, nan),
        block_min_eigs=[nan] * len(program.blocks),
        eq_residual=nan,
        iterations=0,
        wall_time=time.perf_counter() - t0,
        message=message,
        backend=f"cvxpy:{solver}",
    )
