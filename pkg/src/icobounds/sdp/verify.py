"""Independent re-verification of solver reports.

Block values are re-assembled from the coordinate form of the data and
eigenvalues come from the QR-iteration driver (``?syev``/``?heev``), not the
relatively robust representation driver used inside the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .program import ConicProgram, SolveReport, Tolerances


@dataclass
class VerificationRecord:
    ok: bool
    status: str
    checks: dict = field(default_factory=dict)
    issues: list[str] = field(default_factory=list)


def _assemble(constant: np.ndarray, coefficients, y: np.ndarray) -> np.ndarray:
    n = constant.shape[0]
    flat = np.array(constant, dtype=complex).reshape(-1)
    coo = coefficients.tocoo()
    np.add.at(flat, coo.col, coo.data * y[coo.row])
    mat = flat.reshape(n, n)
    return 0.5 * (mat + mat.conj().T)


def _min_eig(mat: np.ndarray) -> float:
    if not np.any(np.imag(mat)):
        mat = np.real(mat)
    return float(sla.eigh(mat, eigvals_only=True, driver="ev")[0])


def _pair(mat_a: np.ndarray, mat_b: np.ndarray) -> float:
    """``Tr(A B)`` for Hermitian arguments."""
    return float(np.real(np.sum(mat_a * mat_b.T)))


def verify(program: ConicProgram, report: SolveReport, tol: Tolerances | None = None) -> VerificationRecord:
    tol = tol or Tolerances()
    checks: dict = {}
    issues: list[str] = []
    sign = 1.0 if program.sense == "max" else -1.0
    y = np.asarray(report.y, dtype=float)
    e = program.eq_matrix
    f = program.eq_rhs

    def flag(cond: bool, text: str) -> None:
        if not cond:
            issues.append(text)

    if report.status in ("optimal", "undecided") and not np.all(np.isfinite(y)):
        issues.append("report carries no primal point")
    elif report.status in ("optimal", "undecided"):
        eigs = [_min_eig(_assemble(b.constant, b.coefficients, y)) for b in program.blocks]
        eq_res = float(np.max(np.abs(e @ y - f))) if f.size else 0.0
        primal = float(program.objective @ y + program.objective_constant)
        checks.update(block_min_eigs=eigs, eq_residual=eq_res, primal_value=primal)
        x_eigs = [_min_eig(np.asarray(x)) for x in report.dual_blocks]
        grad = sign * program.objective.astype(float)
        raw = 0.0
        for b, x in zip(program.blocks, report.dual_blocks):
            x = np.asarray(x)
            coo = b.coefficients.tocoo()
            n = b.size
            r, c = np.divmod(coo.col, n)
            # <F_j, X> = sum_rc F_j[r, c] X[c, r]
            np.add.at(grad, coo.row, np.real(coo.data * x[c, r]))
            raw += _pair(b.constant, x)
        lam = np.asarray(report.eq_multipliers, dtype=float)
        if lam.size:
            grad += e.T @ lam
            raw -= float(f @ lam)
        dual = sign * raw + program.objective_constant
        dres = float(np.max(np.abs(grad))) if grad.size else 0.0
        gap = abs(primal - dual)
        checks.update(dual_min_eigs=x_eigs, dual_residual=dres, dual_value=dual, gap=gap)
        scale = 1 + abs(primal) + abs(dual)
        weak_ok = (primal <= dual + 1e-9 * scale) if sign > 0 else (primal >= dual - 1e-9 * scale)
        checks["weak_duality"] = weak_ok
        # agreement with the report
        flag(abs(primal - report.primal_value) <= 10 * tol.gap * scale, "primal value differs from the report")
        flag(abs(dual - report.dual_value) <= 10 * tol.gap * scale, "dual value differs from the report")
        for k, (mine, theirs) in enumerate(zip(eigs, report.block_min_eigs)):
            flag(abs(mine - theirs) <= 10 * tol.psd + 1e-9 * abs(theirs), f"block {k} eigenvalue differs from the report")
        if report.status == "optimal":
            flag(min(eigs, default=0.0) >= -10 * tol.psd, "primal block not PSD")
            flag(eq_res <= 10 * tol.equality, "equality residual too large")
            flag(min(x_eigs, default=0.0) >= -10 * tol.psd * max(1.0, max((np.abs(x).max() for x in report.dual_blocks), default=1.0)), "dual block not PSD")
            flag(gap <= 10 * tol.gap * scale, "duality gap above tolerance")
            flag(dres <= 1e-6 * (1 + np.abs(program.objective).max(initial=0.0)), "dual stationarity residual too large")
            flag(weak_ok, "weak duality violated")
    elif report.status == "infeasible":
        cert = report.certificate
        if "equality_ray" in cert:
            w = np.asarray(cert["equality_ray"])
            lhs = float(np.max(np.abs(e.T @ w))) if w.size else 0.0
            checks.update(equality_ray_residual=lhs, equality_ray_value=float(w @ f))
            flag(lhs <= tol.infeasibility * max(1.0, np.abs(w).max()), "equality ray does not annihilate E")
            flag(float(w @ f) > 0.5, "equality ray does not separate")
        else:
            xs = [np.asarray(x) for x in cert.get("ray_blocks", [])]
            lam = np.asarray(cert.get("ray_multipliers", np.zeros(0)))
            grad = np.zeros(program.n_vars)
            value = 0.0
            for b, x in zip(program.blocks, xs):
                coo = b.coefficients.tocoo()
                r, c = np.divmod(coo.col, b.size)
                np.add.at(grad, coo.row, np.real(coo.data * x[c, r]))
                value += _pair(b.constant, x)
            if lam.size:
                grad += e.T @ lam
                value -= float(f @ lam)
            eigs = [_min_eig(x) for x in xs]
            res = float(np.max(np.abs(grad))) if grad.size else 0.0
            checks.update(ray_min_eigs=eigs, ray_residual=res, ray_value=value)
            flag(min(eigs, default=0.0) >= -tol.infeasibility, "ray block not PSD")
            flag(res <= 10 * tol.infeasibility, "ray does not satisfy the homogeneous dual equations")
            flag(value < -0.5, "ray does not certify infeasibility")
    elif report.status == "unbounded":
        ray = np.asarray(report.certificate.get("ray_y", np.zeros(program.n_vars)))
        eigs = [_min_eig(_assemble(np.zeros_like(b.constant), b.coefficients, ray)) for b in program.blocks]
        eq_res = float(np.max(np.abs(e @ ray))) if f.size else 0.0
        gain = float(sign * program.objective @ ray)
        checks.update(ray_min_eigs=eigs, ray_eq_residual=eq_res, ray_gain=gain)
        flag(min(eigs, default=0.0) >= -10 * tol.infeasibility, "unbounded ray leaves the cone")
        flag(eq_res <= 10 * tol.infeasibility, "unbounded ray violates equalities")
        flag(gain > 0.5, "unbounded ray does not improve the objective")
    return VerificationRecord(ok=not issues, status=report.status, checks=checks, issues=issues)
