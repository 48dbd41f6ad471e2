"""Infeasible primal-dual interior-point method for LMI programs.

Internally every program is brought to

    (D)  max b.y   s.t.  Z = C - sum_j y_j A_j >= 0,   E y = f
    (P)  min <C,X> - f.lam   s.t.  <A_j, X> - (E^T lam)_j = b_j,  X >= 0

with ``C = F_0``, ``A_j = -F_j`` and real symmetric blocks (complex Hermitian
blocks are embedded as ``[[Re, -Im], [Im, Re]]``).  Search directions are the
HKM ones with a Mehrotra predictor-corrector.  The Schur complement is
assembled as a Gram matrix ``M_ij = <W_i, W_j>`` with
``W_j = L_Z^{-1} A_j L_X`` so it stays positive semidefinite in floating
point.  Equalities enter through the augmented system
``[[M, -E^T], [E, 0]]``; nothing is eliminated, which keeps block sparsity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .program import ConicProgram, PSDBlock, SolveReport, Tolerances


def realify_block(block: PSDBlock) -> tuple[np.ndarray, sp.csr_matrix]:
    n = block.size
    c = block.constant
    creal = np.block([[c.real, -c.imag], [c.imag, c.real]])
    coo = block.coefficients.tocoo()
    r, col = np.divmod(coo.col, n)
    re, im = coo.data.real, coo.data.imag
    two = 2 * n
    idx = [r * two + col, r * two + n + col, (n + r) * two + col, (n + r) * two + n + col]
    vals = [re, -im, im, re]
    rows = np.tile(coo.row, 4)
    coef = sp.csr_matrix((np.concatenate(vals), (rows, np.concatenate(idx))), shape=(block.coefficients.shape[0], two * two))
    coef.eliminate_zeros()
    return creal, coef


def complexify_dual(x: np.ndarray) -> np.ndarray:
    """Map the dual of a realified block back to the Hermitian block."""
    n = x.shape[0] // 2
    p, q, r = x[:n, :n], x[n:, :n], x[n:, n:]
    return (p + r) + 1j * (q - q.T)


@dataclass
class _Block:
    n: int
    c: np.ndarray
    support: np.ndarray  # variable indices with nonzero coefficient
    a_rows: sp.csr_matrix  # (len(support), n*n): vec of A_j = -F_j
    a_stack: sp.csr_matrix  # (len(support)*n, n)
    realified: bool

    def aop(self, x: np.ndarray) -> np.ndarray:
        return self.a_rows @ x.reshape(-1)

    def aop_t(self, y_local: np.ndarray) -> np.ndarray:
        return np.asarray(self.a_rows.T @ y_local).reshape(self.n, self.n)

    def schur(self, lx: np.ndarray, lz_inv: np.ndarray) -> np.ndarray:
        m, n = len(self.support), self.n
        if m == 0:
            return np.zeros((0, 0))
        t = np.asarray(self.a_stack @ lx).reshape(m, n, n)
        w = np.matmul(lz_inv, t).reshape(m, n * n)
        return w @ w.T


def _prepare_blocks(program: ConicProgram) -> list[_Block]:
    out = []
    for blk in program.blocks:
        if blk.is_real:
            c = np.real(blk.constant).astype(float)
            coef = sp.csr_matrix(blk.coefficients.real) if np.iscomplexobj(blk.coefficients.data) else blk.coefficients
            realified = False
        else:
            c, coef = realify_block(blk)
            realified = True
        c = 0.5 * (c + c.T)
        n = c.shape[0]
        coef = sp.csr_matrix(coef, dtype=float)
        support = np.flatnonzero(np.diff(coef.indptr))
        a_rows = -coef[support]
        # symmetrize each coefficient matrix
        if a_rows.shape[0]:
            coo = a_rows.tocoo()
            r, col = np.divmod(coo.col, n)
            sym = sp.csr_matrix(
                (np.concatenate([coo.data, coo.data]) * 0.5, (np.concatenate([coo.row, coo.row]), np.concatenate([coo.col, col * n + r]))),
                shape=a_rows.shape,
            )
            sym.sum_duplicates()
            sym.eliminate_zeros()
            a_rows = sym
        coo = a_rows.tocoo()
        r, col = np.divmod(coo.col, n)
        a_stack = sp.csr_matrix((coo.data, (coo.row * n + r, col)), shape=(len(support) * n, n))
        out.append(_Block(n, c, support, sp.csr_matrix(a_rows), a_stack, realified))
    return out


def _reduce_equalities(e: np.ndarray, f: np.ndarray, rank_tol: float = 1e-10):
    """Drop dependent rows; return (E_kept, f_kept, consistency residual vector)."""
    if e.shape[0] == 0:
        return e, f, np.zeros(0), np.zeros(0, dtype=int)
    q, r, piv = sla.qr(e.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rank_tol * max(diag[0], 1e-300))) if diag.size else 0
    keep = np.sort(piv[:rank])
    y_ls, *_ = np.linalg.lstsq(e, f, rcond=None)
    resid = f - e @ y_ls
    return e[keep], f[keep], resid, keep


def _max_step(l: np.ndarray, d: np.ndarray) -> float:
    """Largest t with L L^T + t D >= 0."""
    tmp = sla.solve_triangular(l, d, lower=True)
    tmp = sla.solve_triangular(l, tmp.T, lower=True)
    lam = sla.eigvalsh(0.5 * (tmp + tmp.T), subset_by_index=[0, 0])[0]
    return math.inf if lam >= 0 else -1.0 / lam


def solve_ipm(program: ConicProgram, tol: Tolerances | None = None, verbose: bool = False) -> SolveReport:
    # variables that touch no block and no equality make the Newton system singular
    used = np.zeros(program.n_vars, dtype=bool)
    for blk in program.blocks:
        used[np.unique(blk.coefficients.tocoo().row)] = True
    used[np.unique(program.eq_matrix.tocoo().col)] = True
    if used.all():
        return _solve_core(program, tol, verbose)
    t0 = time.perf_counter()
    sign = 1.0 if program.sense == "max" else -1.0
    idle = np.flatnonzero(~used)
    gains = sign * program.objective[idle]
    if np.any(gains != 0):
        j = idle[np.argmax(np.abs(gains))]
        ray = np.zeros(program.n_vars)
        ray[j] = 1.0 / (sign * program.objective[j])
        rep = _infeasible_equalities(program, np.zeros(0), t0)
        rep.status, rep.message = "unbounded", f"variable {j} is unconstrained and enters the objective"
        rep.y = np.full(program.n_vars, math.nan)
        rep.eq_residual = math.nan
        rep.certificate = {"ray_y": ray, "ray_residual": 0.0}
        return rep
    keep = np.flatnonzero(used)
    sub = ConicProgram(
        n_vars=keep.size,
        blocks=tuple(PSDBlock(b.constant, b.coefficients[keep], b.name) for b in program.blocks),
        eq_matrix=program.eq_matrix[:, keep],
        eq_rhs=program.eq_rhs,
        objective=program.objective[keep],
        sense=program.sense,
        objective_constant=program.objective_constant,
        var_names=tuple(program.var_names[k] for k in keep) if program.var_names else (),
    )
    rep = _solve_core(sub, tol, verbose)
    y = np.zeros(program.n_vars)
    y[keep] = rep.y
    rep.y = y
    if "ray_y" in rep.certificate:
        ray = np.zeros(program.n_vars)
        ray[keep] = rep.certificate["ray_y"]
        rep.certificate["ray_y"] = ray
    return rep


def _solve_core(program: ConicProgram, tol: Tolerances | None = None, verbose: bool = False) -> SolveReport:
    tol = tol or Tolerances()
    t0 = time.perf_counter()
    m = program.n_vars
    sign = 1.0 if program.sense == "max" else -1.0
    b = sign * program.objective
    blocks = _prepare_blocks(program)

    e_full = program.eq_matrix.toarray()
    f_full = program.eq_rhs.astype(float)
    e, f, cons, keep = _reduce_equalities(e_full, f_full)
    if cons.size and np.linalg.norm(cons) > tol.equality * (1 + np.linalg.norm(f_full)):
        return _infeasible_equalities(program, cons, t0)
    p = e.shape[0]

    nu = sum(bl.n for bl in blocks)
    # starting point
    xs, zs = [], []
    for bl in blocks:
        if len(bl.support):
            norms = np.sqrt(np.asarray(bl.a_rows.multiply(bl.a_rows).sum(axis=1)).ravel())
            bb = np.abs(b[bl.support])
            zeta = max(10.0, math.sqrt(bl.n), bl.n * float(np.max((1 + bb) / (1 + norms))))
            eta = max(10.0, math.sqrt(bl.n), float(norms.max()), float(np.linalg.norm(bl.c)))
        else:
            zeta = eta = max(10.0, math.sqrt(bl.n), float(np.linalg.norm(bl.c)))
        xs.append(zeta * np.eye(bl.n))
        zs.append(eta * np.eye(bl.n))
    y = np.zeros(m)
    lam = np.zeros(p)

    norm_b = np.linalg.norm(b)
    norm_c = max((np.linalg.norm(bl.c) for bl in blocks), default=0.0)
    norm_f = np.linalg.norm(f)
    status, message = "undecided", "iteration limit reached"
    step_p = step_d = 0.0
    it = 0
    history = []
    best = None

    def aop_all(mats):
        out = np.zeros(m)
        for bl, x in zip(blocks, mats):
            if len(bl.support):
                out[bl.support] += bl.aop(x)
        return out

    def aop_t(bl, vec):
        return bl.aop_t(vec[bl.support]) if len(bl.support) else np.zeros((bl.n, bl.n))

    for it in range(1, tol.max_iter + 1):
        ax = aop_all(xs)
        rp = b - ax + (e.T @ lam if p else 0.0)
        rds = [bl.c - z - aop_t(bl, y) for bl, z in zip(blocks, zs)]
        re = f - e @ y if p else np.zeros(0)
        pobj = sum(float(np.vdot(bl.c, x)) for bl, x in zip(blocks, xs)) - float(f @ lam)
        dobj = float(b @ y)
        mu = sum(float(np.vdot(x, z)) for x, z in zip(xs, zs)) / max(nu, 1)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / (1 + norm_b)
        dinf = max((np.linalg.norm(r) for r in rds), default=0.0) / (1 + norm_c)
        einf = np.linalg.norm(re) / (1 + norm_f) if p else 0.0
        history.append((pobj, dobj, relgap, pinf, dinf, einf))
        if verbose:
            print(f"{it:3d} pobj={pobj:+.9e} dobj={dobj:+.9e} gap={relgap:.2e} pinf={pinf:.2e} dinf={dinf:.2e} einf={einf:.2e} ap={step_p:.2f} ad={step_d:.2f}")
        feas_target = 0.1 * min(tol.equality, tol.psd)
        if relgap <= tol.gap and pinf <= feas_target and dinf <= feas_target and einf <= feas_target:
            status, message = "optimal", "converged"
            break
        score = max(relgap / tol.gap, pinf / feas_target, dinf / feas_target, einf / feas_target)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in xs], y.copy(), [z.copy() for z in zs], lam.copy(), it)
        # improving rays
        cert = _detect_rays(blocks, xs, ys=y, zs=zs, lam=lam, e=e, f=f, b=b, pobj=pobj, dobj=dobj, tol=tol)
        if cert is not None:
            status, message = cert.pop("status"), cert.pop("message")
            return _finish(program, blocks, xs, y, lam, keep, f, status, message, it, t0, sign, cert, tol)
        try:
            lxs = [np.linalg.cholesky(x) for x in xs]
            lzs = [np.linalg.cholesky(z) for z in zs]
        except np.linalg.LinAlgError:
            message = "numerical breakdown: lost positive definiteness"
            break
        lz_invs = [sla.solve_triangular(lz, np.eye(lz.shape[0]), lower=True) for lz in lzs]
        zinvs = [li.T @ li for li in lz_invs]
        mmat = np.zeros((m, m))
        for bl, lx, li in zip(blocks, lxs, lz_invs):
            if len(bl.support):
                mmat[np.ix_(bl.support, bl.support)] += bl.schur(lx, li)
        try:
            solver = _kkt_factor(mmat, e)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            message = "numerical breakdown: singular Newton system"
            break

        def direction(gs):
            rhs = rp - aop_all(gs)
            dy, dlam = solver(rhs, re)
            dzs, dxs = [], []
            for bl, x, z, zi, rd, g in zip(blocks, xs, zs, zinvs, rds, gs):
                aty = aop_t(bl, dy)
                dz = rd - aty
                t = x @ aty @ zi
                dx = g + 0.5 * (t + t.T)
                dzs.append(dz)
                dxs.append(dx)
            return dy, dlam, dxs, dzs

        def base_g(sigma_mu, corr=None):
            gs = []
            for k, (x, rd, zi) in enumerate(zip(xs, rds, zinvs)):
                t = x @ rd @ zi
                g = sigma_mu * zi - x - 0.5 * (t + t.T)
                if corr is not None:
                    c2 = corr[0][k] @ corr[1][k] @ zi
                    g -= 0.5 * (c2 + c2.T)
                gs.append(g)
            return gs

        dy_a, dl_a, dxa, dza = direction(base_g(0.0))
        ap = min(1.0, min((_max_step(lx, d) for lx, d in zip(lxs, dxa)), default=math.inf))
        ad = min(1.0, min((_max_step(lz, d) for lz, d in zip(lzs, dza)), default=math.inf))
        xz_aff = sum(float(np.vdot(x + ap * dx, z + ad * dz)) for x, z, dx, dz in zip(xs, zs, dxa, dza))
        ratio = xz_aff / max(mu * nu, 1e-300)
        expo = max(1.0, 3 * min(ap, ad) ** 2)
        sigma = min(1.0, max(0.0, ratio) ** expo)
        dy, dl, dxs, dzs = direction(base_g(sigma * mu, (dxa, dza)))
        gamma = 0.9 + 0.09 * min(step_p, step_d)
        step_p = min(1.0, gamma * min((_max_step(lx, d) for lx, d in zip(lxs, dxs)), default=math.inf))
        step_d = min(1.0, gamma * min((_max_step(lz, d) for lz, d in zip(lzs, dzs)), default=math.inf))
        xs = [x + step_p * dx for x, dx in zip(xs, dxs)]
        xs = [0.5 * (x + x.T) for x in xs]
        lam = lam + step_p * dl
        y = y + step_d * dy
        zs = [z + step_d * dz for z, dz in zip(zs, dzs)]
        zs = [0.5 * (z + z.T) for z in zs]
        if step_p < 1e-10 and step_d < 1e-10:
            message = "numerical breakdown: step length vanished"
            break
    if status != "optimal" and best is not None:
        _, xs, y, zs, lam, _ = best
    return _finish(program, blocks, xs, y, lam, keep, f, status, message, it, t0, sign, {}, tol)


def _kkt_factor(mmat: np.ndarray, e: np.ndarray):
    p = e.shape[0]
    m = mmat.shape[0]
    if p == 0:
        try:
            cf = sla.cho_factor(mmat, lower=True, check_finite=False)
            return lambda r1, r2: (sla.cho_solve(cf, r1, check_finite=False), np.zeros(0))
        except sla.LinAlgError:
            pass
    kkt = np.zeros((m + p, m + p))
    kkt[:m, :m] = mmat
    kkt[:m, m:] = -e.T
    kkt[m:, :m] = e
    lu = sla.lu_factor(kkt, check_finite=False)

    def solve(r1, r2):
        sol = sla.lu_solve(lu, np.concatenate([r1, r2]), check_finite=False)
        # one step of iterative refinement
        res = np.concatenate([r1, r2]) - kkt @ sol
        sol = sol + sla.lu_solve(lu, res, check_finite=False)
        return sol[:m], sol[m:]

    return solve


def _detect_rays(blocks, xs, ys, zs, lam, e, f, b, pobj, dobj, tol):
    """Normalized improving rays that certify infeasibility or unboundedness."""
    # (P) ray: X >= 0 with A(X) - E^T lam = 0 and <C,X> - f.lam < 0  => LMI infeasible
    if pobj < -1.0:
        scale = -pobj
        ax = np.zeros(len(b))
        for bl, x in zip(blocks, xs):
            if len(bl.support):
                ax[bl.support] += bl.aop(x)
        res = ax - (e.T @ lam if e.shape[0] else 0.0)
        if np.linalg.norm(res) / scale <= tol.infeasibility:
            return {
                "status": "infeasible",
                "message": "primal ray certifies that the LMI is infeasible",
                "ray_blocks": [x / scale for x in xs],
                "ray_multipliers": lam / scale,
                "ray_residual": float(np.linalg.norm(res) / scale),
            }
    # (D) ray: direction y with b.y > 0, -sum y_j A_j >= 0, E y = 0  => unbounded
    if dobj > 1.0:
        scale = dobj
        worst = 0.0
        for bl in blocks:
            aty = bl.aop_t(ys[bl.support]) if len(bl.support) else np.zeros((bl.n, bl.n))
            worst = min(worst, float(sla.eigvalsh(-aty / scale, subset_by_index=[0, 0])[0]))
        eres = np.linalg.norm(e @ ys) / scale if e.shape[0] else 0.0
        if -worst <= tol.infeasibility and eres <= tol.infeasibility:
            return {
                "status": "unbounded",
                "message": "dual ray certifies that the objective is unbounded",
                "ray_y": ys / scale,
                "ray_residual": float(max(-worst, eres)),
            }
    return None


def _infeasible_equalities(program: ConicProgram, resid: np.ndarray, t0: float) -> SolveReport:
    return SolveReport(
        status="infeasible",
        primal_value=math.nan,
        dual_value=math.nan,
        gap=math.nan,
        y=np.zeros(program.n_vars),
        block_min_eigs=[math.nan] * len(program.blocks),
        eq_residual=float(np.linalg.norm(resid)),
        iterations=0,
        wall_time=time.perf_counter() - t0,
        message="equality constraints are inconsistent",
        certificate={"equality_ray": resid / max(float(resid @ resid), 1e-300)},
    )


def _finish(program, blocks, xs, y, lam, keep, f, status, message, it, t0, sign, cert, tol) -> SolveReport:
    dual_blocks = [complexify_dual(x) if bl.realified else x.copy() for bl, x in zip(blocks, xs)]
    primal = program.objective_value(y)
    raw = sum(float(np.vdot(bl.c, x)) for bl, x in zip(blocks, xs)) - float(f @ lam)
    dual = sign * raw + program.objective_constant
    eigs = [float(sla.eigvalsh(_herm(blk.value(y)), subset_by_index=[0, 0])[0]) for blk in program.blocks]
    eqr = float(np.max(np.abs(program.eq_matrix @ y - program.eq_rhs))) if program.eq_rhs.size else 0.0
    # full multiplier vector for the original (unreduced) equality rows
    lam_full = np.zeros(program.eq_rhs.size)
    lam_full[keep] = lam
    dres = dual_residual(program, dual_blocks, lam_full)
    if status == "optimal" and (min(eigs, default=0.0) < -tol.psd or eqr > tol.equality):
        status, message = "undecided", "converged iterate fails the residual tolerances"
    for k, v in list(cert.items()):
        if k == "ray_blocks":
            cert[k] = [complexify_dual(x) if bl.realified else x for bl, x in zip(blocks, v)]
    return SolveReport(
        status=status,
        primal_value=primal,
        dual_value=dual,
        gap=abs(primal - dual),
        y=y,
        block_min_eigs=eigs,
        eq_residual=eqr,
        iterations=it,
        wall_time=time.perf_counter() - t0,
        dual_blocks=dual_blocks,
        eq_multipliers=lam_full,
        dual_residual=dres,
        message=message,
        certificate=cert,
    )


def _herm(mat):
    mat = 0.5 * (mat + mat.conj().T)
    return mat.real if not np.any(np.imag(mat)) else mat


def dual_residual(program: ConicProgram, dual_blocks, lam_full) -> float:
    """``|| sign*c + sum_k <F_kj, X_k> + E^T lam ||_inf`` in the internal max form.

    With ``A_j = -F_j`` the stationarity condition reads
    ``-<F_j, X> - (E^T lam)_j = b_j``.
    """
    sign = 1.0 if program.sense == "max" else -1.0
    g = sign * program.objective.copy()
    for blk, x in zip(program.blocks, dual_blocks):
        g += np.real(blk.coefficients.conj() @ np.asarray(x, dtype=complex).reshape(-1)) if np.iscomplexobj(blk.coefficients.data) else blk.coefficients @ np.real(x).reshape(-1)
    if lam_full.size:
        g += program.eq_matrix.T @ lam_full
    return float(np.max(np.abs(g))) if g.size else 0.0
