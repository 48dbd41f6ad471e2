"""Canonical instruments, single-trigger operators and their ICO-bound SDP.

Party ``i`` of a scenario with ``n_i`` settings and ``m_i`` outcomes acts on
``A{i}_in`` (dim m_i) and outputs on ``A{i}_out`` (dim m_i) and an auxiliary
register ``A{i}_aux`` (dim n_i) that records the setting.  For trigger
``xi_i`` the canonical instrument measures in the computational basis and
re-prepares the result when ``x_i = xi_i``; otherwise it forwards the input
untouched and reports a uniformly random outcome.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NotSingleTriggerError, ScenarioMismatchError, SolverError
from .linalg import LabeledOperator, SpaceShape, min_eigenvalue
from .nosig import PartitionedShape, ProcessConstraints, nosig_affine, nosig_span, probability_from_process
from .scenario import Correlation, Scenario, check_trigger
from .sdp import ProgramBuilder, Tolerances, solve, verify

COEFF_TOL = 1e-12


def canonical_shape(scenario: Scenario) -> PartitionedShape:
    parties = []
    for i, (n, m) in enumerate(zip(scenario.settings, scenario.outcomes), start=1):
        parties.append(([(f"A{i}_in", m)], [(f"A{i}_out", m), (f"A{i}_aux", n)]))
    return PartitionedShape(parties)


def _basis_proj(k: int, d: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[k, k] = 1.0
    return out


def _phi_proj(m: int) -> np.ndarray:
    v = np.eye(m).reshape(-1) / math.sqrt(m)
    return np.outer(v, v)


def party_factor(xi_i: int, a: int, x: int, m: int, n: int, dual: bool = False) -> np.ndarray:
    """Per-party factor of P (or of Q when ``dual``) on in (x) out (x) aux."""
    if not (0 <= a < m and 0 <= x < n and 0 <= xi_i < n):
        raise ValueError(f"index out of range: a={a}, x={x}, xi={xi_i} for m={m}, n={n}")
    if x == xi_i:
        pa = _basis_proj(a, m)
        return np.kron(np.kron(pa, pa), _basis_proj(x, n))
    fac = _phi_proj(m) / (m if dual else 1.0)
    return np.kron(fac, _basis_proj(x, n))


def _check_indices(scenario: Scenario, a, x):
    a, x = tuple(a), tuple(x)
    if len(a) != scenario.parties or len(x) != scenario.parties:
        raise ValueError("index tuples must have one entry per party")
    return a, x


def projector_P(xi, a, x, scenario: Scenario) -> LabeledOperator:
    xi = check_trigger(scenario, xi)
    a, x = _check_indices(scenario, a, x)
    mat = np.ones((1, 1))
    for i in range(scenario.parties):
        mat = np.kron(mat, party_factor(xi[i], a[i], x[i], scenario.outcomes[i], scenario.settings[i]))
    return LabeledOperator(canonical_shape(scenario).space, mat, check=False)


def operator_Q(xi, a, x, scenario: Scenario) -> LabeledOperator:
    xi = check_trigger(scenario, xi)
    a, x = _check_indices(scenario, a, x)
    mat = np.ones((1, 1))
    for i in range(scenario.parties):
        mat = np.kron(mat, party_factor(xi[i], a[i], x[i], scenario.outcomes[i], scenario.settings[i], dual=True))
    return LabeledOperator(canonical_shape(scenario).space, mat, check=False)


# ---------------------------------------------------------------------------
# single-trigger structure


def outcome_dependence(c: Correlation, tol: float = COEFF_TOL) -> list[dict[int, int]]:
    """Per party: ``{setting: witness outcome}`` for settings where alpha depends on the outcome."""
    sc = c.scenario
    n = sc.parties
    alpha = c.coefficients
    out = []
    for i in range(n):
        dev = alpha - alpha.mean(axis=i, keepdims=True)
        dep = {}
        for x in range(sc.settings[i]):
            sl = [slice(None)] * (2 * n)
            sl[n + i] = x
            block = np.abs(dev[tuple(sl)])
            if block.max(initial=0.0) > tol:
                idx = np.unravel_index(int(np.argmax(block)), block.shape)
                dep[x] = int(idx[i])
        out.append(dep)
    return out


def single_trigger_vectors(c: Correlation, tol: float = COEFF_TOL) -> list[tuple[int, ...]]:
    """All trigger vectors for which ``c`` is single-trigger, in lexicographic order."""
    deps = outcome_dependence(c, tol)
    choices = []
    for i, dep in enumerate(deps):
        if len(dep) > 1:
            return []
        choices.append(sorted(dep) if dep else list(range(c.scenario.settings[i])))
    return [tuple(v) for v in itertools.product(*choices)]


def detect_trigger(c: Correlation, xi=None, tol: float = COEFF_TOL) -> tuple[int, ...]:
    deps = outcome_dependence(c, tol)
    offending = [(i, x, a) for i, dep in enumerate(deps) if len(dep) > 1 for x, a in sorted(dep.items())]
    if offending:
        raise NotSingleTriggerError(
            "coefficients depend on the outcome of a party at more than one setting: "
            + ", ".join(f"party {i} setting {x} outcome {a}" for i, x, a in offending),
            offending,
        )
    if xi is None:
        return single_trigger_vectors(c, tol)[0]
    xi = check_trigger(c.scenario, xi)
    bad = [(i, x, a) for i, dep in enumerate(deps) for x, a in dep.items() if x != xi[i]]
    if bad:
        raise NotSingleTriggerError(
            f"not single-trigger for xi={xi}: " + ", ".join(f"party {i} setting {x} outcome {a}" for i, x, a in bad), bad
        )
    return xi


@dataclass
class SingleTriggerOperator:
    triggers: tuple[int, ...]
    operator: LabeledOperator
    coefficients: np.ndarray
    scenario: Scenario

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix


def assemble_omega(scenario: Scenario, xi: Sequence[int], alpha: np.ndarray) -> np.ndarray:
    """``sum_{a,x} alpha[a,x] P_{xi,a,x}`` as a dense matrix (non-trigger outcomes summed first)."""
    n = scenario.parties
    dim = canonical_shape(scenario).space.dim
    omega = np.zeros((dim, dim))
    for x in scenario.setting_tuples():
        sub = alpha[(Ellipsis,) + tuple(x)]
        trig = [i for i in range(n) if x[i] == xi[i]]
        reduced = sub.sum(axis=tuple(i for i in range(n) if i not in trig))
        for a_trig in itertools.product(*(range(scenario.outcomes[i]) for i in trig)):
            w = reduced[a_trig] if trig else float(reduced)
            if w == 0.0:
                continue
            a_full = [0] * n
            for i, ai in zip(trig, a_trig):
                a_full[i] = ai
            mat = np.ones((1, 1))
            for i in range(n):
                mat = np.kron(mat, party_factor(xi[i], a_full[i], x[i], scenario.outcomes[i], scenario.settings[i]))
            omega += w * mat
    return omega


def single_trigger_operator(c: Correlation, xi=None) -> SingleTriggerOperator:
    xi = detect_trigger(c, xi)
    omega = assemble_omega(c.scenario, xi, c.coefficients)
    op = LabeledOperator(canonical_shape(c.scenario).space, omega, check=False)
    return SingleTriggerOperator(xi, op, np.array(c.coefficients), c.scenario)


def recover_coefficients(omega, xi, scenario: Scenario, check_constant: bool = True, tol: float = 1e-9) -> np.ndarray:
    """``alpha[a, x] = Tr[Omega Q_{xi,a,x}]`` for every entry of the table.

    With ``check_constant`` the recovered table must be constant in the
    outcomes of non-trigger parties; anything else means Omega is not in the
    span of the P operators.
    """
    xi = check_trigger(scenario, xi)
    mat = omega.matrix if isinstance(omega, LabeledOperator) else np.asarray(omega)
    n = scenario.parties
    table = np.zeros(scenario.table_shape)
    dims = [m * m * s for m, s in zip(scenario.outcomes, scenario.settings)]
    t = mat.reshape(tuple(dims) * 2)
    for x in scenario.setting_tuples():
        for a in scenario.outcome_tuples():
            acc = t
            for i in range(n):
                q = party_factor(xi[i], a[i], x[i], scenario.outcomes[i], scenario.settings[i], dual=True)
                acc = np.tensordot(acc, q, axes=([0, n - i], [1, 0]))
            table[a + x] = float(np.real(acc))
    if check_constant:
        for i in range(n):
            for x in range(scenario.settings[i]):
                if x == xi[i]:
                    continue
                sl = [slice(None)] * (2 * n)
                sl[n + i] = x
                part = table[tuple(sl)]
                if np.max(np.abs(part - part.mean(axis=i, keepdims=True)), initial=0.0) > tol:
                    raise ValueError(f"recovered coefficients vary with the outcome of party {i} at non-trigger setting {x}")
    return table


def operator_span_residual(omega: np.ndarray, xi, scenario: Scenario) -> float:
    """Distance between Omega and ``sum Tr[Omega Q] P`` (zero iff Omega is in the P span)."""
    table = recover_coefficients(omega, xi, scenario, check_constant=False)
    rebuilt = assemble_omega(scenario, xi, table)
    return float(np.max(np.abs(np.asarray(omega) - rebuilt)))


@dataclass
class CanonicalInstrumentSet:
    scenario: Scenario
    triggers: tuple[int, ...]
    choi: list  # choi[i][x][a] -> ndarray on in (x) out (x) aux

    def as_labeled(self) -> list:
        shape = canonical_shape(self.scenario)
        return [[[LabeledOperator(p.shape, m, check=False) for m in setting] for setting in party] for party, p in zip(self.choi, shape.parties)]


def canonical_instruments(scenario: Scenario, xi) -> CanonicalInstrumentSet:
    """Choi operators ``M^(i)_{a|x}``: equal to the per-party P factors."""
    xi = check_trigger(scenario, xi)
    choi = []
    for i in range(scenario.parties):
        m, n = scenario.outcomes[i], scenario.settings[i]
        choi.append([[party_factor(xi[i], a, x, m, n) for a in range(m)] for x in range(n)])
    return CanonicalInstrumentSet(scenario, xi, choi)


def performance_operator(c: Correlation, instruments) -> LabeledOperator:
    """``sum_{a,x} alpha[a,x] (x)_i M^(i)_{a_i|x_i}`` for arbitrary instrument Choi operators."""
    sc = c.scenario
    inst = instruments.choi if isinstance(instruments, CanonicalInstrumentSet) else instruments
    if len(inst) != sc.parties:
        raise ScenarioMismatchError("one instrument per party required")
    labeled = isinstance(inst[0][0][0], LabeledOperator)
    mats = [[[op.matrix if labeled else np.asarray(op) for op in setting] for setting in party] for party in inst]
    for i, party in enumerate(mats):
        if len(party) != sc.settings[i] or any(len(s) != sc.outcomes[i] for s in party):
            raise ScenarioMismatchError(f"instrument of party {i} does not match the scenario")
        d = party[0][0].shape[0]
        if any(op.shape != (d, d) for s in party for op in s):
            raise ScenarioMismatchError(f"instrument of party {i} mixes operator sizes")
    dim = math.prod(p[0][0].shape[0] for p in mats)
    total = np.zeros((dim, dim), dtype=complex)
    for x in sc.setting_tuples():
        for a in sc.outcome_tuples():
            w = c.coefficients[a + x]
            if w == 0.0:
                continue
            mat = np.ones((1, 1))
            for i in range(sc.parties):
                mat = np.kron(mat, mats[i][x[i]][a[i]])
            total += w * mat
    if labeled:
        shape = SpaceShape(f for party in inst for f in party[0][0].shape.factors)
    else:
        shape = canonical_shape(sc).space if dim == canonical_shape(sc).space.dim else SpaceShape([("joint", dim)])
    return LabeledOperator(shape, total, check=False)


# ---------------------------------------------------------------------------
# the SDP


@dataclass
class IcoBoundReport:
    value: float
    primal_value: float
    dual_value: float
    gap: float
    triggers: tuple[int, ...]
    process: np.ndarray
    eta: float
    certificate: np.ndarray  # eta * C, an element of the span of Aff(NoSig)
    certificate_checks: dict
    psd_restricted: dict
    solve: dict
    offset: float = 0.0
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "triggers": list(self.triggers),
            "eta": self.eta,
            "offset": self.offset,
            "certificate_checks": self.certificate_checks,
            "psd_restricted": self.psd_restricted,
            "solver": self.solve,
            "wall_time_s": self.wall_time,
        }


def build_primal_program(omega: np.ndarray, shape: PartitionedShape):
    """``max Tr[S^T Omega]`` over process matrices S (real symmetric parametrization)."""
    cons = ProcessConstraints(shape)
    basis = cons.free.basis(real_only=True)
    builder = ProgramBuilder()
    y = builder.add_variables(basis.shape[0], "s")
    builder.add_block(cons.base.real, [(y, basis)], name="S")
    obj = basis @ omega.reshape(-1)  # Tr[D^T Omega] = sum D_ij Omega_ij
    const = float(np.sum(cons.base.real * omega))
    builder.set_objective(y, obj, "max", constant=const)
    return builder.build(), cons, basis


def certificate_checks(cert: np.ndarray, omega: np.ndarray, shape: PartitionedShape) -> dict:
    """Residuals of ``eta*C`` as a dual certificate for ``Omega``."""
    aff = nosig_affine(shape)
    eta = float(np.trace(cert).real) / shape.d_in
    c_unit = cert / eta if eta != 0 else cert
    return {
        "eta": eta,
        "min_eig_cert_minus_omega": min_eigenvalue(cert - omega),
        "affine_distance": aff.distance(c_unit),
        "min_eig_C": min_eigenvalue(c_unit),
    }


def ico_bound_single_trigger(
    c: Correlation,
    xi=None,
    tol: Tolerances | None = None,
    backend: str | None = None,
    verbose: bool = False,
) -> IcoBoundReport:
    """ICO bound of a single-trigger correlation.

    The primal maximizes over process matrices with canonical instruments.
    The solver's dual matrix X gives the certificate ``eta*C = Omega + X``,
    projected onto the span of the no-signalling affine hull.
    """
    t0 = time.perf_counter()
    st = single_trigger_operator(c, xi)
    omega = st.matrix.real
    shape = canonical_shape(c.scenario)
    program, cons, _ = build_primal_program(omega, shape)
    report = solve(program, tol, backend=backend, verbose=verbose)
    check = verify(program, report, tol)
    if report.status != "optimal":
        raise SolverError(f"single-trigger SDP ended with status {report.status}: {report.message}", report)
    s_mat = program.blocks[0].value(report.y).real
    x = np.real(report.dual_blocks[0])
    cert = nosig_span(shape).project(omega + x).real
    checks = certificate_checks(cert, omega, shape)
    checks["solver_verification_ok"] = check.ok
    checks["solver_issues"] = check.issues
    eta = checks["eta"]
    notes = []
    psd = {}
    if np.all(c.coefficients >= 0):
        # with Omega >= 0 the certificate is automatically PSD, so the
        # max-relative-entropy form (C restricted to true channels) has the same value
        psd = {
            "applies": True,
            "min_eig_C": checks["min_eig_C"],
            "value": eta,
            "agrees": bool(checks["min_eig_C"] >= -1e-7),
        }
        if not psd["agrees"]:
            notes.append("certificate is not PSD although all coefficients are nonnegative")
    else:
        psd = {"applies": False}
    return IcoBoundReport(
        value=report.primal_value + c.offset,
        primal_value=report.primal_value,
        dual_value=report.dual_value,
        gap=report.gap,
        triggers=st.triggers,
        process=s_mat,
        eta=eta,
        certificate=cert,
        certificate_checks=checks,
        psd_restricted=psd,
        solve=report.summary(),
        offset=c.offset,
        wall_time=time.perf_counter() - t0,
        notes=notes,
    )


def value_with_canonical_instruments(c: Correlation, process: np.ndarray, xi) -> float:
    """Evaluate ``c`` on the distribution produced by ``process`` and canonical instruments."""
    from .scenario import evaluate

    shape = canonical_shape(c.scenario)
    inst = canonical_instruments(c.scenario, xi)
    p = probability_from_process(process, inst.choi, shape)
    return evaluate(c, p)
