"""Command-line front end.

Exit status: 0 on success, 1 when a verification fails, 2 for a bad
configuration, 3 when a solver does not reach a usable answer.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bistochastic as bs
from . import certificates as cert
from .errors import SolverError
from .relaxation import general_ico_upper_bound, membership_all_triggers, membership_necessary
from .scenario import (
    ConditionalDistribution,
    Correlation,
    algebraic_max,
    biased_lgyni,
    biased_ocb,
    causal_bound_bipartite,
    causal_bound_bruteforce,
    evaluate,
    gyni,
    lgyni,
    ocb,
    ocb_lazy_component,
    perfect_gyni_distribution,
    uniform_distribution,
)
from .sdp import Tolerances
from .single_trigger import ico_bound_single_trigger

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

CSV_COLUMNS = ("alpha", "causal_bound", "ico_bound", "algebraic_max", "gap", "wall_time_s")

GAMES = ("gyni", "lgyni", "ocb", "biased-ocb", "biased-lgyni")
POINTS = ("perfect-gyni", "uniform", "ocb-attainment")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    game: str | None = None
    corr: str | None = None
    alpha: float | None = None
    grid: tuple[float, ...] = ()
    tol: float | None = None
    out: str | None = None
    fmt: str = "json"
    timing: bool = True
    jobs: int = 1

    def tolerances(self) -> Tolerances | None:
        return Tolerances(gap=self.tol) if self.tol is not None else None


def parse_grid(text: str) -> tuple[float, ...]:
    """``A:B:STEP`` with inclusive end point; values rounded to 12 digits."""
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must look like A:B:STEP, got {text!r}") from exc
    if not all(math.isfinite(v) for v in (a, b, step)):
        raise ConfigError("grid bounds must be finite")
    if step <= 0 or b < a:
        raise ConfigError("grid needs STEP > 0 and B >= A")
    n = int(math.floor((b - a) / step + 1e-9))
    return tuple(round(a + k * step, 12) for k in range(n + 1))


def named_correlation(game: str, alpha: float | None) -> Correlation:
    if game in ("biased-ocb", "biased-lgyni"):
        if alpha is None:
            raise ConfigError(f"--game {game} needs --alpha")
        return biased_ocb(alpha) if game == "biased-ocb" else biased_lgyni(alpha)
    if alpha is not None:
        raise ConfigError(f"--alpha has no meaning for --game {game}")
    return {"gyni": gyni, "lgyni": lgyni, "ocb": ocb}[game]()


def load_correlation(cfg: RunConfig) -> Correlation:
    if (cfg.game is None) == (cfg.corr is None):
        raise ConfigError("give exactly one of --game and --corr")
    if cfg.corr is not None:
        return Correlation.from_json(Path(cfg.corr).read_text())
    return named_correlation(cfg.game, cfg.alpha)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: (0.0 if k in ("wall_time_s", "wall_time") else _strip_timing(v)) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def render(payload, cfg: RunConfig, rows: list[dict] | None = None) -> str:
    payload = jsonable(payload)
    rows = jsonable(rows) if rows is not None else None
    if not cfg.timing:
        payload = _strip_timing(payload)
        rows = _strip_timing(rows) if rows is not None else None
    if cfg.fmt == "csv":
        if rows is None:
            raise ConfigError(f"{cfg.command} has no tabular output; use --format json")
        buf = io.StringIO()
        columns = list(CSV_COLUMNS) if set(CSV_COLUMNS) <= set(rows[0]) else list(rows[0])
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r[k], float) else r[k]) for k in columns})
        return buf.getvalue()
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands; each returns (payload, rows or None, ok)


def cmd_causal_bound(cfg: RunConfig):
    c = load_correlation(cfg)
    t0 = time.perf_counter()
    fast = causal_bound_bipartite(c)
    brute = causal_bound_bruteforce(c)
    ok = abs(fast - brute) <= 1e-12
    payload = {
        "correlation": c.name or cfg.corr,
        "causal_bound": fast,
        "causal_bound_enumerated": brute,
        "algebraic_max": algebraic_max(c),
        "agree": ok,
        "wall_time_s": time.perf_counter() - t0,
    }
    return payload, None, ok


def cmd_ico_bound(cfg: RunConfig, trigger=None):
    c = load_correlation(cfg)
    rep = ico_bound_single_trigger(c, trigger, cfg.tolerances())
    chk = rep.certificate_checks
    ok = bool(chk["solver_verification_ok"]) and chk["min_eig_cert_minus_omega"] >= -1e-6
    payload = {"correlation": c.name or cfg.corr, "causal_bound": _causal_or_none(c), **rep.to_json()}
    return payload, None, ok


def cmd_general_bound(cfg: RunConfig):
    c = load_correlation(cfg)
    rep = general_ico_upper_bound(c, cfg.tolerances())
    chk = rep.checks
    ok = bool(chk["solver_verification_ok"]) and chk["decomposition_residual"] <= 1e-6 and chk["min_eig_C_minus_Omega"] >= -1e-6
    payload = {"correlation": c.name or cfg.corr, "causal_bound": _causal_or_none(c), **rep.to_json()}
    return payload, None, ok


def _causal_or_none(c: Correlation):
    return causal_bound_bipartite(c) if c.scenario.parties == 2 else None


def named_point(name: str) -> ConditionalDistribution:
    if name == "perfect-gyni":
        return perfect_gyni_distribution()
    if name == "uniform":
        return uniform_distribution(gyni().scenario)
    return cert.ocb_process_and_instruments(1.0).distribution


def cmd_membership(cfg: RunConfig, dist: str | None, point: str | None, trigger=None):
    if (dist is None) == (point is None):
        raise ConfigError("give exactly one of --dist and --point")
    p = ConditionalDistribution.from_json(Path(dist).read_text()) if dist else named_point(point)
    tol = cfg.tolerances()
    verdicts = [membership_necessary(p, trigger, tol)] if trigger is not None else membership_all_triggers(p, tol)
    statuses = [v.status for v in verdicts]
    overall = "infeasible" if "infeasible" in statuses else "undecided" if "undecided" in statuses else "feasible"
    payload = {"distribution": point or dist, "verdict": overall, "triggers": [v.to_json() for v in verdicts]}
    return payload, None, True


def cmd_verify_certificates(cfg: RunConfig):
    out = cert.verify_all()
    return out, None, bool(out["passed"])


def cmd_enumerate_supermaps(cfg: RunConfig):
    records = bs.extreme_point_catalog()
    hist = bs.class_histogram(records)
    consistency = bs.template_consistency()
    ok = len(records) == 256 and hist == bs.EXPECTED_CLASS_COUNTS and all(v for k, v in consistency.items() if k != "template_sizes")
    payload = {
        "count": len(records),
        "histogram": {c.value: n for c, n in hist.items()},
        "template_consistency": consistency,
        "extreme_points": [r.to_json() for r in records],
    }
    rows = [
        {"index": i, "class": r.cls.value, "signals_a_to_b": r.signals_a_to_b, "signals_b_to_a": r.signals_b_to_a, "functional": r.functional, "support": " ".join("".join(map(str, p)) for p in r.supermap.support)}
        for i, r in enumerate(records)
    ]
    return payload, rows, ok


def cmd_simulate_gyni(cfg: RunConfig):
    s = bs.gyni_supermap()
    q = bs.flip_instrument()
    p = bs.simulate(s, q, q)
    target = perfect_gyni_distribution()
    value = evaluate(gyni(), p)
    ok = np.array_equal(p.table, target.table) and value == 1.0
    payload = {"supermap": s.to_json(), "distribution": p.to_json(), "game_value": value, "exact_match": bool(np.array_equal(p.table, target.table))}
    return payload, None, ok


def _ocb_row(alpha: float, method: str, tol: float | None) -> dict:
    t0 = time.perf_counter()
    c = biased_ocb(alpha)
    row = {"alpha": alpha, "causal_bound": causal_bound_bipartite(c), "algebraic_max": algebraic_max(c), "closed_form": cert.closed_form_biased_ocb(alpha)}
    if method == "sdp":
        tols = Tolerances(gap=tol) if tol is not None else None
        vals, ok = [], True
        for xs, bstar in ((0, 0), (0, 1), (1, 0), (1, 1)):
            rep = ico_bound_single_trigger(ocb_lazy_component(xs, bstar, alpha), None, tols)
            vals.append(rep.value)
            ok &= bool(rep.certificate_checks["solver_verification_ok"])
        row["ico_bound"] = float(np.mean(vals))
        row["verified"] = ok
    else:
        certs = [cert.ocb_dual_certificate(alpha, xs, bstar) for xs in range(2) for bstar in range(2)]
        upper = float(np.mean([cc.bound for cc in certs]))
        att = cert.ocb_process_and_instruments(alpha)
        row["ico_bound"] = upper
        row["attained"] = att.value
        row["verified"] = all(cc.ok for cc in certs) and abs(upper - att.value) <= cert.CERT_TOL
    row["gap"] = row["ico_bound"] - row["causal_bound"]
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def _lgyni_row(alpha: float, method: str, tol: float | None) -> dict:
    t0 = time.perf_counter()
    c = biased_lgyni(alpha)
    tols = Tolerances(gap=tol) if tol is not None else None
    rep = ico_bound_single_trigger(c, None, tols)
    row = {
        "alpha": alpha,
        "causal_bound": causal_bound_bipartite(c),
        "ico_bound": rep.value,
        "algebraic_max": algebraic_max(c),
        "verified": bool(rep.certificate_checks["solver_verification_ok"]),
    }
    if alpha <= cert.LGYNI_ALPHA_MAX:
        lc = cert.lgyni_certificate(alpha)
        row["certificate_bound"] = lc.bound
        row["certificate_ok"] = lc.ok
        row["verified"] = row["verified"] and lc.ok
    row["gap"] = row["ico_bound"] - row["causal_bound"]
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def _sweep(fn, cfg: RunConfig, method: str):
    if not cfg.grid:
        raise ConfigError("sweeps need --grid A:B:STEP")
    args = [(a, method, cfg.tol) for a in cfg.grid]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_call, [fn] * len(args), args))  # map keeps grid order
    else:
        rows = [fn(*a) for a in args]
    ok = all(r["verified"] for r in rows)
    return {"method": method, "rows": rows}, rows, ok


def _call(fn, args):
    return fn(*args)


def cmd_sweep_biased_ocb(cfg: RunConfig, method: str):
    return _sweep(_ocb_row, cfg, method)


def cmd_sweep_biased_lgyni(cfg: RunConfig):
    for a in cfg.grid:
        if not 0.0 <= a <= 1.0:
            raise ConfigError("biased LGYNI needs alpha in [0, 1]")
    payload, rows, ok = _sweep(_lgyni_row, cfg, "sdp")
    payload["certified_up_to"] = cert.LGYNI_ALPHA_MAX
    return payload, rows, ok


def ocb_geometry(samples: int) -> dict:
    if samples < 1:
        raise ConfigError("--samples must be positive")
    thetas = [2 * math.pi * k / samples for k in range(samples)]
    return {
        "causal_square": [[1.0, 0.5], [0.5, 1.0], [0.0, 0.5], [0.5, 0.0]],
        "circle": [[round((1 + math.cos(t)) / 2, 15), round((1 + math.sin(t)) / 2, 15)] for t in thetas],
        "outer_square": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    }


def cmd_emit_ocb_geometry(cfg: RunConfig, samples: int):
    geo = ocb_geometry(samples)
    rows = [{"kind": kind, "x": x, "y": y} for kind, pts in geo.items() for x, y in pts]
    return geo, rows, True


# ---------------------------------------------------------------------------


def _trigger(text: str | None):
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--trigger must be comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icobounds", description="Causal and ICO bounds for causal inequalities.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, source=False, alpha=False, grid=False):
        if source:
            g = p.add_mutually_exclusive_group(required=True)
            g.add_argument("--game", choices=GAMES)
            g.add_argument("--corr", metavar="FILE.json", help="correlation JSON file")
        if alpha:
            p.add_argument("--alpha", type=float)
        if grid:
            p.add_argument("--grid", required=True, metavar="A:B:STEP")
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--tol", type=float, help="relative duality-gap tolerance")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--no-timing", action="store_true", help="write 0 for wall times (byte-reproducible output)")
        return p

    common(sub.add_parser("causal-bound", help="exact causal bound by enumeration"), source=True, alpha=True)
    p = common(sub.add_parser("ico-bound", help="single-trigger ICO bound (SDP)"), source=True, alpha=True)
    p.add_argument("--trigger", metavar="X1,X2")
    common(sub.add_parser("general-bound", help="decomposition upper bound for any correlation"), source=True, alpha=True)
    p = common(sub.add_parser("membership", help="necessary-condition membership test"))
    p.add_argument("--dist", metavar="FILE.json")
    p.add_argument("--point", choices=POINTS)
    p.add_argument("--trigger", metavar="X1,X2")
    common(sub.add_parser("verify-certificates", help="check the closed-form certificates"))
    common(sub.add_parser("enumerate-supermaps", help="classical bistochastic extreme points"))
    common(sub.add_parser("simulate-gyni", help="perfect GYNI with a classical supermap"))
    p = common(sub.add_parser("sweep-biased-ocb", help="biased OCB bounds over an alpha grid"), grid=True)
    p.add_argument("--method", choices=("certificate", "sdp"), default="certificate")
    common(sub.add_parser("sweep-biased-lgyni", help="biased LGYNI bounds over an alpha grid"), grid=True)
    p = common(sub.add_parser("emit-ocb-geometry", help="boundary points of the OCB plane"))
    p.add_argument("--samples", type=int, default=64)
    return parser


def run(argv=None) -> tuple[int, str, RunConfig]:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        game=getattr(args, "game", None),
        corr=getattr(args, "corr", None),
        alpha=getattr(args, "alpha", None),
        grid=parse_grid(args.grid) if getattr(args, "grid", None) else (),
        tol=args.tol,
        out=args.out,
        fmt=args.format,
        timing=not args.no_timing,
        jobs=max(1, getattr(args, "jobs", 1)),
    )
    if cfg.tol is not None and not (math.isfinite(cfg.tol) and cfg.tol > 0):
        raise ConfigError("--tol must be a positive number")
    cmd = cfg.command
    if cmd == "causal-bound":
        payload, rows, ok = cmd_causal_bound(cfg)
    elif cmd == "ico-bound":
        payload, rows, ok = cmd_ico_bound(cfg, _trigger(args.trigger))
    elif cmd == "general-bound":
        payload, rows, ok = cmd_general_bound(cfg)
    elif cmd == "membership":
        payload, rows, ok = cmd_membership(cfg, args.dist, args.point, _trigger(args.trigger))
    elif cmd == "verify-certificates":
        payload, rows, ok = cmd_verify_certificates(cfg)
    elif cmd == "enumerate-supermaps":
        payload, rows, ok = cmd_enumerate_supermaps(cfg)
    elif cmd == "simulate-gyni":
        payload, rows, ok = cmd_simulate_gyni(cfg)
    elif cmd == "sweep-biased-ocb":
        payload, rows, ok = cmd_sweep_biased_ocb(cfg, args.method)
    elif cmd == "sweep-biased-lgyni":
        payload, rows, ok = cmd_sweep_biased_lgyni(cfg)
    else:
        payload, rows, ok = cmd_emit_ocb_geometry(cfg, args.samples)
    text = render(payload, cfg, rows)
    if cfg.out:
        Path(cfg.out).write_text(text)
    return (EXIT_OK if ok else EXIT_FAILED), text, cfg


def main(argv=None) -> int:
    try:
        code, text, cfg = run(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(json.dumps(jsonable(exc.report.summary()), indent=2, sort_keys=True), file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.out:
        sys.stdout.write(text)
    if code == EXIT_FAILED:
        print("verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
