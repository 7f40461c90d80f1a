"""Command-line front end.

``grushin <experiment> [--config FILE] [overrides]`` runs one experiment and
writes ``<experiment>.csv`` (data) and ``<experiment>.json`` (metadata) into
the output directory.  Exit status: 0 success, 2 configuration error,
3 an embedded check failed, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from . import __version__, asymptotics, cylinder
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, override, parse_config
from .grushin1d import (
    CRITICAL_C,
    GrushinPotential,
    OperatorSpec,
    bracket_count,
    bracket_trace,
    minimizer,
    scaling_map,
)
from .numerics1d import (
    DD,
    CompositePolicy,
    build_grid,
    discretize,
    eigenvalue,
    resolution_policy,
    sturm_count,
    trace_below,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_IO = 4

TEST_FUNCTIONS: dict[str, Callable] = {
    "one": lambda g: np.ones_like(g),
    "identity": lambda g: g,
    "square": lambda g: g * g,
    "cosine": lambda g: np.cos(np.pi * g),
}


@dataclass
class Table:
    columns: list
    rows: list

    def render(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(format_field(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def format_field(value) -> str:
    """CSV text for one value; floats use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


@dataclass
class RunResult:
    report: cylinder.ExperimentReport
    table: Table
    csv_path: Path
    json_path: Path
    exit_code: int


# ---------------------------------------------------------------------------
# experiments


def _manifold(cfg: ExperimentConfig) -> cylinder.ModelManifold:
    return cylinder.ModelManifold(cfg.n, tuple(cfg.circumferences), cfg.epsilon0, cfg.bc_right)


def _resolution(cfg: ExperimentConfig) -> cylinder.Resolution:
    return cylinder.Resolution(cfg.layer_fraction, cfg.tail_fraction, cfg.ratio)


def _policy_dict(policy) -> dict:
    return {"kind": type(policy).__name__, **dataclasses.asdict(policy)}


def _round_certified(x: float, digits: int = 13) -> float:
    # the quadrature certifies ~1e-13; the last ulps are noise
    return float(f"{x:.{digits}g}")


def exp_constants(cfg):
    rows, checks = [], {}
    for beta in cfg.beta:
        A = asymptotics.constant_A(beta, cfg.tol)
        tp = asymptotics.trace_prefactor(beta, cfg.tol)
        n = 2.0 / beta
        if n == round(n):
            checks[f"identity_beta={beta:g}"] = abs(tp - 2.0 / (n + 3.0) * A) <= 1e-10
        rows.append((beta, _round_certified(A), _round_certified(tp)))
    report = cylinder.ExperimentReport(
        "constants", {"beta": list(cfg.beta), "tol": cfg.tol},
        list(cfg.beta), [r[1] for r in rows], [r[2] for r in rows], checks=checks,
    )
    return report, Table(["beta", "A", "trace_prefactor"], rows), {}


def _oscillator_spec(cfg, omega: float, beta: float) -> OperatorSpec:
    policy = resolution_policy(omega, cfg.layer_fraction, cfg.tail_fraction, cfg.ratio,
                               minimizer(CRITICAL_C, 1.0, beta))
    return OperatorSpec(GrushinPotential(CRITICAL_C, 1.0, beta), omega ** (1.0 / beta), DD, policy)


def _one_dim(cfg, kind: str):
    beta = cfg.beta[0]
    rows, measured, predicted, checks, policies = [], [], [], {}, {}
    for omega in cfg.omega:
        spec = _oscillator_spec(cfg, omega, beta)
        T = spec.matrix()
        split = 0.5 * spec.b
        if kind == "count":
            value = sturm_count(T, omega)
            sc = asymptotics.semiclassical_count(spec.potential, spec.b, omega)
            pred = asymptotics.predicted_count(omega, beta)
            br = bracket_count(spec, omega, split)
        else:
            value = -trace_below(T, omega)
            pred = asymptotics.predicted_trace(omega, beta)
            br = bracket_trace(spec, omega, split)
        slack = 1e-9 * max(abs(value), 1.0)
        checks[f"bracket_omega={omega:g}"] = br.lower - slack <= value <= br.upper + slack
        policies[f"omega={omega:g}"] = _policy_dict(spec.policy)
        row = [omega, value] + ([sc] if kind == "count" else []) + [pred, value / pred]
        rows.append(tuple(row))
        measured.append(value)
        predicted.append(pred)
    columns = ["omega", "count", "semiclassical"] if kind == "count" else ["omega", "trace"]
    report = cylinder.ExperimentReport(
        "mode-count" if kind == "count" else "trace-1d",
        {"omega": list(cfg.omega), "beta": beta}, list(cfg.omega), measured, predicted,
        checks=checks,
    )
    return report, Table(columns + ["predicted", "ratio"], rows), policies


def exp_mode_count(cfg):
    return _one_dim(cfg, "count")


def exp_trace_1d(cfg):
    return _one_dim(cfg, "trace")


def exp_scaling_check(cfg, count: int = 10):
    """``P_mu`` on ``[0, a]`` against ``P_1`` on the exactly stretched grid."""
    beta, mu, a = cfg.beta[0], cfg.mu, cfg.a
    factor, _ = scaling_map(mu, a, beta)
    policy = CompositePolicy(h_min=1e-4 * a, ratio=cfg.ratio, h_tail=a / 2000.0)
    grid = build_grid(policy, a)
    stretched = grid.mapped(mu ** (1.0 / (2.0 + beta)))
    T_mu = discretize(GrushinPotential(CRITICAL_C, mu, beta), grid, DD)
    T_1 = discretize(GrushinPotential(CRITICAL_C, 1.0, beta), stretched, DD)
    rows, rel = [], []
    for k in range(min(count, T_mu.dim)):
        e_mu = eigenvalue(T_mu, k + 1, 1e-13 * factor)
        e_1 = eigenvalue(T_1, k + 1, 1e-13)
        d = abs(e_mu - factor * e_1) / abs(e_mu)
        rows.append((k + 1, e_mu, e_1, factor * e_1, d))
        rel.append(d)
    report = cylinder.ExperimentReport(
        "scaling-check", {"mu": mu, "a": a, "beta": beta, "energy_factor": factor},
        [r[0] for r in rows], [r[1] for r in rows], [r[3] for r in rows],
        checks={"covariance": max(rel) <= 1e-6},
    )
    table = Table(["index", "eig_mu", "eig_1", "eig_1_scaled", "rel_diff"], rows)
    return report, table, {"grid": _policy_dict(policy), "stretch": mu ** (1.0 / (2.0 + beta))}


def _ensemble(cfg, vectors=True):
    return cylinder.assemble_spectrum(_manifold(cfg), cfg.lam, want_vectors=vectors,
                                      resolution=_resolution(cfg), workers=cfg.workers)


def exp_mass_profile(cfg):
    report = cylinder.mass_profile(_ensemble(cfg), cfg.gamma)
    rows = list(zip(cfg.gamma, report.measured, report.predicted))
    return report, Table(["gamma", "F", "predicted"], rows), {}


def exp_test_function(cfg):
    ens = _ensemble(cfg)
    rows, measured, predicted = [], [], []
    for name in cfg.functions:
        f = TEST_FUNCTIONS[name]
        value = cylinder.test_function_average(ens, f)
        limit = cylinder.test_function_limit(f)
        rows.append((name, value, limit))
        measured.append(value)
        predicted.append(limit)
    checks = {}
    if "one" in cfg.functions:
        checks["normalized"] = abs(measured[cfg.functions.index("one")] - 1.0) <= 1e-10
    report = cylinder.ExperimentReport(
        "test-function", {"lambda": cfg.lam, "functions": list(cfg.functions)},
        list(cfg.functions), measured, predicted,
        metadata={"N": ens.count, **ens.metadata}, checks=checks,
    )
    return report, Table(["function", "value", "limit"], rows), {}


def exp_trace_diff(cfg):
    man, res = _manifold(cfg), _resolution(cfg)
    rows, measured, predicted, labels, checks = [], [], [], [], {}
    for g in cfg.gamma:
        for d in cfg.delta:
            r = cylinder.trace_difference(man, cfg.lam, g, d, res, workers=cfg.workers)
            m, p = r.measured[0], r.predicted[0]
            rows.append((cfg.lam, g, d, m, p, r.ratios[0]))
            measured.append(m)
            predicted.append(p)
            labels.append((g, d))
            checks[f"sign_gamma={g:g}_delta={d:g}"] = r.checks["sign"]
    report = cylinder.ExperimentReport(
        "trace-diff", {"lambda": cfg.lam, "gamma": list(cfg.gamma), "delta": list(cfg.delta)},
        labels, measured, predicted, checks=checks,
    )
    table = Table(["lambda", "gamma", "delta", "measured", "predicted", "ratio"], rows)
    return report, table, {}


def exp_sandwich(cfg):
    if any(d == 0 for d in cfg.delta):
        raise ConfigError("params.delta: the sandwich experiment needs delta != 0")
    ens = _ensemble(cfg)
    rows, measured, predicted, labels, checks = [], [], [], [], {}
    for g in cfg.gamma:
        for d in cfg.delta:
            r = cylinder.variational_sandwich(ens, g, d)
            holds = r.checks["sandwich"]
            rows.append((cfg.lam, g, d, r.measured[0], r.predicted[0], holds))
            measured.append(r.measured[0])
            predicted.append(r.predicted[0])
            labels.append((g, d))
            checks[f"sandwich_gamma={g:g}_delta={d:g}"] = holds
    report = cylinder.ExperimentReport(
        "sandwich", {"lambda": cfg.lam, "gamma": list(cfg.gamma), "delta": list(cfg.delta)},
        labels, measured, predicted, metadata={"N": ens.count, **ens.metadata}, checks=checks,
    )
    return report, Table(["lambda", "gamma", "delta", "mass", "bound", "holds"], rows), {}


def exp_weyl_ratio(cfg):
    if not cfg.lam > math.e:
        raise ConfigError("params.lambda: the Weyl ratio needs lambda > e")
    r = cylinder.weyl_ratio(_manifold(cfg), cfg.lam, _resolution(cfg), workers=cfg.workers)
    row = (cfg.lam, r.metadata["N"], r.measured[0], r.predicted[0], r.metadata["limit"])
    return r, Table(["lambda", "N", "ratio", "oracle_ratio", "limit"], [row]), {}


def exp_convergence_study(cfg):
    """First eigenvalue of ``P_1`` on [0, 20] (exactly 4) under refinement.

    ``refine`` halves every length scale per level; ``x0`` shrinks only the
    first cell (the Dirichlet anchor) on a fixed fine tail.
    """
    pot = GrushinPotential(CRITICAL_C, 1.0, 2.0)
    b, exact = 20.0, 4.0

    def first(policy):
        grid = build_grid(policy, b)
        T = discretize(pot, grid, DD)
        return eigenvalue(T, 1, 1e-14), len(grid)

    rows, checks = [], {}
    policy = CompositePolicy(h_min=1e-2, ratio=1.1, h_tail=4e-2)
    changes = []
    prev = None
    for level in range(cfg.levels):
        e, m = first(policy)
        change = math.nan if prev is None else e - prev
        changes.append(change)
        rows.append(("refine", level, policy.h_min, policy.h_tail, policy.ratio, m, e, e - exact, change))
        prev = e
        policy = policy.refined()
    factors = [abs(changes[i - 1]) / abs(changes[i]) for i in range(2, len(changes))]
    checks["second_order"] = all(f >= 3.0 for f in factors)

    base = rows[-1]
    prev = None
    x0_errors = []
    for level, h_min in enumerate(base[2] * 10.0 ** -np.arange(0, cfg.levels)):
        p = CompositePolicy(h_min=float(h_min), ratio=base[4], h_tail=base[3])
        e, m = first(p)
        change = math.nan if prev is None else e - prev
        rows.append(("x0", level, p.h_min, p.h_tail, p.ratio, m, e, e - exact, change))
        x0_errors.append(abs(change))
        prev = e
    tail = x0_errors[1:]
    checks["x0_converged"] = all(a >= b for a, b in zip(tail, tail[1:])) and abs(rows[-1][7]) <= 1e-3
    report = cylinder.ExperimentReport(
        "convergence-study", {"b": b, "levels": cfg.levels},
        [(r[0], r[1]) for r in rows], [r[6] for r in rows], [exact] * len(rows),
        metadata={"refine_factors": factors}, checks=checks,
    )
    columns = ["study", "level", "h_min", "h_tail", "ratio", "nodes", "eig1", "error", "change"]
    return report, Table(columns, rows), {}


EXPERIMENT_FUNCS = {
    "constants": exp_constants,
    "mode-count": exp_mode_count,
    "trace-1d": exp_trace_1d,
    "scaling-check": exp_scaling_check,
    "mass-profile": exp_mass_profile,
    "test-function": exp_test_function,
    "trace-diff": exp_trace_diff,
    "sandwich": exp_sandwich,
    "weyl-ratio": exp_weyl_ratio,
    "convergence-study": exp_convergence_study,
}
assert set(EXPERIMENT_FUNCS) == set(EXPERIMENTS)


# ---------------------------------------------------------------------------
# orchestration


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def run(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> RunResult:
    """Run ``cfg.experiment`` and write its CSV and JSON files.

    Raises ConfigError for parameter combinations an experiment rejects and
    OSError when the output cannot be written.
    """
    started = time.perf_counter()
    report, table, policies = EXPERIMENT_FUNCS[cfg.experiment](cfg)
    wall = time.perf_counter() - started

    if not policies and cfg.experiment not in ("constants",):
        policies = {"resolution": dataclasses.asdict(_resolution(cfg))}
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.experiment}.csv"
    json_path = out / f"{cfg.experiment}.json"
    csv_path.write_text(table.render(), encoding="utf-8")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.to_document(),
        "parameters": report.parameters,
        "grid_policies": policies,
        "metadata": report.metadata,
        "checks": report.checks,
        "passed": report.passed,
        "csv": csv_path.name,
        "columns": table.columns,
        "versions": {
            "grushin": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": numba.__version__,
        },
        "wall_time_s": wall,
    }
    json_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunResult(report, table, csv_path, json_path, EXIT_OK if report.passed else EXIT_CHECK)


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grushin", description="Run one spectral experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML configuration file (defaults apply when omitted)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--workers", type=int, help="worker threads for mode computations")
    p.add_argument("--lambda", dest="lam", type=float, help="spectral cutoff")
    p.add_argument("--gamma", type=_float_list, help="collar exponents, comma-separated")
    p.add_argument("--delta", type=_float_list, help="step heights relative to lambda")
    p.add_argument("--beta", type=_float_list, help="potential exponent(s)")
    p.add_argument("--bc-right", dest="bc_right", choices=("D", "N", "d", "n"),
                   help="condition at x = epsilon0")
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    text = ""
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    updates = {"experiment": args.experiment}
    for flag, key in (("out", "output.dir"), ("workers", "workers"), ("lam", "params.lambda"),
                      ("gamma", "params.gamma"), ("delta", "params.delta"),
                      ("beta", "params.beta"), ("bc_right", "manifold.bc_right")):
        value = getattr(args, flag)
        if value is not None:
            updates[key] = value
    return override(cfg, updates)


_NUMERIC_FLAGS = ("--lambda", "--gamma", "--delta", "--beta")


def _attach_numeric_values(argv: Sequence[str]) -> list:
    """Rewrite ``--gamma -0.5,-0.4`` as ``--gamma=-0.5,-0.4``; argparse would
    otherwise read the negative list as an option."""
    out, items = [], list(argv)
    i = 0
    while i < len(items):
        if items[i] in _NUMERIC_FLAGS and i + 1 < len(items) and items[i + 1].startswith("-"):
            out.append(f"{items[i]}={items[i + 1]}")
            i += 2
        else:
            out.append(items[i])
            i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_attach_numeric_values(argv))
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"grushin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"grushin: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        result = run(cfg)
    except ConfigError as exc:
        print(f"grushin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"grushin: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, ok in result.report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"wrote {result.csv_path} and {result.json_path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
