"""Command-line driver for the cusp laboratory.

Five flat subcommands cover the workflow end to end::

    cusplab profile    --beta 1 --check-asymptotics
    cusplab verify     --lambda 1.0001 --m0 93 --grid 4096
    cusplab simulate   --equation ch --epsilon 0.2,0.1 --gamma 0 --jobs 2
    cusplab analyze    --run-dir out/simulate/run_hs
    cusplab acceptance --quick

Configuration precedence is command line > ``--config`` file > built-in
defaults.  A config file holds flat ``key = value`` lines (``#`` comments
allowed; values parsed as JSON with a plain-string fallback); keys are the
long option names with dashes replaced by underscores (``lambda`` maps to
the ``lam`` key, ``out_dir`` to ``out``).

Every invocation writes an :class:`ExperimentManifest` (``manifest.json``)
into its output directory: the fully resolved configuration with every
default printed, sha256 digests of all input and output files, a UTC
timestamp, and a pass/fail summary.  Output files themselves are
deterministic (repr-serialized floats, no embedded timestamps), so
:func:`replay_manifest` can rerun any manifest and reproduce the recorded
digests byte for byte.

The only environment variable consulted is ``CUSPLAB_OUT_DIR``, which moves
the default output root; explicit ``--out``/``--out-dir`` flags win, and no
other behavior is environment-dependent.  ``--jobs`` parallelizes across
independent simulation runs only; nothing else is concurrent.  Exit status:
0 on success, 1 when a verification or acceptance check fails, 2 for
configuration errors.  Outputs are CSV/JSON only — no plot rendering, no
daemon mode, no network access.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis
from .acceptance import run_acceptance
from .analysis import FitRefusedError
from .inequalities import (InequalityConfig, default_grid, verify_all,
                           write_margins_csv, write_reports)
from .profiles import (BURGERS_FAMILY, MAIN_FAMILY, ProfileParams,
                       build_profile, eval_profile, rescale_beta, save_table,
                       taylor_check, third_derivative_origin)
from .sim.initial_data import InitialDataSpec, build_initial_data
from .sim.runner import RunConfig, load_run, run_to_blowup, save_run

_FAMILIES = {"main": MAIN_FAMILY, "burgers": BURGERS_FAMILY}
_SEED_GROWTH = 1.0075  # geometric marker-ladder growth used by the seeds


class ConfigError(Exception):
    """A flag, config-file entry, or input directory is unusable."""


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ExperimentManifest:
    """Provenance record written next to every command's outputs.

    ``config`` is the fully resolved configuration — every default is
    printed, so the manifest alone suffices to rerun the experiment.
    ``inputs`` and ``outputs`` map paths (relative to the manifest's
    directory unless absolute) to sha256 digests of their content; every
    file the command wrote is listed.  ``summary`` carries the headline
    numbers and per-check verdicts; ``ok`` is their conjunction.
    """

    command: str
    created_utc: str
    config: dict
    inputs: dict
    outputs: dict
    summary: dict
    ok: bool

    def to_json(self, path=None):
        text = json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)
        text += "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path):
        return cls(**json.loads(Path(path).read_text()))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_manifest(command, cfg, out_dir, files, inputs, summary, ok):
    out_dir = Path(out_dir)
    outputs = {rel: _sha256(out_dir / rel) for rel in sorted(files)}
    manifest = ExperimentManifest(
        command=command,
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        config=_jsonable(cfg),
        inputs=_jsonable(inputs),
        outputs=outputs,
        summary=_jsonable(summary),
        ok=bool(ok),
    )
    manifest.to_json(out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "profile": {"beta": 1.0, "y_max": 1.0e4, "tol": 1.0e-12, "family": "main",
                "check_asymptotics": False, "out": None},
    "verify": {"lam": 1.0001, "m0": 93.0, "grid": 4096, "y_min": 1.0e-3,
               "y_max": 1.0e4, "margin_tol": 1.0e-9, "out": None},
    "simulate": {"equation": "hs", "epsilon": None, "gamma": "0",
                 "k3": None, "k_v": 1.0, "Theta": 0.46, "markers": None,
                 "Gmax": None, "cutoff": 50.0, "jobs": 1, "out": None},
    "analyze": {"run_dir": None, "alphas": "0.7,0.8,1.0", "window": None,
                "n_sample": 512, "out": None},
    "acceptance": {"quick": False, "work_dir": None, "out": None},
}

_KEY_ALIASES = {"lambda": "lam", "out_dir": "out"}


def _default_out(command):
    return os.path.join(os.environ.get("CUSPLAB_OUT_DIR", "cusplab_out"),
                        command)


def _load_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    data = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"config line {raw!r} is not of the form key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        key = _KEY_ALIASES.get(key, key)
        value = value.strip()
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            data[key] = value
    return data


def _resolve(command, args):
    defaults = _DEFAULTS[command]
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError(
                f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            cfg[key] = cli_value
        elif key in file_cfg:
            cfg[key] = file_cfg[key]
        else:
            cfg[key] = default
    return cfg


def _ensure_out(cfg, command):
    out = cfg["out"] if cfg["out"] is not None else _default_out(command)
    cfg["out"] = str(out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_inputs(args):
    if getattr(args, "config", None):
        return {str(Path(args.config)): _sha256(args.config)}
    return {}


def _parse_floats(value, what):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{what} must contain at least one number")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad {what} value: {exc}") from None


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------

def _run_profile(cfg, inputs=None):
    out = _ensure_out(cfg, "profile")
    family = _FAMILIES.get(str(cfg["family"]))
    if family is None:
        raise ConfigError(f"family must be one of {sorted(_FAMILIES)}, "
                          f"got {cfg['family']!r}")
    beta = float(cfg["beta"])
    if not (beta > 0.0 and math.isfinite(beta)):
        raise ConfigError(f"beta must be positive and finite, got {beta}")
    try:
        params = ProfileParams(y_max=float(cfg["y_max"]),
                               rel_tol=float(cfg["tol"]))
        params.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    t0 = time.perf_counter()
    table = build_profile(params, family=family)
    if beta != 1.0:
        table = rescale_beta(table, beta)
    elapsed = time.perf_counter() - t0

    save_table(table, out / "profile.csv")
    # rescaling compresses the core by sqrt(beta); shrink the Taylor window
    # with it so the degree-11 fit sees the same stretch of the series
    tay = taylor_check(table, window=0.05 / math.sqrt(beta))
    d3 = third_derivative_origin(table)
    d3_expected = family.d3_origin * beta
    d3_rel = abs(d3 - d3_expected) / d3_expected

    checks = {
        "slope_origin": float(table.du[0]) == -2.0,
        "curvature_origin": abs(float(table.d2u[0])) <= 1e-10,
        "third_derivative": d3_rel <= 1e-3,
        "taylor_cubic": (abs(tay.c3 - tay.c3_expected)
                         / abs(tay.c3_expected) <= 1e-3),
    }
    report = {
        "family": table.family_name,
        "beta": beta,
        "origin": {"u": float(table.u[0]), "du": float(table.du[0]),
                   "d2u": float(table.d2u[0])},
        "taylor": {"c1": tay.c1, "c3": tay.c3,
                   "c3_expected": tay.c3_expected,
                   "even_coef_max": tay.even_coef_max,
                   "window": tay.window},
        "third_derivative": {"measured": d3, "expected": d3_expected,
                             "rel_error": d3_rel, "rel_tol": 1e-3},
        "residuals": {"ode": table.residual_max,
                      "relation": table.relation_residual_max,
                      "curvature": table.curvature_residual_max},
    }

    if cfg["check_asymptotics"]:
        y_tab = float(table.nodes[-1])
        far = 100.0 * y_tab
        u_f, du_f, d2_f = eval_profile(table, np.array([far]))
        measured = {
            "du_coef_table_end": abs(float(table.du[-1])) * y_tab ** family.tail_du_pow,
            "du_coef_far": abs(float(du_f[0])) * far ** family.tail_du_pow,
            "u_coef_table_end": abs(float(table.u[-1])) * y_tab ** -family.tail_u_pow,
            "d2u_coef_table_end": abs(float(table.d2u[-1])) * y_tab ** (family.tail_du_pow + 1.0),
        }
        expected = {
            "du_coef_table_end": family.tail_du_coef(beta),
            "du_coef_far": family.tail_du_coef(beta),
            "u_coef_table_end": family.tail_u_coef(beta),
            "d2u_coef_table_end": family.tail_d2u_coef(beta),
        }
        tols = {name: (0.001 if name == "du_coef_far" else 0.01)
                for name in measured}
        rel = {name: abs(measured[name] - expected[name]) / expected[name]
               for name in measured}
        for name in measured:
            checks[f"asymptotic_{name}"] = rel[name] <= tols[name]
        report["asymptotics"] = {
            "y_table_end": y_tab, "y_far": far, "measured": measured,
            "expected": expected, "rel_errors": rel, "rel_tols": tols,
        }

    (out / "check_report.json").write_text(
        json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")

    ok = all(checks.values())
    summary = {"checks": checks, "third_derivative": d3,
               "build_seconds": elapsed}
    files = ["profile.csv", "profile.csv.json", "check_report.json"]
    manifest = _write_manifest("profile", cfg, out, files, inputs or {},
                               summary, ok)
    print(f"profile[{table.family_name}, beta={beta:g}]: "
          f"{'ok' if ok else 'FAILED'} -> {out / 'manifest.json'}")
    return manifest, 0 if ok else 1


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _run_verify(cfg, inputs=None):
    out = _ensure_out(cfg, "verify")
    lam = float(cfg["lam"])
    grid = int(cfg["grid"])
    if not (lam > 1.0):
        raise ConfigError(f"lambda must exceed 1, got {lam}")
    if grid < 64:
        raise ConfigError(f"grid must be >= 64 points, got {grid}")
    try:
        config = InequalityConfig(
            lam_weighted=lam, lam_tail=lam, m0=float(cfg["m0"]),
            margin_tol=float(cfg["margin_tol"]),
            y_grid=default_grid(y_min=float(cfg["y_min"]),
                                y_max=float(cfg["y_max"]),
                                n_log=grid, n_linear=max(64, grid // 8)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    table = build_profile()
    reports = verify_all(table, config)
    write_reports(reports, out / "inequality_report.json")
    files = ["inequality_report.json"]
    summary = {}
    for name, report in reports.items():
        rel = f"margins_{name}.csv"
        write_margins_csv(report, out / rel)
        files.append(rel)
        entry = {
            "satisfied": bool(report.satisfied),
            "min_margin": report.min_margin,
            "argmin_y": report.argmin_y,
            "crossings": [float(c) for c in report.crossings],
        }
        violations = report.violations()
        entry["n_violations"] = int(violations.size)
        if violations.size:
            entry["violation_y_range"] = [float(violations.min()),
                                          float(violations.max())]
        if report.delta_found is not None:
            entry["delta_found"] = report.delta_found
            entry["delta_required"] = report.delta_required
        if report.verified_range is not None:
            entry["verified_range"] = list(report.verified_range)
        summary[name] = entry

    ok = all(reports[name].satisfied for name in reports)
    manifest = _write_manifest("verify", cfg, out, files, inputs or {},
                               summary, ok)
    for name in reports:
        state = "PASS" if reports[name].satisfied else "FAIL"
        print(f"verify {name}: {state}")
    print(f"verify: {'ok' if ok else 'FAILED'} -> {out / 'manifest.json'}")
    return manifest, 0 if ok else 1


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _markers_to_dy0(markers, cutoff):
    """Invert the geometric seed ladder: marker budget -> origin spacing."""
    if markers is None:
        return 5.0e-5
    markers = int(markers)
    if markers < 64:
        raise ConfigError(f"markers must be >= 64, got {markers}")
    return cutoff * (_SEED_GROWTH - 1.0) / (_SEED_GROWTH ** (markers / 2.0) - 1.0)


def _simulate_one(task):
    """Build, run, and save one seed; returns (name, summary). Top-level so
    it can cross a process boundary when --jobs > 1."""
    name, spec_kwargs, g_stop, run_dir, table = task
    state, _ = build_initial_data(InitialDataSpec(**spec_kwargs), table=table)
    result = run_to_blowup(state, RunConfig(g_stop=g_stop))
    save_run(result, run_dir)

    eq = result.equation
    fit = analysis.fit_blowup_time(result.seed.t, result.seed.g_min)
    cons = result.conservation
    epsilon = spec_kwargs.get("epsilon", 1.0)
    threshold = 1.0e3 / epsilon
    reached = cons.t[cons.g_absmax >= threshold]
    t_until = float(reached[0]) if reached.size else float(cons.t[-1])
    drift = cons.relative_drift(until=t_until)

    summary = {
        "equation": eq,
        "t_star": fit.t_star,
        "blowup_rate": fit.rate,
        "fit_r2": fit.r2,
        "energy_drift": drift,
        "drift_window_t": t_until,
        "gradient_window_reached": bool(reached.size),
        "stop_reason": result.stop_reason,
        "n_steps": result.n_steps,
        "n_markers_final": result.snapshots[-1].n_markers,
    }
    try:
        hfit = analysis.run_holder_exponent(result)
        summary["alpha_hat"] = hfit.alpha_hat
        summary["alpha_stderr"] = hfit.stderr
    except FitRefusedError as exc:
        summary["alpha_hat"] = None
        summary["alpha_refusal"] = str(exc)
    if eq in ("hs", "burgers"):
        summary["riccati_error"] = analysis.riccati_error(result, fit.t_star)
    if eq == "ch":
        bound = math.sqrt(cons.energy[0] / 2.0)
        max_u = max(float(np.max(np.abs(s.u))) for s in result.snapshots)
        max_u = max(max_u, float(np.max(np.abs(result.seed.u_min))))
        summary["max_abs_u"] = max_u
        summary["apriori_bound"] = bound

    checks = {"energy_drift": drift <= 1e-4,
              "gradient_window_reached": bool(reached.size)}
    if eq == "hs":
        checks["t_star_band"] = abs(fit.t_star) <= 1e-3
        checks["alpha_band"] = (summary.get("alpha_hat") is not None
                                and abs(summary["alpha_hat"] - 0.600) <= 0.03)
    elif eq == "burgers":
        checks["t_star_band"] = abs(fit.t_star) <= 1e-3
        checks["alpha_band"] = (summary.get("alpha_hat") is not None
                                and abs(summary["alpha_hat"] - 1.0 / 3.0) <= 0.03)
    else:
        checks["blowup_rate_band"] = abs(fit.rate - 1.0) <= 0.05
        checks["apriori_u_bound"] = summary["max_abs_u"] <= summary["apriori_bound"]
        checks["alpha_band"] = (summary.get("alpha_hat") is not None
                                and abs(summary["alpha_hat"] - 0.600) <= 0.05)
    summary["checks"] = checks
    return name, summary


def _run_simulate(cfg, inputs=None):
    equation = str(cfg["equation"])
    if equation not in ("ch", "hs", "burgers"):
        raise ConfigError(f"equation must be ch, hs, or burgers, "
                          f"got {equation!r}")
    out = _ensure_out(cfg, "simulate")

    if cfg["epsilon"] is None:
        eps_list = [0.1] if equation == "ch" else [1.0]
    else:
        eps_list = _parse_floats(cfg["epsilon"], "epsilon")
    gam_list = _parse_floats(cfg["gamma"], "gamma")
    if equation != "ch":
        if any(g != 0.0 for g in gam_list):
            raise ConfigError("gamma is a ch parameter; it must be 0 for "
                              f"{equation}")
        gam_list = [0.0]
        if any(e != 1.0 for e in eps_list):
            raise ConfigError("epsilon is a ch parameter; it must be 1 for "
                              f"{equation}")
        eps_list = [1.0]

    cutoff = float(cfg["cutoff"])
    dy0 = _markers_to_dy0(cfg["markers"], cutoff)

    # the seed slope is -2/epsilon (ch) or -2 k_v (hs/burgers); the runner
    # requires g_stop to dominate it by three decades
    k_v = float(cfg["k_v"])
    slope = max((2.0 / e if equation == "ch" else 2.0 * abs(k_v))
                for e in eps_list)
    if cfg["Gmax"] is None:
        g_stop = max(1.0e4, 3.0e3 * slope / 2.0)
    else:
        g_stop = float(cfg["Gmax"])
        if g_stop < 1.0e3 * slope:
            raise ConfigError(
                f"Gmax = {g_stop:g} must be at least 1e3 * |seed slope| "
                f"= {1.0e3 * slope:g} so the run probes the self-similar "
                f"regime")

    # resolved values are what the manifest records
    cfg = dict(cfg)
    cfg["epsilon"] = ",".join(f"{e:g}" for e in eps_list)
    cfg["gamma"] = ",".join(f"{g:g}" for g in gam_list)
    cfg["Gmax"] = g_stop
    cfg["dy0_resolved"] = dy0

    family = BURGERS_FAMILY if equation == "burgers" else MAIN_FAMILY
    table = build_profile(family=family)

    tasks = []
    for epsilon in eps_list:
        for gamma in gam_list:
            if equation == "ch":
                name = f"run_ch_eps{epsilon:g}_gamma{gamma:g}"
                spec_kwargs = {"equation": "ch", "epsilon": epsilon,
                               "gamma": gamma}
            else:
                name = f"run_{equation}"
                spec_kwargs = {"equation": equation, "k_v": k_v}
            spec_kwargs.update(k3=cfg["k3"], Theta=float(cfg["Theta"]),
                               cutoff=cutoff, dy0=dy0)
            tasks.append((name, spec_kwargs, g_stop, str(out / name), table))

    jobs = int(cfg["jobs"])
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    try:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
                results = list(ex.map(_simulate_one, tasks))
        else:
            results = [_simulate_one(task) for task in tasks]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    files = []
    for name, _ in results:
        run_manifest = json.loads((out / name / "run.json").read_text())
        files.append(f"{name}/run.json")
        files.extend(f"{name}/{rel}" for rel in run_manifest["digests"])

    runs = dict(results)
    ok = all(all(r["checks"].values()) for r in runs.values())
    summary = {"runs": runs}
    manifest = _write_manifest("simulate", cfg, out, files, inputs or {},
                               summary, ok)
    for name, r in runs.items():
        state = "ok" if all(r["checks"].values()) else "FAILED"
        alpha = r.get("alpha_hat")
        alpha_txt = f"{alpha:.4f}" if alpha is not None else "refused"
        print(f"simulate {name}: {state}  T*={r['t_star']:.3e}  "
              f"alpha={alpha_txt}  drift={r['energy_drift']:.2e}")
    print(f"simulate: {'ok' if ok else 'FAILED'} -> {out / 'manifest.json'}")
    return manifest, 0 if ok else 1


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _run_analyze(cfg, inputs=None):
    if cfg["run_dir"] is None:
        raise ConfigError("analyze requires --run-dir")
    run_dir = Path(cfg["run_dir"])
    if not (run_dir / "run.json").exists():
        raise ConfigError(f"{run_dir} is not a run directory (no run.json)")

    inputs = dict(inputs or {})
    run_manifest = json.loads((run_dir / "run.json").read_text())
    inputs[str(run_dir / "run.json")] = _sha256(run_dir / "run.json")
    for rel in run_manifest.get("digests", {}):
        inputs[str(run_dir / rel)] = _sha256(run_dir / rel)

    try:
        result = load_run(str(run_dir))
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(f"cannot load run directory {run_dir}: {exc}") from None

    alphas = tuple(_parse_floats(cfg["alphas"], "alphas"))
    window = None
    if cfg["window"] is not None:
        pair = _parse_floats(cfg["window"], "window")
        if len(pair) != 2:
            raise ConfigError("window must be two numbers: y_lo,y_hi")
        window = (pair[0], pair[1])

    if cfg["out"] is not None:
        out = Path(str(cfg["out"]))
    elif "CUSPLAB_OUT_DIR" in os.environ:
        out = Path(_default_out("analyze")) / run_dir.name
    else:
        out = run_dir / "analysis"
    cfg = dict(cfg)
    cfg["out"] = str(out)
    out.mkdir(parents=True, exist_ok=True)

    family = BURGERS_FAMILY if result.equation == "burgers" else MAIN_FAMILY
    table = build_profile(family=family)
    try:
        report = analysis.analyze_run(result, table=table, alphas=alphas,
                                      window_y=window,
                                      n_sample=int(cfg["n_sample"]))
    except FitRefusedError as exc:
        raise ConfigError(f"analysis refused: {exc}") from None

    report.to_json(out / "report.json")
    analysis.write_fit_csv(report.holder, out / "holder_fit.csv")

    audit = report.audit
    lines = ["y," + ",".join(audit.profiles)]
    for k, y in enumerate(audit.y_used):
        vals = ",".join(repr(float(audit.profiles[name][k]))
                        for name in audit.profiles)
        lines.append(f"{float(y)!r},{vals}")
    (out / "envelope_margins.csv").write_text("\n".join(lines) + "\n")

    rate_rows = {}
    for fit in report.rates:
        rate_rows[f"{fit.alpha:g}"] = {
            "measured": fit.exponent, "expected": fit.expected,
            "rel_error": fit.relative_error, "r2": fit.r2,
        }

    eq = result.equation
    alpha_target, alpha_tol = ((1.0 / 3.0, 0.03) if eq == "burgers"
                               else (0.600, 0.03 if eq == "hs" else 0.05))
    checks = {
        "alpha_band": abs(report.alpha_hat - alpha_target) <= alpha_tol,
    }
    for key, row in rate_rows.items():
        checks[f"rate_alpha_{key}"] = row["rel_error"] <= 0.10

    summary = {
        "equation": eq,
        "alpha_hat": report.alpha_hat,
        "alpha_stderr": report.holder.stderr,
        "alpha_expected": alpha_target,
        "t_star": report.t_star,
        "x_star": report.x_star,
        "riccati_error": report.riccati_error,
        "rates": rate_rows,
        "envelope": {b.name: {"ok": b.ok, "margin": b.margin}
                     for b in audit.bounds},
        "checks": checks,
    }
    ok = all(checks.values())
    files = ["report.json", "holder_fit.csv", "envelope_margins.csv"]
    manifest = _write_manifest("analyze", cfg, out, files, inputs, summary, ok)
    print(f"analyze {run_dir.name}: {'ok' if ok else 'FAILED'}  "
          f"alpha={report.alpha_hat:.4f}  T*={report.t_star:.3e}  "
          f"-> {out / 'manifest.json'}")
    return manifest, 0 if ok else 1


# ---------------------------------------------------------------------------
# acceptance
# ---------------------------------------------------------------------------

def _run_acceptance(cfg, inputs=None):
    out = _ensure_out(cfg, "acceptance")
    cfg = dict(cfg)
    if cfg["work_dir"] is None:
        cfg["work_dir"] = str(out / "cache")
    work = Path(cfg["work_dir"])

    inputs = dict(inputs or {})
    if work.is_dir():
        for p in sorted(work.iterdir()):
            if p.is_file():
                inputs[str(p)] = _sha256(p)

    report = run_acceptance(quick=bool(cfg["quick"]), work_dir=work)
    (out / "acceptance_report.json").write_text(
        json.dumps(report.to_dict(include_timing=False), indent=2,
                   sort_keys=True) + "\n")

    files = ["acceptance_report.json"]
    try:
        rel_work = work.relative_to(out)
    except ValueError:
        rel_work = None
    if rel_work is not None and work.is_dir():
        files.extend(sorted(str(rel_work / p.name) for p in work.iterdir()
                            if p.is_file()))

    summary = {
        "all_passed": report.ok,
        "quick": report.quick,
        "criteria": {f"criterion_{r.number}": r.passed
                     for r in report.records},
        "timings_s": {f"criterion_{r.number}": round(r.elapsed_s, 3)
                      for r in report.records},
    }
    manifest = _write_manifest("acceptance", cfg, out, files, inputs,
                               summary, report.ok)
    for line in report.lines():
        print(line)
    if not report.ok:
        failed = ", ".join(f"criterion_{r.number}" for r in report.records
                           if not r.passed)
        print(f"acceptance FAILED: {failed}", file=sys.stderr)
    else:
        print(f"acceptance: ok -> {out / 'manifest.json'}")
    return manifest, 0 if report.ok else 1


# ---------------------------------------------------------------------------
# argument parsing / dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "profile": _run_profile,
    "verify": _run_verify,
    "simulate": _run_simulate,
    "analyze": _run_analyze,
    "acceptance": _run_acceptance,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cusplab",
        description="Self-similar blow-up laboratory: profile construction, "
                    "inequality verification, blow-up simulation, and "
                    "exponent analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, metavar="FILE",
                       help="flat key = value config file (CLI flags win)")

    p = sub.add_parser("profile", help="build and certify a profile table")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--y-max", dest="y_max", type=float, default=None)
    p.add_argument("--tol", type=float, default=None,
                   help="relative tolerance of the profile integration")
    p.add_argument("--family", choices=sorted(_FAMILIES), default=None)
    p.add_argument("--check-asymptotics", dest="check_asymptotics",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--out", default=None)
    add_common(p)

    p = sub.add_parser("verify", help="audit the five profile inequalities")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="dilation parameter of the weighted and tail checks")
    p.add_argument("--m0", type=float, default=None,
                   help="left end of the claimed tail-comparison range")
    p.add_argument("--grid", type=int, default=None,
                   help="logarithmic grid points for the audits")
    p.add_argument("--y-min", dest="y_min", type=float, default=None)
    p.add_argument("--y-max", dest="y_max", type=float, default=None)
    p.add_argument("--margin-tol", dest="margin_tol", type=float,
                   default=None)
    p.add_argument("--out", default=None)
    add_common(p)

    p = sub.add_parser("simulate", help="run seeds to blow-up and save them")
    p.add_argument("--equation", choices=("ch", "hs", "burgers"),
                   default=None)
    p.add_argument("--epsilon", default=None,
                   help="ch gradient parameter; comma list runs a matrix")
    p.add_argument("--gamma", default=None,
                   help="ch dispersion coefficient; comma list runs a matrix")
    p.add_argument("--k3", type=float, default=None,
                   help="third derivative of the seed at the origin")
    p.add_argument("--k-v", dest="k_v", type=float, default=None,
                   help="amplitude factor of hs/burgers seeds")
    p.add_argument("--Theta", dest="Theta", type=float, default=None,
                   help="far-envelope amplitude of the seed")
    p.add_argument("--markers", type=int, default=None,
                   help="approximate marker budget of the seed core")
    p.add_argument("--Gmax", dest="Gmax", type=float, default=None,
                   help="stop once min u_x <= -Gmax")
    p.add_argument("--cutoff", type=float, default=None,
                   help="seed taper location in similarity units")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers across independent runs")
    p.add_argument("--out-dir", dest="out", default=None)
    add_common(p)

    p = sub.add_parser("analyze", help="fit exponents on a saved run")
    p.add_argument("--run-dir", dest="run_dir", default=None, metavar="DIR")
    p.add_argument("--alphas", default=None,
                   help="comma list of Hölder orders for the rate fits")
    p.add_argument("--window", default=None, metavar="YLO,YHI",
                   help="similarity-unit window for the cusp exponent fit")
    p.add_argument("--n-sample", dest="n_sample", type=int, default=None)
    p.add_argument("--out-dir", dest="out", default=None)
    add_common(p)

    p = sub.add_parser("acceptance", help="run the acceptance battery")
    p.add_argument("--quick", action=argparse.BooleanOptionalAction,
                   default=None,
                   help="profile/inequality/Hunter-Saxton subset only")
    p.add_argument("--work-dir", dest="work_dir", default=None,
                   help="profile-table cache directory")
    p.add_argument("--out", default=None)
    add_common(p)

    return parser


def main(argv=None):
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args.command, args)
        inputs = _config_inputs(args)
        _, code = _RUNNERS[args.command](cfg, inputs=inputs)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return code


def replay_manifest(manifest_path, out_dir=None):
    """Rerun the experiment a manifest records; returns the new manifest.

    The stored configuration is fully resolved, so the rerun is exact; pass
    ``out_dir`` to write into a fresh directory.  Output files are
    deterministic, so the new manifest's ``outputs`` digests must equal the
    old ones — the invariant callers should assert.
    """
    old = ExperimentManifest.from_json(manifest_path)
    cfg = dict(old.config)
    cfg.pop("dy0_resolved", None)
    if out_dir is not None:
        if (old.command == "acceptance"
                and cfg.get("work_dir") == str(Path(old.config["out"]) / "cache")):
            cfg["work_dir"] = None  # keep the default cache inside the new out dir
        cfg["out"] = str(out_dir)
    manifest, _ = _RUNNERS[old.command](cfg)
    return manifest


if __name__ == "__main__":
    sys.exit(main())
