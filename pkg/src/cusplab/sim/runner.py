"""Drive a marker ensemble to the gradient-blow-up threshold.

The runner advances a seed state with the gradient-limited step rule
``dt = min(dt_max, cfl / max|u_x|)``, which makes the step count logarithmic
in the gradient amplification.  Along the way it logs

* a per-step blow-up seed history (refined gradient minimum, its location,
  the velocity there, and the projected blow-up time ``t - 2 / min u_x``),
* a per-step conservation trace (the equation's quadratic invariant and, for
  Camassa-Holm, the pressure sup-norms), and
* snapshots on a geometric grid of the projected time-to-blow-up, each with
  its modulation state.

Marker maintenance happens once per snapshot inside a window around the
tracked minimum, and it does more than refill the depleting grid (the origin
of the self-similar flow is repelling, so markers thin out like
``exp(Delta_s / 2)``).  The width of a marker panel obeys
``d^2(dx)/dt^2 = g^2 dx / 2`` near the cusp, whose fundamental system pairs
the physical collapse ``(tau - t)^2`` with a growing mode ``(tau - t)^-1``:
any drift between the velocity differences ``du`` and the gradient field
``g dx`` on a panel is amplified like ``(tau - t)^-3`` and eventually crosses
the markers, no matter how small the time step.  Since ``g`` is evolved
exactly along characteristics while ``u`` accumulates quadrature error, the
maintenance pass rebuilds ``u`` inside the window from the antiderivative of
the interpolated gradient field, restoring the ``u_x = g`` redundancy that
the continuum equations keep automatically.  See :func:`_remesh`.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .state import FieldState, MarkerCrossingError
from .steppers import ch_pressure, stable_dt, step
from .frames import (SPACE_POW, ModulationError, ModulationState,
                     gradient_vertex, track_modulation)

__all__ = [
    "RunConfig",
    "ConservationLog",
    "BlowupSeed",
    "RunResult",
    "run_to_blowup",
    "save_run",
    "load_run",
]


@dataclass(frozen=True)
class RunConfig:
    """Stopping, stepping, logging, and remeshing parameters of one run.

    ``g_stop`` is the gradient threshold: the run ends once
    ``min u_x <= -g_stop``.  It must dominate the initial gradient by three
    orders so the run actually probes the self-similar regime.

    ``remesh_window`` is the half-width, in similarity units, of the window
    around the tracked gradient minimum that is maintained after every
    snapshot (``None`` disables maintenance): degenerate panels are merged,
    depleted ones refilled against the local ladder spacing
    ``dy0 + (remesh_growth - 1) |y|``, and the velocity is rebuilt from the
    gradient antiderivative (see :func:`_remesh`).  Between snapshots a
    spacing watchdog fires an extra pass if the spacing at the minimum
    leaves ``[dy0 / remesh_spacing_ratio, dy0 * remesh_spacing_ratio]``
    (checked every ``remesh_check_every`` steps).
    """

    g_stop: float
    dt_max: float = math.inf
    cfl: float = 0.05
    snapshot_ratio: float = 0.7
    max_steps: int = 100_000
    remesh_window: float | None = 12.0
    remesh_growth: float = 1.015
    remesh_spacing_ratio: float = 4.0
    remesh_check_every: int = 16
    max_markers: int = 200_000

    def __post_init__(self):
        if not (self.g_stop > 0.0):
            raise ValueError("g_stop must be positive")
        if not (0.0 < self.cfl <= 0.2):
            raise ValueError("cfl must lie in (0, 0.2]")
        if not (0.0 < self.snapshot_ratio < 1.0):
            raise ValueError("snapshot_ratio must lie in (0, 1)")
        if self.dt_max <= 0.0:
            raise ValueError("dt_max must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.remesh_window is not None and self.remesh_window <= 0.0:
            raise ValueError("remesh_window must be positive")
        if not (1.0 < self.remesh_growth <= 1.1):
            raise ValueError("remesh_growth must lie in (1, 1.1]")
        if self.remesh_spacing_ratio <= 1.0:
            raise ValueError("remesh_spacing_ratio must exceed 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["dt_max"]):
            d["dt_max"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if d.get("dt_max") is None:
            d["dt_max"] = math.inf
        return cls(**d)


@dataclass
class ConservationLog:
    """Per-step conservation trace."""

    t: np.ndarray
    energy: np.ndarray
    g_min: np.ndarray
    g_absmax: np.ndarray
    p_max: np.ndarray
    px_max: np.ndarray

    def relative_drift(self, until: float = math.inf) -> float:
        """Max relative deviation of the invariant over t <= until."""
        sel = self.t <= until
        e = self.energy[sel]
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


@dataclass
class BlowupSeed:
    """Per-step refined gradient-minimum history."""

    t: np.ndarray
    g_min: np.ndarray
    x_min: np.ndarray
    u_min: np.ndarray
    tau_proj: np.ndarray


@dataclass
class RunResult:
    """Everything one blow-up run produced."""

    equation: str
    beta: float
    gamma: float
    config: RunConfig
    snapshots: list
    modulation: list
    conservation: ConservationLog
    seed: BlowupSeed
    stop_reason: str
    n_steps: int
    n_remeshes: int

    @property
    def t0(self) -> float:
        return float(self.snapshots[0].time)

    @property
    def t_final(self) -> float:
        return float(self.snapshots[-1].time)

    @property
    def tau_final(self) -> float:
        """Projected blow-up time at the end of the run."""
        return float(self.seed.tau_proj[-1])


def _remesh(state: FieldState, config: RunConfig, x_v: float,
            tau_minus_t: float):
    """Maintain the marker set around the gradient minimum.

    Three operations, all confined to ``|x - x_v| <= remesh_window`` in
    similarity units:

    1. merge away markers whose panel fell below half the seed spacing
       (exact panels only grow in similarity units, so such panels are
       numerically degenerate);
    2. insert equispaced markers into panels that depleted beyond
       ``remesh_growth * dy0``-scaled bounds, with ``g`` from a
       shape-preserving interpolant and fresh Riccati bookkeeping;
    3. rebuild ``u`` inside the window from the antiderivative of the
       interpolated gradient field, anchored at the window flanks with the
       (tiny) closure defect spread linearly.

    Step 3 is the essential one: ``u`` and ``g`` are evolved independently,
    and the collapse mode of a panel amplifies any drift between ``du`` and
    ``g dx`` like ``(tau - t)^-3``.  Re-deriving ``u`` from the
    Riccati-exact gradient field at every snapshot keeps the two fields
    mutually consistent, which is what actually lets marker ordering survive
    to the gradient threshold.  Existing markers keep their positions,
    gradients, and Riccati seeds untouched so interpolation errors are
    injected at most once per marker.
    """
    if config.remesh_window is None or state.dy0 is None:
        return state, 0
    scale = tau_minus_t ** SPACE_POW[state.equation] / math.sqrt(state.beta)
    half = config.remesh_window * scale
    x = state.x
    i0 = int(np.searchsorted(x, x_v - half, side="left"))
    i1 = int(np.searchsorted(x, x_v + half, side="right"))
    if i0 < 2 or i1 > x.size - 2 or i1 - i0 < 8:
        return state, 0

    # 1. greedy merge of degenerate panels (left to right, keep first)
    floor = 0.5 * state.dy0 * scale
    kept = [i0]
    for j in range(i0 + 1, i1):
        if x[j] - x[kept[-1]] >= floor:
            kept.append(j)
    kept = np.asarray(kept, dtype=int)

    # 2. refill depleted panels with equispaced insertions; the reference
    #    spacing mirrors the geometric seed ladder, whose width at offset
    #    |y| from the cusp is dy0 + (growth - 1) |y| in similarity units
    rho = config.remesh_growth - 1.0
    xq, fresh = [], []
    edges = np.concatenate([[i0 - 1], kept, [i1]])
    for a, b in zip(edges[:-1], edges[1:]):
        gap = x[b] - x[a]
        if a >= i0:
            xq.append(x[a])
            fresh.append(False)
        if a < i0 or b >= i1:
            continue
        y_mid = abs(0.5 * (x[a] + x[b]) - x_v) / scale
        loc = (state.dy0 + rho * y_mid) * scale
        if gap > 1.5 * loc:
            m = int(round(gap / loc))
            sub = x[a] + gap * np.arange(1, m) / m
            xq.extend(sub.tolist())
            fresh.extend([True] * (m - 1))
    xq = np.asarray(xq)
    fresh = np.asarray(fresh, dtype=bool)
    if i0 + xq.size + (x.size - i1) > config.max_markers:
        return state, 0

    # 3. fields: kept markers copy their data (xq[~fresh] is x[kept] in
    #    order), fresh markers interpolate g, and u is rebuilt everywhere in
    #    the window from the gradient antiderivative between the untouched
    #    flank anchors
    gsp = PchipInterpolator(x[i0 - 1:i1 + 1], state.g[i0 - 1:i1 + 1])
    gint = gsp.antiderivative()
    gq = np.empty_like(xq)
    gq[~fresh] = state.g[kept]
    gq[fresh] = gsp(xq[fresh])
    x0q = np.empty_like(xq)
    x0q[~fresh] = state.x0[kept]
    x0q[fresh] = np.interp(xq[fresh], x, state.x0)
    gsq = np.empty_like(xq)
    gsq[~fresh] = state.g_seed[kept]
    gsq[fresh] = gq[fresh]
    tsq = np.empty_like(xq)
    tsq[~fresh] = state.t_seed[kept]
    tsq[fresh] = state.time
    xa, xb = x[i0 - 1], x[i1]
    ua, ub = state.u[i0 - 1], state.u[i1]
    defect = (ub - ua) - (gint(xb) - gint(xa))
    uq = ua + (gint(xq) - gint(xa)) + defect * (xq - xa) / (xb - xa)

    new = replace(
        state,
        x=np.concatenate([x[:i0], xq, x[i1:]]),
        u=np.concatenate([state.u[:i0], uq, state.u[i1:]]),
        g=np.concatenate([state.g[:i0], gq, state.g[i1:]]),
        x0=np.concatenate([state.x0[:i0], x0q, state.x0[i1:]]),
        g_seed=np.concatenate([state.g_seed[:i0], gsq, state.g_seed[i1:]]),
        t_seed=np.concatenate([state.t_seed[:i0], tsq, state.t_seed[i1:]]),
    )
    return new, 1


def _spacing_degenerate(state: FieldState, config: RunConfig, x_v: float,
                        tau_minus_t: float) -> bool:
    """True when the spacing at the minimum left its healthy band."""
    if config.remesh_window is None or state.dy0 is None:
        return False
    i = int(np.searchsorted(state.x, x_v))
    i = min(max(i, 1), state.n_markers - 2)
    dx_local = min(state.x[i] - state.x[i - 1], state.x[i + 1] - state.x[i])
    scale = tau_minus_t ** SPACE_POW[state.equation] / math.sqrt(state.beta)
    ratio = dx_local / (state.dy0 * scale)
    return ratio > config.remesh_spacing_ratio or ratio < 1.0 / config.remesh_spacing_ratio


def run_to_blowup(state: FieldState, config: RunConfig) -> RunResult:
    """Integrate a seed state until the gradient threshold (or a stop signal).

    Returns a :class:`RunResult`; the stop reason is one of ``g_threshold``
    (normal completion), ``markers_crossed``, ``dt_underflow``,
    ``tracking_lost``, or ``max_steps``.
    """
    x_v, g_v, u_v = gradient_vertex(state)
    if config.g_stop < 1.0e3 * abs(g_v):
        raise ValueError(
            f"g_stop = {config.g_stop:.3g} must be at least 1e3 * |initial "
            f"min gradient| = {1e3 * abs(g_v):.3g}")

    seed_rows, cons_rows = [], []
    is_ch = state.equation == "ch"

    def log_step(st, xv, gv, uv):
        tau = st.time - 2.0 / gv
        seed_rows.append((st.time, gv, xv, uv, tau))
        if is_ch:
            p, px = ch_pressure(st.x, st.u, st.g, st.gamma)
            pm, pxm = float(np.max(np.abs(p))), float(np.max(np.abs(px)))
        else:
            pm = pxm = math.nan
        cons_rows.append((st.time, st.energy(), gv,
                          float(np.max(np.abs(st.g))), pm, pxm))
        return tau

    tau = log_step(state, x_v, g_v, u_v)
    snapshots = [state]
    mods = [track_modulation(state)]
    next_gap = (tau - state.time) * config.snapshot_ratio

    stop_reason = "max_steps"
    n_steps = 0
    n_remeshes = 0
    for _ in range(config.max_steps):
        dt = stable_dt(state, config.dt_max, config.cfl)
        if dt < 1e-13 * max(1.0, abs(state.time)):
            stop_reason = "dt_underflow"
            break
        try:
            state = step(state, dt)
        except MarkerCrossingError:
            stop_reason = "markers_crossed"
            break
        n_steps += 1
        try:
            x_v, g_v, u_v = gradient_vertex(state)
        except ModulationError:
            stop_reason = "tracking_lost"
            break
        tau = log_step(state, x_v, g_v, u_v)

        want_remesh = False
        if tau - state.time <= next_gap:
            snapshots.append(state)
            mods.append(track_modulation(state))
            next_gap *= config.snapshot_ratio
            want_remesh = True
        if g_v <= -config.g_stop:
            stop_reason = "g_threshold"
            break
        if not want_remesh and n_steps % config.remesh_check_every == 0:
            want_remesh = _spacing_degenerate(state, config, x_v,
                                              tau - state.time)
        if want_remesh:
            state, done = _remesh(state, config, x_v, tau - state.time)
            n_remeshes += done

    if snapshots[-1] is not state:
        snapshots.append(state)
        try:
            mods.append(track_modulation(state))
        except ModulationError:
            mods.append(mods[-1])

    seed = BlowupSeed(*(np.asarray(col) for col in zip(*seed_rows)))
    cons = ConservationLog(*(np.asarray(col) for col in zip(*cons_rows)))
    return RunResult(
        equation=state.equation, beta=state.beta, gamma=state.gamma,
        config=config, snapshots=snapshots, modulation=mods,
        conservation=cons, seed=seed, stop_reason=stop_reason,
        n_steps=n_steps, n_remeshes=n_remeshes)


# ----------------------------------------------------------------------------
# on-disk layout: run.json + CSV columns (deterministic, digest-checked)
# ----------------------------------------------------------------------------

def _write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    data = ("\n".join(lines) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _read_csv(path, expect_header):
    with open(path, "rb") as fh:
        data = fh.read()
    lines = data.decode().strip().split("\n")
    if lines[0].split(",") != list(expect_header):
        raise ValueError(f"unexpected header in {path}")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    arr = np.asarray(rows, dtype=float).reshape(len(rows), len(expect_header))
    return [arr[:, j] for j in range(arr.shape[1])]


_SNAP_COLS = ("x", "u", "g", "x0", "g_seed", "t_seed")
_SEED_COLS = ("t", "g_min", "x_min", "u_min", "tau_proj")
_CONS_COLS = ("t", "energy", "g_min", "g_absmax", "p_max", "px_max")
_MOD_COLS = ("t", "s", "tau", "kappa", "xi", "g_min", "x_min", "u_min",
             "d3u_at_min")


def save_run(result: RunResult, run_dir: str) -> str:
    """Write a run to a directory; returns the manifest path.

    Layout: ``run.json`` (metadata, snapshot index, sha256 digests) plus
    ``seed.csv``, ``conservation.csv``, ``modulation.csv``, and one
    ``snapshots/snap_NNN.csv`` per snapshot.  All numbers are written via
    ``repr`` so the round trip is bit-exact and the digests deterministic.
    """
    os.makedirs(os.path.join(run_dir, "snapshots"), exist_ok=True)
    digests = {}
    digests["seed.csv"] = _write_csv(
        os.path.join(run_dir, "seed.csv"), _SEED_COLS,
        (result.seed.t, result.seed.g_min, result.seed.x_min,
         result.seed.u_min, result.seed.tau_proj))
    c = result.conservation
    digests["conservation.csv"] = _write_csv(
        os.path.join(run_dir, "conservation.csv"), _CONS_COLS,
        (c.t, c.energy, c.g_min, c.g_absmax, c.p_max, c.px_max))
    m = result.modulation
    digests["modulation.csv"] = _write_csv(
        os.path.join(run_dir, "modulation.csv"), _MOD_COLS,
        ([mm.time for mm in m], [mm.s for mm in m], [mm.tau for mm in m],
         [mm.kappa for mm in m], [mm.xi for mm in m], [mm.g_min for mm in m],
         [mm.x_min for mm in m], [mm.u_min for mm in m],
         [mm.d3u_at_min for mm in m]))

    snap_index = []
    for k, snap in enumerate(result.snapshots):
        rel = f"snapshots/snap_{k:03d}.csv"
        digests[rel] = _write_csv(
            os.path.join(run_dir, rel), _SNAP_COLS,
            (snap.x, snap.u, snap.g, snap.x0, snap.g_seed, snap.t_seed))
        snap_index.append({"file": rel, "time": snap.time,
                           "n_markers": snap.n_markers,
                           "core_x": snap.core_x, "dy0": snap.dy0})

    manifest = {
        "format": "blowup-run/1",
        "equation": result.equation,
        "beta": result.beta,
        "gamma": result.gamma,
        "t0": result.t0,
        "t_final": result.t_final,
        "tau_final": result.tau_final,
        "stop_reason": result.stop_reason,
        "n_steps": result.n_steps,
        "n_remeshes": result.n_remeshes,
        "config": result.config.to_dict(),
        "snapshots": snap_index,
        "digests": digests,
    }
    path = os.path.join(run_dir, "run.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_run(run_dir: str) -> RunResult:
    """Reload a saved run, verifying the digests recorded in run.json."""
    with open(os.path.join(run_dir, "run.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "blowup-run/1":
        raise ValueError("not a blowup-run directory")
    for rel, want in manifest["digests"].items():
        with open(os.path.join(run_dir, rel), "rb") as fh:
            got = hashlib.sha256(fh.read()).hexdigest()
        if got != want:
            raise ValueError(f"digest mismatch for {rel}; run directory corrupted")

    eq, beta, gamma = manifest["equation"], manifest["beta"], manifest["gamma"]
    seed = BlowupSeed(*_read_csv(os.path.join(run_dir, "seed.csv"), _SEED_COLS))
    cons = ConservationLog(*_read_csv(
        os.path.join(run_dir, "conservation.csv"), _CONS_COLS))
    mcols = _read_csv(os.path.join(run_dir, "modulation.csv"), _MOD_COLS)
    mods = [ModulationState(equation=eq, beta=beta, time=t, tau=tau, s=s,
                            kappa=kap, xi=xi, g_min=gm, x_min=xm, u_min=um,
                            d3u_at_min=d3)
            for t, s, tau, kap, xi, gm, xm, um, d3 in zip(*mcols)]
    snaps = []
    for entry in manifest["snapshots"]:
        cols = _read_csv(os.path.join(run_dir, entry["file"]), _SNAP_COLS)
        snaps.append(FieldState(
            equation=eq, time=entry["time"], x=cols[0], u=cols[1], g=cols[2],
            gamma=gamma, beta=beta, x0=cols[3], g_seed=cols[4], t_seed=cols[5],
            core_x=entry.get("core_x"), dy0=entry.get("dy0")))
    return RunResult(
        equation=eq, beta=beta, gamma=gamma,
        config=RunConfig.from_dict(manifest["config"]),
        snapshots=snaps, modulation=mods, conservation=cons, seed=seed,
        stop_reason=manifest["stop_reason"], n_steps=manifest["n_steps"],
        n_remeshes=manifest["n_remeshes"])
