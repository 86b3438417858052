"""Quantitative blow-up diagnostics over completed runs.

Pure post-processing: everything here consumes immutable run artifacts
(marker snapshots, modulation traces, the per-step gradient-minimum
history) and produces fitted numbers — the blow-up time and temporal rate
from the min-gradient history, the Hölder exponent of the near-cusp
velocity, growth exponents of Hölder seminorms, a pointwise audit of the
bootstrap stability envelopes in self-similar variables, and the
main-vs-Burgers profile comparison.

Estimator conventions
---------------------
* Blow-up time: ``1/|min g(t)|`` is fitted to ``a*(T - t)**b`` by
  maximizing the log-log regression r² over the single nonlinear unknown T
  (the inner problem is linear in ``log a`` and ``b``); on a pure power law
  the optimum is exact to the bracketing tolerance.
* Hölder exponent: slope of ``log|u - u(x*)|`` against ``log|x - x*|``,
  fitted on each side of the cusp separately and averaged.  Fit windows are
  expressed in similarity units and converted to physical radii with the
  collapse scale ``(tau - t)**sp``, so the window always probes the region
  where the profile dominates.
* Seminorms: ``[u]_{C^alpha}`` over a fixed interval is the max of
  ``|u_i - u_j| / |x_i - x_j|**alpha`` over a log-rank-stratified marker
  subset (512 by default).  Rank stratification keeps the smallest pair
  separations shrinking with the collapsing cusp, so temporal growth rates
  come out unbiased; a fixed-radius stratification would saturate instead.

Every fit refuses (raises :class:`FitRefusedError`) rather than silently
extrapolating when its sampling preconditions fail.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

from .profiles import build_profile, eval_profile, BURGERS_FAMILY
from .sim.frames import (SPACE_POW, AMP_POW, to_self_similar,
                         _nonuniform_derivative)

__all__ = [
    "FitRefusedError",
    "BlowupTimeFit",
    "HolderFit",
    "RateFit",
    "EnvelopeBound",
    "EnvelopeAudit",
    "BlowupReport",
    "ProfileComparison",
    "ENVELOPE_M",
    "ENVELOPE_BOUND_NAMES",
    "HOLDER_WINDOWS",
    "fit_blowup_time",
    "holder_exponent",
    "run_holder_exponent",
    "holder_seminorm",
    "seminorm_history",
    "holder_rate",
    "envelope_audit",
    "riccati_error",
    "profile_tail_fit",
    "profile_comparison",
    "analyze_run",
    "write_fit_csv",
]


class FitRefusedError(ValueError):
    """A diagnostic fit declined to run because its preconditions failed."""


# Default Hölder fit windows in similarity units.  The inner edge skips the
# quadratic-looking region |y| < 1 where the cusp has not yet steepened; the
# cubic-root profile approaches its tail exponent much more slowly than the
# main profile (its local log-slope is still 0.45 at y = 10), so the Burgers
# window sits two decades further out.
HOLDER_WINDOWS = {"ch": (1.0, 10.0), "hs": (1.0, 10.0), "burgers": (1.0e2, 1.0e4)}

# Concrete choice of the "sufficiently large" constant M in the envelope
# table: M**(1/8) = 1024, so the weighted curvature envelope clears the
# profile's origin slope (|U_yy| / |y| -> 256) by the same factor-4 margin
# the seed construction guarantees.  The two sup-norm envelopes inherit
# M**(3/4) ~ 1.2e18 and M ~ 1.2e24, far above the profile scales (256 and
# ~1.5e3), as befits bounds whose role is uniform control, not sharpness.
ENVELOPE_M = 1024.0 ** 8

ENVELOPE_BOUND_NAMES = (
    "envelope_core",
    "envelope_tail",
    "curvature_weighted",
    "origin_third",
    "sup_third",
    "sup_fourth",
)


# ---------------------------------------------------------------------------
# shared regression helper
# ---------------------------------------------------------------------------

def _loglog_fit(lx, ly):
    """Least-squares line through (lx, ly): slope, intercept, r2, stderr, resid."""
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - a @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(lx.size - 2, 1)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(ss_res / dof / sxx) if sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), r2, stderr, resid


# ---------------------------------------------------------------------------
# blow-up time fit
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class BlowupTimeFit:
    """Power-law fit 1/|min g(t)| = amplitude * (t_star - t)**rate."""

    t_star: float
    rate: float
    amplitude: float
    r2: float
    rate_stderr: float
    n_used: int
    t_window: tuple

    def to_dict(self):
        return {
            "t_star": self.t_star,
            "rate": self.rate,
            "amplitude": self.amplitude,
            "r2": self.r2,
            "rate_stderr": self.rate_stderr,
            "n_used": self.n_used,
            "t_window": list(self.t_window),
        }


def fit_blowup_time(t, g_min, *, min_samples=20, min_decades=2.0,
                    last_decades=None):
    """Fit the gradient-minimum history to 1/|min g| = a (T - t)**b.

    The unknown blow-up time T enters nonlinearly; for each trial T the
    remaining problem is an ordinary log-log regression, so the fit
    maximizes r²(T) — a coarse geometric scan of the terminal gap followed
    by bounded minimization in its logarithm.  On histories that follow an
    exact power law this recovers (T, b) to the bracketing tolerance.

    Parameters
    ----------
    t, g_min : array_like
        Strictly increasing sample times and the corresponding most
        negative gradient, e.g. ``result.seed.t`` and ``result.seed.g_min``.
    min_samples : int
        Fewer samples than this refuse the fit.
    min_decades : float
        Required span of |min g| in decades; shorter histories cannot
        separate T from the amplitude and are refused.
    last_decades : float, optional
        When given, restrict the regression to the final that-many decades
        of |min g| (useful when early transients are not yet power-law).

    Returns
    -------
    BlowupTimeFit

    Raises
    ------
    FitRefusedError
        On short, non-monotone, or dynamically too-narrow histories.
    """
    t = np.asarray(t, dtype=float)
    amp = np.abs(np.asarray(g_min, dtype=float))
    if t.ndim != 1 or t.shape != amp.shape:
        raise ValueError("t and g_min must be 1-D arrays of equal length")
    if t.size < min_samples:
        raise FitRefusedError(
            f"blow-up fit refused: {t.size} samples (need >= {min_samples})")
    if not np.all(np.diff(t) > 0):
        raise FitRefusedError(
            "blow-up fit refused: sample times are not strictly increasing")
    if not (np.all(np.isfinite(amp)) and np.all(amp > 0)):
        raise FitRefusedError(
            "blow-up fit refused: gradient history is not finite and nonzero")
    if not np.all(np.diff(amp) > 0):
        raise FitRefusedError(
            "blow-up fit refused: min-gradient history is not monotone")
    decades = math.log10(amp[-1] / amp[0])
    if decades < min_decades:
        raise FitRefusedError(
            f"blow-up fit refused: history spans {decades:.2f} decades of "
            f"|min g| (need >= {min_decades:g})")

    if last_decades is not None:
        sel = amp >= amp[-1] / 10.0 ** last_decades
        if int(np.count_nonzero(sel)) < min_samples:
            raise FitRefusedError(
                f"blow-up fit refused: only {int(np.count_nonzero(sel))} "
                f"samples in the final {last_decades:g} decades "
                f"(need >= {min_samples})")
        t, amp = t[sel], amp[sel]

    ly = -np.log(amp)
    t_last = float(t[-1])
    span = t_last - float(t[0])

    def neg_r2(log_gap):
        lx = np.log(t_last + math.exp(log_gap) - t)
        return -_loglog_fit(lx, ly)[2]

    # coarse scan over nine decades of candidate terminal gaps, then refine
    gaps = np.log(np.geomspace(span * 1e-9, span * 10.0, 257))
    k = int(np.argmin([neg_r2(g) for g in gaps]))
    lo, hi = gaps[max(k - 1, 0)], gaps[min(k + 1, gaps.size - 1)]
    opt = minimize_scalar(neg_r2, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 400})
    t_star = t_last + math.exp(float(opt.x))

    slope, intercept, r2, stderr, _ = _loglog_fit(np.log(t_star - t), ly)
    return BlowupTimeFit(
        t_star=float(t_star), rate=slope, amplitude=math.exp(intercept),
        r2=r2, rate_stderr=stderr, n_used=int(t.size),
        t_window=(float(t[0]), t_last))


# ---------------------------------------------------------------------------
# Hölder exponent at the cusp
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class HolderFit:
    """Two-sided log-log fit of the velocity oscillation about the cusp.

    ``alpha_hat`` averages the per-side slopes of log|u - u(x*)| against
    log|x - x*| over the radius window; the per-point regression data
    (``log_r``, ``log_osc``, ``side``, ``residuals``) are kept for CSV
    export and residual inspection.
    """

    alpha_hat: float
    window: tuple
    r2: float
    x_star: float
    stderr: float
    n_left: int
    n_right: int
    log_r: np.ndarray = dataclasses.field(repr=False)
    log_osc: np.ndarray = dataclasses.field(repr=False)
    side: np.ndarray = dataclasses.field(repr=False)
    residuals: np.ndarray = dataclasses.field(repr=False)

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError("window must satisfy r_min < r_max")
        if not 0.0 <= self.r2 <= 1.0:
            raise ValueError(f"r2 = {self.r2} escapes [0, 1]")

    def to_dict(self):
        return {
            "alpha_hat": self.alpha_hat,
            "window": list(self.window),
            "r2": self.r2,
            "x_star": self.x_star,
            "stderr": self.stderr,
            "n_left": self.n_left,
            "n_right": self.n_right,
        }


def holder_exponent(x, u, x_star, window, *, u_star=None, min_per_side=12):
    """Fit the cusp exponent from samples of u on both sides of x_star.

    Parameters
    ----------
    x, u : array_like
        Sample positions (strictly increasing) and values.
    x_star : float
        Cusp location; oscillations are measured about ``u(x_star)``.
    window : (float, float)
        Radius window ``r_min < |x - x_star| < r_max`` entering the fit.
    u_star : float, optional
        Value at the cusp; interpolated monotonically from the samples when
        omitted.
    min_per_side : int
        Starving either side below this refuses the fit.

    Returns
    -------
    HolderFit

    Raises
    ------
    FitRefusedError
        When either side of the window holds fewer than ``min_per_side``
        samples with nonzero oscillation.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    r_min, r_max = float(window[0]), float(window[1])
    if not 0.0 < r_min < r_max:
        raise ValueError(f"window must satisfy 0 < r_min < r_max, got {window}")
    if u_star is None:
        u_star = float(PchipInterpolator(x, u)(x_star))

    r = x - x_star
    osc = np.abs(u - u_star)
    pieces = []
    counts = {}
    for label, mask in (("left", (r < 0) & (-r >= r_min) & (-r <= r_max)),
                        ("right", (r > 0) & (r >= r_min) & (r <= r_max))):
        mask = mask & (osc > 0)
        n = int(np.count_nonzero(mask))
        counts[label] = n
        if n < min_per_side:
            raise FitRefusedError(
                f"exponent fit refused: {n} markers on the {label} side of "
                f"the window (need >= {min_per_side})")
        pieces.append((label, np.log(np.abs(r[mask])), np.log(osc[mask])))

    slopes, errs, ss_res, ss_tot = [], [], 0.0, 0.0
    log_r, log_osc, side, residuals = [], [], [], []
    for label, lx, ly in pieces:
        m, _, _, se, resid = _loglog_fit(lx, ly)
        slopes.append(m)
        errs.append(se)
        ss_res += float(resid @ resid)
        ss_tot += float(np.sum((ly - ly.mean()) ** 2))
        log_r.append(lx)
        log_osc.append(ly)
        side.append(np.full(lx.size, -1.0 if label == "left" else 1.0))
        residuals.append(resid)

    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HolderFit(
        alpha_hat=float(np.mean(slopes)), window=(r_min, r_max),
        r2=float(min(max(r2, 0.0), 1.0)), x_star=float(x_star),
        stderr=0.5 * math.hypot(*errs),
        n_left=counts["left"], n_right=counts["right"],
        log_r=np.concatenate(log_r), log_osc=np.concatenate(log_osc),
        side=np.concatenate(side), residuals=np.concatenate(residuals))


def run_holder_exponent(result, index=-1, window_y=None, min_per_side=12):
    """Hölder fit of one run snapshot, windowed in similarity units.

    The default window is :data:`HOLDER_WINDOWS` for the run's equation,
    converted to physical radii with the snapshot's collapse scale
    ``(tau - t)**sp``; the cusp location and value come from the tracked
    modulation at the same snapshot.  Windows reaching outside the
    profile-seeded core are refused, since the exponent is meaningful only
    where the self-similar profile dominates.
    """
    snap = result.snapshots[index]
    mod = result.modulation[index]
    if window_y is None:
        window_y = HOLDER_WINDOWS[result.equation]
    frame = to_self_similar(snap, mod)
    if window_y[1] > frame.clean_radius:
        raise FitRefusedError(
            f"exponent fit refused: window reaches y = {window_y[1]:g}, "
            f"outside the self-similar core (clean radius "
            f"{frame.clean_radius:.3g})")
    scale = mod.tau_minus_t ** SPACE_POW[result.equation] / math.sqrt(snap.beta)
    window = (window_y[0] * scale, window_y[1] * scale)
    return holder_exponent(snap.x, snap.u, mod.x_min, window,
                           u_star=mod.u_min, min_per_side=min_per_side)


# ---------------------------------------------------------------------------
# Hölder seminorms and their temporal rates
# ---------------------------------------------------------------------------

def _stratified_subset(d, n_sample):
    """Indices of ~n_sample entries stratified by log-rank of distance d."""
    order = np.argsort(d)
    n = d.size
    if n <= n_sample:
        return order
    ranks = np.unique(np.minimum(
        np.round(np.geomspace(1.0, n, n_sample)).astype(int) - 1, n - 1))
    return order[ranks]


def holder_seminorm(x, u, alpha, x_star, omega=None, n_sample=512):
    """Estimate [u]_{C^alpha} over omega as a max over sampled marker pairs.

    All-pairs evaluation is quadratic in the marker count; the estimator
    subsamples ``n_sample`` markers stratified by log-rank of distance to
    ``x_star`` (so the closest markers are always retained and the smallest
    pair separations track the cusp's collapsing scale) and maximizes
    ``|u_i - u_j| / |x_i - x_j|**alpha`` over the subset's pairs.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if omega is not None:
        sel = (x >= omega[0]) & (x <= omega[1])
        x, u = x[sel], u[sel]
    if x.size < 2:
        raise FitRefusedError(
            f"seminorm refused: {x.size} markers in the interval (need >= 2)")
    idx = _stratified_subset(np.abs(x - x_star), n_sample)
    xs, us = x[idx], u[idx]
    iu, ju = np.triu_indices(xs.size, k=1)
    dx = np.abs(xs[iu] - xs[ju])
    du = np.abs(us[iu] - us[ju])
    return float(np.max(du / dx ** alpha))


def seminorm_history(result, alpha, omega=None, n_sample=512):
    """Per-snapshot Hölder seminorm over a fixed interval.

    ``omega`` defaults to the profile-seeded core width centered on the
    final cusp location, the natural fixed interval containing every
    tracked minimum.  Returns ``(times, seminorms)``.
    """
    if omega is None:
        snap0 = result.snapshots[0]
        half = snap0.core_x if snap0.core_x is not None else \
            0.25 * float(snap0.x[-1] - snap0.x[0])
        center = result.modulation[-1].x_min
        omega = (center - half, center + half)
    times = np.array([s.time for s in result.snapshots])
    vals = np.array([
        holder_seminorm(s.x, s.u, alpha, m.x_min, omega, n_sample)
        for s, m in zip(result.snapshots, result.modulation)])
    return times, vals


@dataclasses.dataclass(frozen=True, eq=False)
class RateFit:
    """Temporal growth exponent of one Hölder seminorm.

    ``exponent`` is the fitted power of (t_star - t)**-1; ``expected`` is
    the self-similar prediction alpha*sp - am for the run's space and
    amplitude exponents (e.g. (5*alpha - 3)/2 for the main family).
    """

    alpha: float
    exponent: float
    expected: float
    r2: float
    stderr: float
    n_used: int
    t_star: float
    times: np.ndarray = dataclasses.field(repr=False)
    seminorms: np.ndarray = dataclasses.field(repr=False)

    @property
    def relative_error(self) -> float:
        return abs(self.exponent - self.expected) / abs(self.expected)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "exponent": self.exponent,
            "expected": self.expected,
            "r2": self.r2,
            "stderr": self.stderr,
            "n_used": self.n_used,
            "t_star": self.t_star,
        }


def holder_rate(result, alpha, *, t_star=None, omega=None, n_sample=512,
                last_decades=2.5, min_snapshots=6):
    """Fit the divergence exponent of [u]_{C^alpha} as t approaches t_star.

    Only seminorms above the cusp exponent am/sp (3/5 for the main family,
    1/3 for Burgers) diverge; at or below it the seminorm stays bounded and
    the fit is refused.  The regression runs over the final ``last_decades``
    decades of (t_star - t), where the self-similar collapse dominates.

    Returns
    -------
    RateFit
    """
    sp = SPACE_POW[result.equation]
    am = AMP_POW[result.equation]
    threshold = am / sp
    if alpha <= threshold + 1e-12:
        raise FitRefusedError(
            f"rate fit refused: alpha = {alpha:g} is at or below the cusp "
            f"exponent {threshold:g}; the seminorm does not diverge")
    if t_star is None:
        t_star = fit_blowup_time(result.seed.t, result.seed.g_min).t_star

    times, vals = seminorm_history(result, alpha, omega, n_sample)
    tmt = t_star - times
    if np.any(tmt <= 0):
        raise FitRefusedError(
            "rate fit refused: t_star does not exceed every snapshot time")
    sel = tmt <= float(tmt.min()) * 10.0 ** last_decades
    n = int(np.count_nonzero(sel))
    if n < min_snapshots:
        raise FitRefusedError(
            f"rate fit refused: {n} snapshots in the final "
            f"{last_decades:g} decades (need >= {min_snapshots})")

    slope, _, r2, stderr, _ = _loglog_fit(np.log(tmt[sel]), np.log(vals[sel]))
    return RateFit(
        alpha=float(alpha), exponent=-slope, expected=alpha * sp - am,
        r2=r2, stderr=stderr, n_used=n, t_star=float(t_star),
        times=times[sel], seminorms=vals[sel])


# ---------------------------------------------------------------------------
# envelope audit in self-similar variables
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class EnvelopeBound:
    """Outcome of one pointwise envelope: worst margin and where it occurs."""

    name: str
    description: str
    ok: bool
    margin: float
    worst_y: float


@dataclasses.dataclass(frozen=True, eq=False)
class EnvelopeAudit:
    """Margins of the six stability envelopes on one self-similar frame.

    ``bounds`` follows :data:`ENVELOPE_BOUND_NAMES`; ``profiles`` maps the
    three pointwise envelopes to their per-y margin arrays over ``y_used``
    (positive margin means the envelope holds with room to spare).
    """

    equation: str
    s: float
    d3_origin: float
    bounds: tuple
    y_used: np.ndarray = dataclasses.field(repr=False)
    profiles: dict = dataclasses.field(repr=False)

    @property
    def ok(self) -> bool:
        return all(b.ok for b in self.bounds)

    def __getitem__(self, name):
        for b in self.bounds:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_dict(self):
        return {
            "equation": self.equation,
            "s": self.s,
            "d3_origin": self.d3_origin,
            "ok": self.ok,
            "bounds": [dataclasses.asdict(b) for b in self.bounds],
        }


def _origin_third_from_frame(y, uy, uyy, h):
    """U'''(0) by the profile module's Richardson stencil, on frame samples.

    Same (h, h/2) pair of 4th-order central second differences of U_y as
    ``profiles.third_derivative_origin``, with the slope samples drawn from
    a cubic Hermite interpolant of (U_y, U_yy) so the two audits remain
    directly comparable.
    """
    h = min(h, 0.25 * min(-float(y[0]), float(y[-1])))
    spline = CubicHermiteSpline(y, uy, uyy)

    def stencil(hh):
        p = spline(np.array([-2 * hh, -hh, 0.0, hh, 2 * hh]))
        return (-p[0] + 16 * p[1] - 30 * p[2] + 16 * p[3] - p[4]) / (
            12 * hh * hh)

    return float((16.0 * stencil(0.5 * h) - stencil(h)) / 15.0)


def envelope_audit(frame, table, *, m_const=ENVELOPE_M, stencil_h=0.02,
                   atol=1e-9):
    """Audit the six pointwise stability envelopes on a self-similar frame.

    The envelope table, with M = ``m_const``:

    1. ``envelope_core``       |U_y - U.'| <= y^2 / (1000 (1 + y^2))
    2. ``envelope_tail``       |U_y - U.'| <= 6 / (13 (1 + |y|^(2/5)))
    3. ``curvature_weighted``  |U_yy| <= M^(1/8) |y| / sqrt(1 + y^2)
    4. ``origin_third``        |U_yyy(0) - d3| <= 1, d3 the family constant
    5. ``sup_third``           max |U_yyy| <= M^(3/4)
    6. ``sup_fourth``          max |U_yyyy| <= M

    where U.' is the reference profile slope from ``table`` (the beta = 1
    member of the matching family).  Third and fourth derivatives are
    finite differences of the sampled curvature on the frame grid, except
    at the origin where the Richardson stencil shared with the profile
    module is used; its default width matches the modulation tracker's fit
    window, so the two third-derivative diagnostics probe the cusp at the
    same scale (narrower stencils amplify late-time marker jitter through
    the 1/h² second difference).  The audit restricts to the profile-seeded
    core (``frame.clean_radius``) and always returns: failures are reported as
    negative margins, never raised.  Margins within ``atol`` of zero count
    as satisfied, absorbing resampling round-off at the origin pins where
    both sides of an envelope vanish.

    Note on late-time verdicts: the first envelope shrinks like y²/1000
    near the origin, demanding third-derivative agreement with the profile
    to one part in a thousand — tighter than the tracked profile
    convergence of a desk-scale run — so a negative ``envelope_core``
    margin at small |y| late in a run measures resolution, not instability.
    The origin pin (bound 4) is the contracted late-time check.
    """
    expected_family = "burgers" if frame.equation == "burgers" else "main"
    if table.family_name != expected_family:
        raise ValueError(
            f"envelope audit for a {frame.equation} frame needs the "
            f"{expected_family} family table, got {table.family_name}")
    if table.beta != 1.0:
        raise ValueError("envelope audit expects the beta = 1 reference table")

    keep = np.abs(frame.y) <= frame.clean_radius * (1.0 + 1e-12)
    y = frame.y[keep]
    uy = frame.Uy[keep]
    uyy = frame.Uyy[keep]
    nz = y != 0.0

    _, du_bar, _ = eval_profile(table, y)
    dev = np.abs(uy - du_bar)
    d3_pin = table.family.d3_origin

    core = y ** 2 / (1000.0 * (1.0 + y ** 2)) - dev
    tail = 6.0 / (13.0 * (1.0 + np.abs(y) ** 0.4)) - dev
    curv = m_const ** 0.125 * np.abs(y) / np.sqrt(1.0 + y ** 2) - np.abs(uyy)

    d3_0 = _origin_third_from_frame(y, uy, uyy, stencil_h)
    u3 = _nonuniform_derivative(y, uyy)
    u4 = _nonuniform_derivative(y, u3)

    def pointwise(name, desc, margins, ys):
        k = int(np.argmin(margins))
        return EnvelopeBound(name=name, description=desc,
                             ok=bool(margins[k] >= -atol),
                             margin=float(margins[k]), worst_y=float(ys[k]))

    k3 = int(np.argmax(np.abs(u3)))
    k4 = int(np.argmax(np.abs(u4)))
    bounds = (
        pointwise("envelope_core",
                  "|U_y - profile slope| <= y^2/(1000(1+y^2))", core[nz], y[nz]),
        pointwise("envelope_tail",
                  "|U_y - profile slope| <= 6/(13(1+|y|^(2/5)))", tail, y),
        pointwise("curvature_weighted",
                  "|U_yy| <= M^(1/8)|y|/sqrt(1+y^2)", curv[nz], y[nz]),
        EnvelopeBound(name="origin_third",
                      description=f"|U_yyy(0) - {d3_pin:g}| <= 1",
                      ok=bool(abs(d3_0 - d3_pin) <= 1.0 + atol),
                      margin=float(1.0 - abs(d3_0 - d3_pin)), worst_y=0.0),
        EnvelopeBound(name="sup_third",
                      description="max |U_yyy| <= M^(3/4)",
                      ok=bool(abs(u3[k3]) <= m_const ** 0.75 + atol),
                      margin=float(m_const ** 0.75 - abs(u3[k3])),
                      worst_y=float(y[k3])),
        EnvelopeBound(name="sup_fourth",
                      description="max |U_yyyy| <= M",
                      ok=bool(abs(u4[k4]) <= m_const + atol),
                      margin=float(m_const - abs(u4[k4])),
                      worst_y=float(y[k4])),
    )
    return EnvelopeAudit(
        equation=frame.equation, s=frame.s, d3_origin=d3_0, bounds=bounds,
        y_used=y, profiles={"envelope_core": core, "envelope_tail": tail,
                            "curvature_weighted": curv})


# ---------------------------------------------------------------------------
# Riccati cross-check and profile comparison
# ---------------------------------------------------------------------------

def riccati_error(result, t_star, last_decades=1.0):
    """Worst |projected tau - t_star| over the final decade(s) of |min g|.

    The runner's per-step Riccati projection t + 2/|min g| estimates the
    blow-up time independently of any fitting; its late-time deviation from
    the fitted ``t_star`` bounds how far the gradient dynamics strays from
    the exact Riccati closed form.
    """
    amp = np.abs(result.seed.g_min)
    sel = amp >= amp[-1] / 10.0 ** last_decades
    return float(np.max(np.abs(result.seed.tau_proj[sel] - t_star)))


def profile_tail_fit(table, window=(1.0e3, 1.0e4), n_per_side=257):
    """Log-log tail-exponent fit of a profile table (about the origin).

    Samples |U| on a geometric grid inside ``window`` (odd-extended so both
    sides enter the shared fitting machinery) and returns the HolderFit;
    ``alpha_hat`` estimates the tail growth exponent — 3/5 for the main
    family, 1/3 for Burgers, with a slow O(y^{-2/5}) crossover that the
    default window keeps below one part in a hundred.
    """
    y = np.geomspace(window[0], window[1], n_per_side)
    x = np.concatenate([-y[::-1], y])
    u, _, _ = eval_profile(table, x)
    return holder_exponent(x, u, 0.0, window, u_star=0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class ProfileComparison:
    """Main-vs-Burgers profile series with their tail-exponent fits.

    ``dominance_from`` is the smallest grid ordinate beyond which
    |U_main| > |U_burgers| at every larger grid point (the y^(3/5) growth
    overtaking y^(1/3)); NaN if dominance is never reached on the grid.
    """

    y: np.ndarray = dataclasses.field(repr=False)
    u_main: np.ndarray = dataclasses.field(repr=False)
    u_burgers: np.ndarray = dataclasses.field(repr=False)
    main_fit: HolderFit
    burgers_fit: HolderFit
    dominance_from: float

    def to_dict(self):
        return {
            "main_fit": self.main_fit.to_dict(),
            "burgers_fit": self.burgers_fit.to_dict(),
            "dominance_from": self.dominance_from,
        }


def profile_comparison(main_table, burgers_table, y=None):
    """Compare the main blow-up profile against the Burgers baseline."""
    if main_table.family_name != "main":
        raise ValueError("first table must belong to the main family")
    if burgers_table.family_name != "burgers":
        raise ValueError("second table must belong to the burgers family")
    if y is None:
        y = np.geomspace(1e-2, 1e4, 513)
    y = np.asarray(y, dtype=float)
    u_main, _, _ = eval_profile(main_table, y)
    u_burg, _, _ = eval_profile(burgers_table, y)

    dominates = np.abs(u_main) > np.abs(u_burg)
    trailing = np.flatnonzero(~dominates)
    if dominates[-1]:
        start = 0 if trailing.size == 0 else trailing[-1] + 1
        dominance_from = float(y[start])
    else:
        dominance_from = math.nan

    return ProfileComparison(
        y=y, u_main=u_main, u_burgers=u_burg,
        main_fit=profile_tail_fit(main_table),
        burgers_fit=profile_tail_fit(burgers_table),
        dominance_from=dominance_from)


# ---------------------------------------------------------------------------
# full-report orchestration
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class BlowupReport:
    """Complete diagnostic record of one run.

    Scalar headline numbers plus the fits that produced them; the
    construction-time invariant is that the fitted blow-up time lies beyond
    the last snapshot actually simulated.
    """

    equation: str
    t_star: float
    x_star: float
    alpha_hat: float
    rate_exponents: dict
    riccati_error: float
    envelope_checks: dict
    t_last: float
    time_fit: BlowupTimeFit
    holder: HolderFit
    rates: tuple
    audit: EnvelopeAudit

    def __post_init__(self):
        if not self.t_star > self.t_last:
            raise ValueError(
                f"fitted blow-up time {self.t_star} does not exceed the "
                f"last snapshot time {self.t_last}")

    def to_dict(self):
        return {
            "equation": self.equation,
            "t_star": self.t_star,
            "x_star": self.x_star,
            "alpha_hat": self.alpha_hat,
            "rate_exponents": {repr(a): e for a, e in
                               self.rate_exponents.items()},
            "riccati_error": self.riccati_error,
            "envelope_checks": dict(self.envelope_checks),
            "t_last": self.t_last,
            "time_fit": self.time_fit.to_dict(),
            "holder": self.holder.to_dict(),
            "rates": [r.to_dict() for r in self.rates],
            "audit": self.audit.to_dict(),
        }

    def to_json(self, path=None):
        """Serialize to a JSON dict; write it when ``path`` is given."""
        data = self.to_dict()
        if path is not None:
            Path(path).write_text(json.dumps(data, indent=2) + "\n")
        return data


def analyze_run(result, table=None, *, alphas=(0.7, 0.8, 1.0),
                window_y=None, n_sample=512, last_decades=2.5):
    """Run every diagnostic on a completed run and assemble the report.

    Parameters
    ----------
    result : RunResult
        A finished blow-up run (``run_to_blowup`` output or ``load_run``).
    table : ProfileTable, optional
        beta = 1 reference table of the matching family; built on demand
        when omitted.
    alphas : sequence of float
        Seminorm orders for the temporal-rate fits; orders at or below the
        cusp exponent are skipped (their seminorms stay bounded).
    window_y, n_sample, last_decades
        Forwarded to the underlying estimators.
    """
    if table is None:
        family = BURGERS_FAMILY if result.equation == "burgers" else None
        table = build_profile() if family is None else build_profile(
            family=family)

    time_fit = fit_blowup_time(result.seed.t, result.seed.g_min)
    holder = run_holder_exponent(result, window_y=window_y)
    threshold = AMP_POW[result.equation] / SPACE_POW[result.equation]
    rates = tuple(
        holder_rate(result, a, t_star=time_fit.t_star, n_sample=n_sample,
                    last_decades=last_decades)
        for a in alphas if a > threshold + 1e-12)
    frame = to_self_similar(result.snapshots[-1], result.modulation[-1])
    audit = envelope_audit(frame, table)

    return BlowupReport(
        equation=result.equation,
        t_star=time_fit.t_star,
        x_star=float(result.modulation[-1].x_min),
        alpha_hat=holder.alpha_hat,
        rate_exponents={r.alpha: r.exponent for r in rates},
        riccati_error=riccati_error(result, time_fit.t_star),
        envelope_checks={b.name: b.ok for b in audit.bounds},
        t_last=result.t_final,
        time_fit=time_fit, holder=holder, rates=rates, audit=audit)


def write_fit_csv(fit, path):
    """Write one Hölder fit's regression data as CSV.

    Columns: side (-1 left, +1 right), log_r, log_osc, residual — the raw
    material of the log-log figures.  Floats use repr for bit-exact reload.
    """
    lines = ["side,log_r,log_osc,residual"]
    for s, lr, lo, rs in zip(fit.side, fit.log_r, fit.log_osc, fit.residuals):
        lines.append(",".join((repr(float(s)), repr(float(lr)),
                               repr(float(lo)), repr(float(rs)))))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
