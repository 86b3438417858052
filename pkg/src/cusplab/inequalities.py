"""Pointwise inequality audits for the normalized profile.

The stability argument for the cusp profile rests on five explicit
inequalities satisfied by the beta = 1 member of the family constructed in
:mod:`cusplab.profiles`.  Each one compares a damping-type expression built
from (Ubar, Ubar', Ubar'') against an algebraic forcing term.  This module
evaluates all five on a reproducible grid, reports signed margins, localizes
sign changes of the margin functions, and serializes the results.

The five checks, in the order returned by :func:`verify_all`:

``gradient_gap``
    2 + Ubar'(y) >= 6 y^2 / (5 (1 + y^2)) for all y.

``damping_weak``
    1 + Ubar' + (2/(1+y^2)) (5/2 + Ubar/y) >= y^2 / (5 (1 + y^2)).

``damping_strong``
    7/2 + 2 Ubar' + (1/(1+y^2)) (5/2 + Ubar/y) >= 19 y^2 / (10 (1 + y^2)).

``weighted_integral``
    delta * (1 + Ubar' + (2/(1+y^2)) (5/2 + Ubar/y) - y^2/(500 (1+y^2)))
    >= lam * |Ubar''| ((y^2+1)/y^2) * Int_0^y y'^2/(1+y'^2) dy'
    for some delta in (0, 1), at lam = 1.01.  The report carries the smallest
    admissible delta (the grid supremum of the ratio of the right side to the
    bracketed core); existence of any admissible delta < 1 is the claim.

``tail_comparison``
    With J(y) = Int_0^y dy'/(1 + y'^(2/5)) and lam = 1.0001,

        10/(13 (1+y^(2/5))) + Ubar'
            - (2 y^(2/5) / (5 (1+y^(2/5)))) (Ubar/y + (6/(13 y)) J(y))
        >= lam (y^(2/5) + 1) |Ubar''| J(y)

    for y >= m0 = 93.  Both sides are reported with the O(1) weight
    10^3 y^(2/5); the weighted margin changes sign once, near y ~ 92.88,
    so the region below m0 is a documented violation region rather than a
    defect.

All margins use the convention margin = rhs - lhs >= 0, with the damping
side as ``rhs``.  The removable singularities at y = 0 (Ubar/y and the
(y^2+1)/y^2-weighted integral) are evaluated through their analytic limits,
never by epsilon-offsets; the audit grid itself contains only positive y.
"""

import dataclasses
import hashlib
import json
import math

import numpy as np
from scipy.optimize import brentq

from . import profiles

__all__ = [
    "InequalityConfig",
    "InequalityReport",
    "INEQUALITY_NAMES",
    "closed_form_j",
    "gradient_integral",
    "lower_bound_margin",
    "check_gradient_gap",
    "check_damping_weak",
    "check_damping_strong",
    "check_weighted_integral",
    "check_tail_comparison",
    "verify_all",
    "report_to_dict",
    "write_reports",
    "write_margins_csv",
]

INEQUALITY_NAMES = (
    "gradient_gap",
    "damping_weak",
    "damping_strong",
    "weighted_integral",
    "tail_comparison",
)

# y beyond the grid at which the tail comparison is additionally probed using
# the closed-form asymptotic evaluator (far outside any tabulated range).
TAIL_SPOT_CHECK_Y = 2.0e6


def default_grid(y_min=1e-3, y_max=1e4, n_log=4096, n_linear=512):
    """Audit grid: a dense linear run-up to ``y_min`` plus a log sweep.

    The grid is strictly positive (origin limits are handled analytically by
    the margin functions) and strictly increasing.
    """
    linear = np.linspace(0.0, y_min, n_linear + 1)[1:]
    logpart = np.geomspace(y_min, y_max, n_log)
    grid = np.unique(np.concatenate([linear, logpart]))
    return grid


@dataclasses.dataclass(frozen=True)
class InequalityConfig:
    """Knobs shared by the five checks.

    Parameters
    ----------
    lam_weighted : float
        The lambda of the weighted-integral check (> 1).
    lam_tail : float
        The lambda of the tail comparison (> 1).
    m0 : float
        Lower edge of the claimed verification range for the tail
        comparison.
    y_grid : ndarray
        Strictly increasing, strictly positive audit grid covering
        [1e-3, 1e4].
    margin_tol : float
        Margins no worse than ``-margin_tol`` count as satisfied.
    """

    lam_weighted: float = 1.01
    lam_tail: float = 1.0001
    m0: float = 93.0
    y_grid: np.ndarray = dataclasses.field(default_factory=default_grid)
    margin_tol: float = 1e-9

    def __post_init__(self):
        if not (self.lam_weighted > 1.0 and self.lam_tail > 1.0):
            raise ValueError("lambda parameters must exceed 1")
        if not self.m0 > 0:
            raise ValueError("m0 must be positive")
        if self.margin_tol < 0:
            raise ValueError("margin_tol must be nonnegative")
        grid = np.asarray(self.y_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 16:
            raise ValueError("y_grid must be a 1-D array with >= 16 points")
        if not (np.all(np.diff(grid) > 0) and grid[0] > 0):
            raise ValueError("y_grid must be strictly increasing and positive")
        if grid[0] > 1e-3 or grid[-1] < 1e4:
            raise ValueError("y_grid must cover [1e-3, 1e4]")
        object.__setattr__(self, "y_grid", grid)


@dataclasses.dataclass(frozen=True)
class InequalityReport:
    """Outcome of one inequality audit.

    ``margin = rhs - lhs`` row-wise; ``verified_range`` is the maximal
    trailing y-interval of the audit grid on which the margin stays above
    ``-margin_tol`` (None if even the last grid point violates);
    ``crossings`` holds root-polished locations where the margin function
    changes sign.  ``delta_found`` is populated only by the
    weighted-integral check.
    """

    name: str
    y: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    verified_range: tuple | None
    crossings: tuple
    min_margin: float
    argmin_y: float
    margin_tol: float
    delta_found: float | None = None
    delta_required: float | None = None

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def satisfied(self):
        return self.verified_range is not None

    def violations(self):
        """Grid points where the margin is below -margin_tol."""
        return self.y[self.margin < -self.margin_tol]


# ---------------------------------------------------------------------------
# closed-form integrals
# ---------------------------------------------------------------------------

def closed_form_j(y):
    """J(y) = Int_0^y dy' / (1 + y'^(2/5)) in closed form.

    Substituting s = y^(1/5) gives 5 s^4/(1+s^2) under the integral, hence

        J(y) = (5/3) y^(3/5) - 5 (y^(1/5) - arctan(y^(1/5))).

    Nonnegative and increasing for y >= 0.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("closed_form_j is defined for y >= 0")
    s = y ** 0.2
    out = (5.0 / 3.0) * s ** 3 - 5.0 * (s - np.arctan(s))
    return out if out.ndim else float(out)


def gradient_integral(y):
    """Int_0^y y'^2 / (1 + y'^2) dy' = y - arctan(y) for y >= 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("gradient_integral is defined for y >= 0")
    out = y - np.arctan(y)
    return out if out.ndim else float(out)


def lower_bound_margin(table, y):
    """Margin of the odd-function floor Ubar(y) >= -(4/5) y - (6/5) arctan y.

    This bound is an ingredient of the damping checks' derivations; it is
    audited alongside them.  Returns Ubar(y) + (4/5) y + (6/5) arctan(y).
    """
    y = np.asarray(y, dtype=float)
    u, _, _ = profiles.eval_profile(table, y)
    return u + 0.8 * y + 1.2 * np.arctan(y)


# ---------------------------------------------------------------------------
# margin functions (lhs, rhs) with the damping side as rhs
# ---------------------------------------------------------------------------

def _require_unit_main(table):
    if table.family_name != "main":
        raise ValueError(
            "inequality audits apply to the main profile family, got "
            f"{table.family_name!r}")
    if table.beta != 1.0:
        raise ValueError(f"inequality audits require beta=1, got {table.beta}")


def _u_over_y(table, y):
    # analytic limit -2 at the origin (never hit by the audit grid, but the
    # crossing refinement may probe arbitrary points)
    y = np.asarray(y, dtype=float)
    u, du, d2u = profiles.eval_profile(table, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(y == 0.0, -2.0, u / np.where(y == 0.0, 1.0, y))
    return u, du, d2u, ratio


def _sides_gradient_gap(table, y):
    y = np.asarray(y, dtype=float)
    _, du, _ = profiles.eval_profile(table, y)
    lhs = 1.2 * y * y / (1.0 + y * y)
    rhs = 2.0 + du
    return lhs, rhs


def _sides_damping_weak(table, y):
    _, du, _, uy = _u_over_y(table, y)
    y = np.asarray(y, dtype=float)
    lhs = 0.2 * y * y / (1.0 + y * y)
    rhs = 1.0 + du + (2.0 / (1.0 + y * y)) * (2.5 + uy)
    return lhs, rhs


def _sides_damping_strong(table, y):
    _, du, _, uy = _u_over_y(table, y)
    y = np.asarray(y, dtype=float)
    lhs = 1.9 * y * y / (1.0 + y * y)
    rhs = 3.5 + 2.0 * du + (1.0 / (1.0 + y * y)) * (2.5 + uy)
    return lhs, rhs


def _sides_weighted_integral(table, y, lam):
    # reported at delta = 1: lhs is the weighted integral forcing, rhs the
    # bracketed damping core
    _, du, d2u, uy = _u_over_y(table, y)
    y = np.asarray(y, dtype=float)
    y2 = y * y
    core = 1.0 + du + (2.0 / (1.0 + y2)) * (2.5 + uy) - y2 / (500.0 * (1.0 + y2))
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(y == 0.0, 0.0,
                          ((y2 + 1.0) / np.where(y2 == 0.0, 1.0, y2))
                          * gradient_integral(np.abs(y)))
    lhs = lam * np.abs(d2u) * weight
    return lhs, core


def _sides_tail_comparison(table, y, lam):
    # both sides carry the O(1) normalization 10^3 y^(2/5)
    y = np.asarray(y, dtype=float)
    u, du, d2u, uy = _u_over_y(table, y)
    r = y ** 0.4
    j = closed_form_j(y)
    with np.errstate(invalid="ignore", divide="ignore"):
        j_over_y = np.where(y == 0.0, 1.0, j / np.where(y == 0.0, 1.0, y))
    core = (10.0 / (13.0 * (1.0 + r)) + du
            - (2.0 * r / (5.0 * (1.0 + r))) * (uy + (6.0 / 13.0) * j_over_y))
    lhs = lam * 1e3 * r * (r + 1.0) * np.abs(d2u) * j
    rhs = 1e3 * r * core
    return lhs, rhs


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

def _locate_crossings(margin_fn, y, margin):
    """Root-polish every sign change of the sampled margin."""
    sign = np.sign(margin)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    roots = []
    for k in flips:
        roots.append(brentq(margin_fn, y[k], y[k + 1], xtol=1e-10, rtol=1e-14))
    return tuple(roots)


def _trailing_range(y, margin, tol):
    bad = np.nonzero(margin < -tol)[0]
    if bad.size == 0:
        return (float(y[0]), float(y[-1]))
    if bad[-1] == len(y) - 1:
        return None
    return (float(y[bad[-1] + 1]), float(y[-1]))


def _assemble(name, sides_fn, table, y, margin_tol, **extra):
    lhs, rhs = sides_fn(table, y)
    margin = rhs - lhs

    def pointwise(t):
        a, b = sides_fn(table, t)
        return float(b - a)

    k = int(np.argmin(margin))
    return InequalityReport(
        name=name,
        y=y,
        lhs=lhs,
        rhs=rhs,
        verified_range=_trailing_range(y, margin, margin_tol),
        crossings=_locate_crossings(pointwise, y, margin),
        min_margin=float(margin[k]),
        argmin_y=float(y[k]),
        margin_tol=margin_tol,
        **extra,
    )


def check_gradient_gap(table, config=None):
    """Audit 2 + Ubar' >= 6 y^2/(5(1+y^2)) over the full grid.

    At y=0 the margin vanishes identically (2 - 2 - 0); at infinity it
    tends to 2 - 6/5 = 4/5.
    """
    config = config or InequalityConfig()
    _require_unit_main(table)
    return _assemble("gradient_gap", _sides_gradient_gap, table,
                     config.y_grid, config.margin_tol)


def check_damping_weak(table, config=None):
    """Audit the weak damping inequality over the full grid.

    Also audits the odd-function floor Ubar >= -(4/5) y - (6/5) arctan y on
    the same grid (an ingredient of the proof of this inequality); a floor
    violation voids ``verified_range``.
    """
    config = config or InequalityConfig()
    _require_unit_main(table)
    report = _assemble("damping_weak", _sides_damping_weak, table,
                       config.y_grid, config.margin_tol)
    if np.min(lower_bound_margin(table, config.y_grid)) < -config.margin_tol:
        report = dataclasses.replace(report, verified_range=None)
    return report


def check_damping_strong(table, config=None):
    """Audit the strong damping inequality over the full grid.

    Shares the odd-function floor audit with :func:`check_damping_weak`.
    """
    config = config or InequalityConfig()
    _require_unit_main(table)
    report = _assemble("damping_strong", _sides_damping_strong, table,
                       config.y_grid, config.margin_tol)
    if np.min(lower_bound_margin(table, config.y_grid)) < -config.margin_tol:
        report = dataclasses.replace(report, verified_range=None)
    return report


def check_weighted_integral(table, config=None):
    """Audit the weighted-integral inequality and report the smallest delta.

    The inequality asks for a delta in (0, 1) with
    delta * core(y) >= lam * forcing(y) grid-wide.  Because the core is
    strictly positive away from the origin, the smallest admissible delta is
    the grid supremum of lam * forcing / core; it is stored in
    ``delta_required`` and echoed in ``delta_found`` when it is below 1.
    The margins array is reported at delta = 1, so ``satisfied`` is
    equivalent to the existence of an admissible delta.
    """
    config = config or InequalityConfig()
    _require_unit_main(table)
    y = config.y_grid
    lhs, core = _sides_weighted_integral(table, y, config.lam_weighted)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(core > 0, lhs / np.where(core > 0, core, 1.0), np.inf)
    delta_required = float(np.max(ratio))
    report = _assemble(
        "weighted_integral",
        lambda t, yy: _sides_weighted_integral(t, yy, config.lam_weighted),
        table, y, config.margin_tol,
        delta_required=delta_required,
        delta_found=delta_required if delta_required < 1.0 else None,
    )
    if report.delta_found is None:
        report = dataclasses.replace(report, verified_range=None)
    return report


def check_tail_comparison(table, config=None):
    """Audit the weighted tail comparison for y >= m0.

    The margin is sampled on the grid restricted to y >= 1 plus a far spot
    check at y = 2e6 (evaluated through the asymptotic closed forms).  The
    claim is margin >= 0 on [m0, infinity); the single sign change of the
    margin below m0 is localized and reported in ``crossings``.
    """
    config = config or InequalityConfig()
    _require_unit_main(table)
    y = config.y_grid[config.y_grid >= 1.0]
    if y.size == 0 or y[0] > config.m0:
        raise ValueError("audit grid must reach below m0 from y=1")
    y = np.append(y, TAIL_SPOT_CHECK_Y)

    report = _assemble(
        "tail_comparison",
        lambda t, yy: _sides_tail_comparison(t, yy, config.lam_tail),
        table, y, config.margin_tol)

    # the claim starts at m0, not at the grid edge: satisfied means the
    # trailing verified range covers [m0, y_max]
    if report.verified_range is not None and report.verified_range[0] > config.m0:
        report = dataclasses.replace(report, verified_range=None)
    return report


def verify_all(table, config=None):
    """Run the five audits; returns {name: InequalityReport} in canon order."""
    config = config or InequalityConfig()
    return {
        "gradient_gap": check_gradient_gap(table, config),
        "damping_weak": check_damping_weak(table, config),
        "damping_strong": check_damping_strong(table, config),
        "weighted_integral": check_weighted_integral(table, config),
        "tail_comparison": check_tail_comparison(table, config),
    }


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def report_to_dict(report):
    """JSON-ready summary (margins array excluded; see write_margins_csv)."""
    grid_hash = hashlib.sha256(np.ascontiguousarray(report.y).tobytes())
    out = {
        "name": report.name,
        "satisfied": bool(report.satisfied),
        "verified_range": list(report.verified_range) if report.verified_range else None,
        "crossings": [float(c) for c in report.crossings],
        "min_margin": report.min_margin,
        "argmin_y": report.argmin_y,
        "margin_tol": report.margin_tol,
        "n_points": int(report.y.size),
        "grid_sha256": grid_hash.hexdigest(),
    }
    if report.delta_required is not None:
        out["delta_required"] = report.delta_required
        out["delta_found"] = report.delta_found
    return out


def write_reports(reports, path):
    """Serialize a {name: report} mapping to a JSON document."""
    doc = {
        "format": "inequality-report/1",
        "checks": [report_to_dict(reports[name]) for name in reports],
        "all_satisfied": all(reports[n].satisfied for n in reports),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc


def write_margins_csv(report, path):
    """Write the sampled margin rows: y, lhs, rhs, margin."""
    with open(path, "w") as fh:
        fh.write("y,lhs,rhs,margin\n")
        for y, lhs, rhs in zip(report.y, report.lhs, report.rhs):
            fh.write(f"{float(y)!r},{float(lhs)!r},{float(rhs)!r},"
                     f"{float(rhs - lhs)!r}\n")
