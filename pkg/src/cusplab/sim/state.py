"""Marker-ensemble state shared by the steppers, runner, and frame extraction.

A :class:`FieldState` is a Lagrangian description of one scalar field at one
instant: marker positions ``x``, field values ``u``, and the spatial gradient
``g = u_x`` carried along characteristics.  For Hunter-Saxton runs ``u`` holds
the velocity ``v``; for Burgers it holds the advected scalar.  Bookkeeping
columns (``x0``, ``g_seed``, ``t_seed``) remember where each marker was seeded
and what gradient it carried at its seed time, which lets diagnostics compare
the integrated gradient against the exact Riccati solution and lets frame
extraction find the boundary of the region seeded from the exact profile core.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

EQUATIONS = ("ch", "hs", "burgers")


class MarkerCrossingError(RuntimeError):
    """Raised when a step would fold the marker ensemble (x no longer sorted).

    Characteristic crossing means a shock/blow-up has been stepped over; the
    runner treats it as a terminal signal rather than a crash.
    """


@dataclass
class FieldState:
    """Lagrangian marker ensemble at a single time.

    Parameters
    ----------
    equation : str
        One of ``"ch"``, ``"hs"``, ``"burgers"``.
    time : float
        Current time.
    x, u, g : ndarray
        Marker positions (strictly increasing), field values, and gradients.
    gamma : float, optional
        Linear dispersion coefficient (Camassa-Holm only).
    beta : float, optional
        Profile normalization carried by the seed; used when mapping to the
        rescaled self-similar frame.
    x0 : ndarray, optional
        Seed-time positions of the markers (defaults to a copy of ``x``).
    g_seed, t_seed : ndarray, optional
        Gradient and time at which each marker was (re)seeded, for Riccati
        bookkeeping.  Default to ``g`` and ``time``.
    core_x : float, optional
        Physical half-width of the region seeded from the exact profile
        (inside the taper).  ``None`` when unknown.
    dy0 : float, optional
        Seed-time marker spacing at the origin in self-similar units, used by
        the runner's marker maintenance.  ``None`` disables maintenance.
    """

    equation: str
    time: float
    x: np.ndarray
    u: np.ndarray
    g: np.ndarray
    gamma: float = 0.0
    beta: float = 1.0
    x0: np.ndarray | None = None
    g_seed: np.ndarray | None = None
    t_seed: np.ndarray | None = None
    core_x: float | None = None
    dy0: float | None = None

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise ValueError(f"unknown equation {self.equation!r}")
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.x.size
        if self.u.size != n or self.g.size != n:
            raise ValueError("x, u, g must have equal length")
        if n < 3:
            raise ValueError("need at least 3 markers")
        if not np.all(np.diff(self.x) > 0.0):
            raise ValueError("marker positions must be strictly increasing")
        if self.equation != "ch" and self.gamma != 0.0:
            raise ValueError("gamma is only meaningful for the ch equation")
        if not (self.beta > 0.0) or not np.isfinite(self.beta):
            raise ValueError("beta must be positive and finite")
        if self.x0 is None:
            self.x0 = self.x.copy()
        else:
            self.x0 = np.asarray(self.x0, dtype=float)
        if self.g_seed is None:
            self.g_seed = self.g.copy()
        else:
            self.g_seed = np.asarray(self.g_seed, dtype=float)
        if self.t_seed is None:
            self.t_seed = np.full(n, self.time)
        else:
            self.t_seed = np.asarray(self.t_seed, dtype=float)
        for name in ("x0", "g_seed", "t_seed"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} must match marker count")

    @property
    def n_markers(self) -> int:
        return self.x.size

    def advanced(self, time: float, x: np.ndarray, u: np.ndarray,
                 g: np.ndarray) -> "FieldState":
        """New state with updated dynamical fields; bookkeeping is carried."""
        if not np.all(np.diff(x) > 0.0):
            raise MarkerCrossingError(
                f"markers crossed at t={time:.6g}; blow-up reached or step too large")
        new = replace(self, time=time, x=x, u=u, g=g)
        return new

    def riccati_gradient(self, time: float | None = None) -> np.ndarray:
        """Exact solution of Dg/Dt = -g^2/2 from each marker's seed data.

        This is the full gradient dynamics for Hunter-Saxton (the nonlocal
        term cancels identically) and the leading part for Camassa-Holm.
        """
        t = self.time if time is None else time
        return self.g_seed / (1.0 + 0.5 * self.g_seed * (t - self.t_seed))

    def energy(self) -> float:
        """Quadratic invariant monitored by the runner.

        ch: the H^1 energy ∫ (u^2 + u_x^2) dx.  hs: ∫ v_x^2 dx.  burgers:
        ∫ u^2 dx over the marker span, flux-corrected.  The velocity does
        not decay (it plateaus beyond the gradient taper), so ∫ u^2 between
        the end markers — characteristics moving at u/2 carrying constant
        u — changes at the constant rate (u_R^3 - u_L^3)/6; subtracting
        ``time`` times that rate yields an exact invariant of the flow.
        """
        if self.equation == "ch":
            return float(np.trapezoid(self.u ** 2 + self.g ** 2, self.x))
        if self.equation == "hs":
            return float(np.trapezoid(self.g ** 2, self.x))
        flux = (self.u[-1] ** 3 - self.u[0] ** 3) / 6.0
        return float(np.trapezoid(self.u ** 2, self.x) - self.time * flux)
