"""Single-step integrators for the marker ensembles.

All three equations are advanced along characteristics, which keeps the
gradient dynamics local:

* Hunter-Saxton: ``Dg/Dt = -g^2/2`` exactly — the nonlocal term drops out of
  the gradient equation — so the per-step update composes the closed-form
  Riccati flow and is exact in exact arithmetic.  Positions and velocities
  use classical RK4 with the closed-form gradient at stage times.
* Camassa-Holm: ``Du/Dt = -p_x`` and ``Dg/Dt = -g^2/2 + u^2 + 2*gamma*u - p``
  with the nonlocal pressure ``p = k * (u^2 + g^2/2 + 2*gamma*u)``,
  ``k = exp(-|x|)/2``.  The convolution is evaluated exactly for the
  piecewise-linear interpolant of the integrand (expm1-stable segment
  weights, prefix sums in exponentially shifted coordinates), and the full
  system is advanced with classical RK4.
* Burgers: the characteristic solution is closed-form; the step is exact.
  The half-speed convention ``u_t + u u_x / 2 = 0`` matches the comparison
  profile's origin normalization, so the gradient follows the same half-rate
  Riccati flow as the wave equations.
"""

from __future__ import annotations

import math

import numpy as np

from .state import FieldState, MarkerCrossingError

__all__ = [
    "stable_dt",
    "hs_qx",
    "ch_pressure",
    "step_hs",
    "step_ch",
    "step_burgers",
    "step",
    "burgers_oracle",
]

# span guard for the exponentially shifted prefix sums (exp(600) ~ 1e260)
_MAX_KERNEL_SPAN = 1200.0


def stable_dt(state: FieldState, dt_max: float = math.inf, cfl: float = 0.05) -> float:
    """Gradient-limited step size min(dt_max, cfl / max|g|)."""
    gmax = float(np.max(np.abs(state.g)))
    if gmax == 0.0:
        return dt_max
    return min(dt_max, cfl / gmax)


# ----------------------------------------------------------------------------
# Hunter-Saxton
# ----------------------------------------------------------------------------

def hs_qx(x, g):
    """Gradient of the Hunter-Saxton potential, normalized to vanish at -inf.

    The velocity satisfies Dv/Dt = -q_x with q_xx = -g^2/2, so
    q_x(x) = -1/2 * int_{-inf}^{x} g^2 dx' (the gradient is compactly
    supported, so the integral converges on the marker span).
    """
    x = np.asarray(x, dtype=float)
    g2 = np.asarray(g, dtype=float) ** 2
    out = np.zeros_like(x)
    out[1:] = np.cumsum(0.5 * (g2[1:] + g2[:-1]) * np.diff(x))
    return -0.5 * out


def _riccati_half(g, dt):
    """Closed-form solution of dg/dt = -g^2/2 after time dt."""
    return g / (1.0 + 0.5 * g * dt)


def step_hs(state: FieldState, dt: float) -> FieldState:
    """One RK4 step of the Hunter-Saxton marker system.

    Positions and velocities are RK4-accurate; the gradient update is the
    exact Riccati flow (evaluated at stage times for the accelerations), so
    gradient trajectories stay on the closed-form solution to rounding error.
    """
    x0, v0, g0 = state.x, state.u, state.g
    g_half = _riccati_half(g0, 0.5 * dt)
    g_full = _riccati_half(g0, dt)

    a1 = -hs_qx(x0, g0)
    k1x = v0
    k2x = v0 + 0.5 * dt * a1
    a2 = -hs_qx(x0 + 0.5 * dt * k1x, g_half)
    k3x = v0 + 0.5 * dt * a2
    a3 = -hs_qx(x0 + 0.5 * dt * k2x, g_half)
    k4x = v0 + dt * a3
    a4 = -hs_qx(x0 + dt * k3x, g_full)

    x1 = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v1 = v0 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return state.advanced(state.time + dt, x1, v1, g_full)


# ----------------------------------------------------------------------------
# Camassa-Holm
# ----------------------------------------------------------------------------

def _exp_segments(x, s):
    """Exact kernel integrals of the piecewise-linear s over each panel.

    Returns (seg_l, seg_r) with
    seg_l[j] = int_{x_j}^{x_{j+1}} exp(z - x_{j+1}) s(z) dz   (weight at right end)
    seg_r[j] = int_{x_j}^{x_{j+1}} exp(x_j - z) s(z) dz       (weight at left end)
    """
    h = np.diff(x)
    if np.any(h <= 0.0):
        raise MarkerCrossingError("markers crossed inside a stage evaluation")
    em = -np.expm1(-h)  # 1 - exp(-h), accurate for small h
    ds = np.diff(s)
    # c = 1 - (1 - exp(-h))/h suffers cancellation for tiny panels; switch to
    # its series there (truncation below 1e-16 for h < 1e-4)
    c = np.empty_like(h)
    small = h < 1e-4
    hs = h[small]
    c[small] = hs * (0.5 - hs / 6.0 + hs * hs / 24.0)
    c[~small] = 1.0 - em[~small] / h[~small]
    seg_l = s[:-1] * em + ds * c
    seg_r = s[1:] * em - ds * c
    return seg_l, seg_r


def _exp_convolve(x, s):
    """L_i = int_{-inf}^{x_i} e^{z-x_i} s dz and R_i = int_{x_i}^{inf} e^{x_i-z} s dz.

    The integrand is the piecewise-linear interpolant of s through the
    markers, extended by zero outside the span.  Prefix sums run in
    exponentially shifted coordinates; the partial sums are monotone for
    non-negative s, so the shift costs no relative precision.
    """
    span = x[-1] - x[0]
    if span > _MAX_KERNEL_SPAN:
        raise ValueError(f"marker span {span:.3g} too wide for the exponential kernel")
    seg_l, seg_r = _exp_segments(x, s)
    c0 = x[x.size // 2]
    left = np.zeros_like(x)
    left[1:] = np.cumsum(seg_l * np.exp(x[1:] - c0))
    left *= np.exp(-(x - c0))
    right = np.zeros_like(x)
    right[:-1] = np.cumsum((seg_r * np.exp(-(x[:-1] - c0)))[::-1])[::-1]
    right *= np.exp(x - c0)
    return left, right


def ch_pressure(x, u, g, gamma=0.0):
    """Nonlocal Camassa-Holm pressure and its gradient at the markers.

    p = k * S with kernel k = exp(-|x|)/2 and source S = u^2 + g^2/2
    + 2*gamma*u; p_x carries the kernel's sign.  Exact for the
    piecewise-linear interpolant of S.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    s = u * (u + 2.0 * gamma) + 0.5 * g * g
    left, right = _exp_convolve(x, s)
    p = 0.5 * (left + right)
    px = 0.5 * (right - left)
    return p, px


def _ch_rhs(x, u, g, gamma):
    p, px = ch_pressure(x, u, g, gamma)
    du = -px
    dg = -0.5 * g * g + u * (u + 2.0 * gamma) - p
    return u, du, dg


def step_ch(state: FieldState, dt: float) -> FieldState:
    """One classical RK4 step of the Camassa-Holm marker system."""
    x0, u0, g0 = state.x, state.u, state.g
    gamma = state.gamma
    k1x, k1u, k1g = _ch_rhs(x0, u0, g0, gamma)
    k2x, k2u, k2g = _ch_rhs(x0 + 0.5 * dt * k1x, u0 + 0.5 * dt * k1u,
                            g0 + 0.5 * dt * k1g, gamma)
    k3x, k3u, k3g = _ch_rhs(x0 + 0.5 * dt * k2x, u0 + 0.5 * dt * k2u,
                            g0 + 0.5 * dt * k2g, gamma)
    k4x, k4u, k4g = _ch_rhs(x0 + dt * k3x, u0 + dt * k3u,
                            g0 + dt * k3g, gamma)
    x1 = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    u1 = u0 + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    g1 = g0 + dt / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    return state.advanced(state.time + dt, x1, u1, g1)


# ----------------------------------------------------------------------------
# Burgers
# ----------------------------------------------------------------------------

def step_burgers(state: FieldState, dt: float) -> FieldState:
    """Exact characteristic step for Burgers in the half-speed convention.

    The comparison profile is normalized by the same ``(1 + u_x/2)`` origin
    pin as the main family, which corresponds to ``u_t + u u_x / 2 = 0``
    (the standard equation for the half-amplitude field).  Characteristics
    then move with ``u/2``, ``u`` is advected, and the gradient follows the
    same half-rate Riccati flow ``dg/dt = -g^2/2`` as the wave equations, so
    all three equations share the ``t - 2/g`` blow-up projection.
    """
    denom = 1.0 + 0.5 * state.g * dt
    if np.any(denom <= 0.0):
        raise MarkerCrossingError("gradient blew up inside the requested step")
    return state.advanced(state.time + dt, state.x + 0.5 * dt * state.u,
                          state.u.copy(), state.g / denom)


def burgers_oracle(state0: FieldState, t: float) -> FieldState:
    """Exact Burgers solution at time t from the seed state (pre-shock).

    Raises ValueError if some characteristic gradient has already blown up
    before t, and MarkerCrossingError if the marker fan has folded.
    """
    if state0.equation != "burgers":
        raise ValueError("oracle is for burgers states")
    dt = t - state0.time
    denom = 1.0 + 0.5 * state0.g * dt
    if np.any(denom <= 0.0):
        raise ValueError("queried at or past the first gradient blow-up time")
    return state0.advanced(t, state0.x + 0.5 * dt * state0.u, state0.u.copy(),
                           state0.g / denom)


_STEPPERS = {"hs": step_hs, "ch": step_ch, "burgers": step_burgers}


def step(state: FieldState, dt: float) -> FieldState:
    """Advance one step with the equation-appropriate integrator."""
    if dt <= 0.0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    return _STEPPERS[state.equation](state, dt)
