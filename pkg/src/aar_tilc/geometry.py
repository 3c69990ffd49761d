"""Docking geometry in the tanker joint frame.

Frame convention: x forward (tanker flight direction), y right, z down,
origin at the hose joint on the tanker.  All vectors are plain length-3
numpy arrays; the helpers here accept anything ``np.asarray`` accepts.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NoContact

CONTACT_TOL = 1e-9


def vec3(v):
    """Coerce to a finite float array of shape (3,)."""
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {a!r}")
    return a


@dataclass(frozen=True)
class DockingSample:
    t: float
    p_dr: np.ndarray
    p_pr: np.ndarray


@dataclass(frozen=True)
class DockingOutcome:
    T: float
    p_dr_T: np.ndarray
    p_pr_T: np.ndarray
    radial_error: float
    success: bool


def position_error(p_dr, p_pr):
    """Drogue position minus probe position."""
    return vec3(p_dr) - vec3(p_pr)


def radial_error(dp):
    """Error magnitude in the y-z plane; the x component is ignored."""
    dp = vec3(dp)
    return float(np.hypot(dp[1], dp[2]))


def detect_terminal_time(traj):
    """Find the first instant the probe reaches the drogue's central plane.

    ``traj`` is a sequence of :class:`DockingSample` (or ``(t, p_dr, p_pr)``
    tuples).  Returns ``(T, p_dr_T, p_pr_T)``; when the crossing falls between
    two samples everything is linearly interpolated in time.
    """
    samples = [s if isinstance(s, DockingSample) else DockingSample(*s) for s in traj]
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    t = np.array([s.t for s in samples], dtype=float)
    p_dr = np.array([vec3(s.p_dr) for s in samples])
    p_pr = np.array([vec3(s.p_pr) for s in samples])
    return terminal_crossing(t, p_dr, p_pr)


def terminal_crossing(t, p_dr, p_pr):
    """Array form of :func:`detect_terminal_time` (rows are samples)."""
    t = np.asarray(t, dtype=float)
    if np.any(np.diff(t) < 0):
        raise ValueError("sample times must be non-decreasing")
    dx = p_dr[:, 0] - p_pr[:, 0]
    if dx[0] <= 0:
        raise ValueError("first sample must have the probe behind the drogue (dx > 0)")
    hit = np.nonzero(dx <= 0)[0]
    if hit.size == 0:
        raise NoContact("probe never reached the drogue plane")
    i = int(hit[0])
    if dx[i] == 0:
        return float(t[i]), p_dr[i].copy(), p_pr[i].copy()
    # dx[i-1] > 0 > dx[i]
    s = dx[i - 1] / (dx[i - 1] - dx[i])
    T = t[i - 1] + s * (t[i] - t[i - 1])
    pd = p_dr[i - 1] + s * (p_dr[i] - p_dr[i - 1])
    pp = p_pr[i - 1] + s * (p_pr[i] - p_pr[i - 1])
    # interpolation round-off: put both on the same plane
    mid = 0.5 * (pd[0] + pp[0])
    pd[0] = pp[0] = mid
    return float(T), pd, pp


def docking_outcome(T, p_dr_T, p_pr_T, R_C):
    """Success iff the terminal radial error is strictly below ``R_C``."""
    if not R_C > 0:
        raise ValueError("R_C must be positive")
    p_dr_T, p_pr_T = vec3(p_dr_T), vec3(p_pr_T)
    r = radial_error(p_dr_T - p_pr_T)
    return DockingOutcome(float(T), p_dr_T, p_pr_T, r, bool(r < R_C))
