"""Linearised receiver translational dynamics and the PI tracking autopilot.

State convention for the shipped default model: ``[px, py, pz, vx, vy, vz]``
deviations from the trim state, input ``u`` a commanded velocity per axis
followed through a first-order lag of time constant ``tau``.
"""
from dataclasses import dataclass

import numba
import numpy as np

from .errors import BoundViolation, ConfigError, NumericalDivergence
from .geometry import vec3


@dataclass(frozen=True)
class ReceiverLinearModel:
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    C: np.ndarray
    x0: np.ndarray = None
    u0: np.ndarray = None
    p_pr0: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError("A_r must be square", "A_r")
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        G = np.asarray(self.G, dtype=float).reshape(n, 3)
        C = np.asarray(self.C, dtype=float).reshape(3, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "x0", np.zeros(n) if self.x0 is None else np.asarray(self.x0, float))
        object.__setattr__(self, "u0", np.zeros(B.shape[1]) if self.u0 is None else np.asarray(self.u0, float))
        object.__setattr__(self, "p_pr0", np.zeros(3) if self.p_pr0 is None else vec3(self.p_pr0))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def default_receiver(tau=0.5, mass=15000.0):
    """Per-axis double integrator with a first-order velocity lag."""
    eye, z = np.eye(3), np.zeros((3, 3))
    A = np.block([[z, eye], [z, -eye / tau]])
    B = np.vstack([z, eye / tau])
    G = np.vstack([z, eye / mass])
    C = np.hstack([eye, z])
    return ReceiverLinearModel(A, B, G, C)


@dataclass(frozen=True)
class AutopilotGains:
    K_P: np.ndarray
    K_I: np.ndarray
    clamp: np.ndarray
    closure_speed: float = 0.75

    def __post_init__(self):
        object.__setattr__(self, "K_P", np.atleast_2d(np.asarray(self.K_P, dtype=float)))
        K_I = np.asarray(self.K_I, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "K_I", K_I)
        clamp = np.broadcast_to(np.asarray(self.clamp, dtype=float), (3,)).copy()
        if np.any(clamp <= 0):
            raise ConfigError("integrator clamp must be > 0", "clamp")
        object.__setattr__(self, "clamp", clamp)
        if not 0.5 <= self.closure_speed <= 1.0:
            raise ConfigError("closure_speed must lie in [0.5, 1.0] m/s", "closure_speed")


def clamp_from_closure_speed(K_I, closure_speed):
    """Per-axis clamp ``c_i = v_close / K_I[i, i]``."""
    d = np.abs(np.diag(np.asarray(K_I, dtype=float)))
    if np.any(d == 0):
        raise ConfigError("K_I diagonal must be nonzero to derive the clamp", "K_I")
    return closure_speed / d


def default_gains(tau=0.5, pole=1.0, closure_speed=0.75):
    """PI gains placing a triple closed-loop pole at ``-pole`` on every axis."""
    a = pole
    kv = 3 * a * tau - 1
    kp = 3 * a * a * tau
    ki = a ** 3 * tau
    eye = np.eye(3)
    K_P = np.hstack([kp * eye, kv * eye])
    K_I = ki * eye
    return AutopilotGains(K_P, K_I, clamp_from_closure_speed(K_I, closure_speed), closure_speed)


@numba.njit(cache=True)
def _receiver_rk4(x, du, F, A, B, G, dt):
    # input and disturbance held over the step
    c = B @ du + G @ F
    k1 = A @ x + c
    k2 = A @ (x + 0.5 * dt * k1) + c
    k3 = A @ (x + 0.5 * dt * k2) + c
    k4 = A @ (x + dt * k3) + c
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def receiver_step(x, u, F_r, dt, model):
    """One RK4 step of ``dx' = A dx + B du + G F_r``."""
    if not 0 < dt <= 0.02 + 1e-15 and not getattr(model, "_relaxed_dt", False):
        raise ValueError("dt must lie in (0, 0.02]")
    x = np.asarray(x, dtype=float)
    out = _receiver_rk4(x, np.asarray(u, dtype=float), vec3(F_r), model.A, model.B, model.G,
                        float(dt))
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > 1e6:
        raise NumericalDivergence("receiver state diverged")
    return out


def linear_rk4_step(x, A, dt):
    """RK4 for the autonomous system ``x' = A x`` (no step-size restriction)."""
    x = np.asarray(x, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return _receiver_rk4(x, np.zeros(1), np.zeros(3), A, np.zeros((A.shape[0], 1)),
                         np.zeros((A.shape[0], 3)), float(dt))


def saturate(e_I, gains):
    return np.clip(e_I, -gains.clamp, gains.clamp)


def autopilot_control(dx, e_I, gains):
    """``du = -K_P dx - K_I sat(e_I)``."""
    return -gains.K_P @ np.asarray(dx, dtype=float) - gains.K_I @ saturate(vec3(e_I), gains)


def integrator_update(e_I, p_pr, u_hat, dt, gains):
    """Euler update of the tracking-error integral, clamped per axis."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return saturate(vec3(e_I) + (vec3(p_pr) - vec3(u_hat)) * dt, gains)


@dataclass(frozen=True)
class StabilityReport:
    passed: bool
    spectral_abscissa: float
    eigenvalues: np.ndarray


def closed_loop_matrix(model, gains):
    """Linear closed loop in ``[dx, e_I]`` with the integrator unsaturated."""
    n = model.n
    top = np.hstack([model.A - model.B @ gains.K_P, -model.B @ gains.K_I])
    bottom = np.hstack([model.C, np.zeros((3, 3))])
    return np.vstack([top, bottom])


def stability_check(model, gains):
    lam = np.linalg.eigvals(closed_loop_matrix(model, gains))
    abscissa = float(np.max(lam.real))
    return StabilityReport(abscissa < 0, abscissa, lam)


def terminal_tracking_error(u_hat_T, p_pr_T, B_pr=None):
    """``v_pr = u_hat(T) - p_pr(T)``; raises if a declared bound is exceeded."""
    v = vec3(u_hat_T) - vec3(p_pr_T)
    if B_pr is not None and np.linalg.norm(v) > B_pr:
        raise BoundViolation(f"|v_pr| = {np.linalg.norm(v):.4g} m exceeds B_pr = {B_pr:.4g} m")
    return v
