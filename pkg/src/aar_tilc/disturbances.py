"""Aerodynamic disturbance inputs.

Two tiers are provided.  The physical tier produces forces and wind
velocities that are fed into the hose and receiver dynamics (bow-wave
force, gust, turbulence).  The affine tier is the linearised terminal
offset map ``m0 + M1 @ dp_T + v_dr`` used for exact convergence studies.
"""
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, NoiseBoundViolation, NotNegativeDefinite
from .geometry import vec3
from .linalg import check_symmetric, is_negative_definite_general, validate_negative_definite


@dataclass(frozen=True)
class BowWaveSurrogate:
    """Gaussian-bump stand-in for the receiver forebody flow field.

    ``center`` locates the bump axis relative to the probe tip.  The lateral
    part of the force grows linearly with the radial distance ``r`` from that
    axis inside the bump (``r / sigma_r``) so the field is smooth everywhere;
    a negative ``c_r`` pulls the drogue toward the axis.
    """
    amplitude: float
    sigma_r: float
    sigma_x: float
    c_r: float
    c_x: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("bow wave amplitude must be >= 0", "amplitude")
        if not (self.sigma_r > 0 and self.sigma_x > 0):
            raise ConfigError("bow wave length scales must be > 0", "sigma_r")
        object.__setattr__(self, "center", tuple(float(c) for c in vec3(self.center)))

    def as_array(self):
        return np.array([self.amplitude, self.sigma_r, self.sigma_x, self.c_r, self.c_x,
                         *self.center])


@numba.njit(cache=True)
def _bow_force(dp, prm):
    amp, sr, sx, cr, cx = prm[0], prm[1], prm[2], prm[3], prm[4]
    qx = dp[0] - prm[5]
    qy = dp[1] - prm[6]
    qz = dp[2] - prm[7]
    g = amp * np.exp(-(qy * qy + qz * qz) / (2.0 * sr * sr)) * np.exp(-qx * qx / (2.0 * sx * sx))
    out = np.empty(3)
    out[0] = g * cx
    out[1] = g * cr * qy / sr
    out[2] = g * cr * qz / sr
    return out


def bow_wave_force(dp, model):
    """Force on the drogue for drogue-minus-probe offset ``dp``."""
    return _bow_force(vec3(dp), model.as_array())


@dataclass(frozen=True)
class DrogueOffsetMap:
    """Affine terminal offset map ``dp_e = m0 + M1 @ dp_T + v_dr``.

    ``M1`` must be symmetric negative definite unless ``allow_general`` is
    set, in which case only ``x' M1 x < 0`` is required and convergence has
    to be certified numerically.
    """
    m0: np.ndarray
    M1: np.ndarray
    allow_general: bool = False

    def __post_init__(self):
        object.__setattr__(self, "m0", vec3(self.m0))
        M1 = np.asarray(self.M1, dtype=float)
        if M1.shape != (3, 3):
            raise ConfigError("M1 must be 3x3", "M1")
        if self.allow_general:
            ok = is_negative_definite_general(M1)
        else:
            check_symmetric(M1)
            ok = validate_negative_definite(M1)
        if not ok:
            raise NotNegativeDefinite("M1 is not negative definite", "M1")
        object.__setattr__(self, "M1", M1)


def terminal_offset(dp_T, offset_map, v_dr=(0.0, 0.0, 0.0), B_dr=None):
    v_dr = vec3(v_dr)
    if B_dr is not None and np.linalg.norm(v_dr) > B_dr * (1 + 1e-12):
        raise NoiseBoundViolation(f"|v_dr| = {np.linalg.norm(v_dr):.4g} exceeds B_dr = {B_dr:.4g}")
    return offset_map.m0 + offset_map.M1 @ vec3(dp_T) + v_dr


@dataclass(frozen=True)
class GustSpec:
    """1-cosine gust: zero before ``onset``, full ``amplitude`` after ``onset + ramp``."""
    amplitude: tuple = (0.0, 0.0, 0.0)
    onset: float = 0.0
    ramp: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", tuple(float(a) for a in vec3(self.amplitude)))
        if self.ramp < 0:
            raise ConfigError("gust ramp must be >= 0", "ramp")


def gust_velocity(t, spec):
    amp = np.asarray(spec.amplitude)
    if t < spec.onset:
        return np.zeros(3)
    if spec.ramp == 0 or t >= spec.onset + spec.ramp:
        return amp.copy()
    return amp * 0.5 * (1.0 - np.cos(np.pi * (t - spec.onset) / spec.ramp))


def gust_force(t, spec, drag_gain):
    """Equivalent force of the gust wind through a linear drag map (N per m/s)."""
    return np.asarray(drag_gain, dtype=float) * gust_velocity(t, spec)


class Turbulence:
    """Exponentially correlated, clipped turbulence velocity (m/s) per axis.

    The process is a first-order (Ornstein-Uhlenbeck) filter of white noise,
    discretised exactly for the given step, with stationary standard deviation
    ``intensity``.  Each axis is clipped at ``clip * intensity`` so the
    induced terminal fluctuations stay bounded.
    """

    def __init__(self, rng, intensity, corr_time=1.0, clip=3.0):
        if intensity < 0 or corr_time <= 0:
            raise ConfigError("turbulence intensity must be >= 0 and corr_time > 0", "turbulence")
        self.rng = rng
        self.intensity = float(intensity)
        self.corr_time = float(corr_time)
        self.clip = float(clip)
        self._state = self.intensity * rng.standard_normal(3) if intensity > 0 else np.zeros(3)

    def sample(self, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if self.intensity == 0:
            return np.zeros(3)
        a = np.exp(-dt / self.corr_time)
        self._state = a * self._state + self.intensity * np.sqrt(1 - a * a) * self.rng.standard_normal(3)
        lim = self.clip * self.intensity
        return np.clip(self._state, -lim, lim)

    def series(self, n, dt):
        """``n`` consecutive samples as an ``(n, 3)`` array."""
        if self.intensity == 0:
            return np.zeros((n, 3))
        a = np.exp(-dt / self.corr_time)
        xi = self.rng.standard_normal((n, 3)) * self.intensity * np.sqrt(1 - a * a)
        out = _ou_filter(self._state.copy(), a, xi)
        self._state = out[-1].copy() if n else self._state
        lim = self.clip * self.intensity
        return np.clip(out, -lim, lim)


@numba.njit(cache=True)
def _ou_filter(x0, a, xi):
    out = np.empty_like(xi)
    x = x0
    for k in range(xi.shape[0]):
        x = a * x + xi[k]
        out[k] = x
    return out


def sample_turbulence(stream, t, dt, intensity):
    """One turbulence sample from a :class:`Turbulence` stream.

    ``t`` is accepted for interface symmetry; the process is stationary.
    """
    if stream.intensity != intensity:
        raise ValueError("stream intensity mismatch")
    return stream.sample(dt)


@dataclass(frozen=True)
class NoiseSpec:
    """Random-disturbance settings.

    ``B_dr``/``B_pr`` are declared bounds (m) on the drogue fluctuation and
    probe tracking error; ``None`` means undeclared.  Turbulence intensities
    are in m/s; ``measurement`` is the half-width (m) of uniform position
    measurement noise.
    """
    B_dr: float = None
    B_pr: float = None
    turbulence_drogue: float = 0.0
    turbulence_receiver: float = 0.0
    corr_time: float = 1.0
    measurement: float = 0.0
    gust: GustSpec = field(default_factory=GustSpec)

    def __post_init__(self):
        for name in ("B_dr", "B_pr"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be >= 0", name)
        for name in ("turbulence_drogue", "turbulence_receiver", "measurement"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", name)
        if self.corr_time <= 0:
            raise ConfigError("corr_time must be > 0", "corr_time")
