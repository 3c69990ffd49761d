"""Terminal iterative learning controller.

The probe aims at one fixed point per attempt,
``u_hat = p_dr_e0 + u_de + u_e``, and only the terminal (contact-time)
positions of each attempt feed the learning.  ``u_de`` tracks the drogue's
terminal offset from its observed equilibrium through a first-order filter;
``u_e`` integrates the probe's terminal tracking error.
"""
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import vec3


def _diag3(g, name):
    a = np.asarray(g, dtype=float)
    if a.ndim == 0:
        a = np.full(3, float(a))
    elif a.shape == (3, 3):
        if np.any(a - np.diag(np.diag(a))):
            raise ConfigError(f"{name} must be diagonal", name)
        a = np.diag(a).copy()
    a = a.reshape(3)
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} must be finite", name)
    return a


@dataclass(frozen=True)
class TilcGains:
    """Diagonal learning gains, stored as their diagonals.

    Construction does not validate; call :func:`validate_gains` so a caller
    can report every violated constraint at once.
    """
    k_alpha: np.ndarray
    k_p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k_alpha", _diag3(self.k_alpha, "k_alpha"))
        object.__setattr__(self, "k_p", _diag3(self.k_p, "k_p"))

    @property
    def K_alpha(self):
        return np.diag(self.k_alpha)

    @property
    def K_p(self):
        return np.diag(self.k_p)


def validate_gains(g):
    """List of violated constraints; empty means the gains are admissible.

    Requires ``0 <= k_alpha_i < 1`` and ``0 < k_p_i <= 1`` on every axis.
    """
    out = []
    for i in range(3):
        a, p = g.k_alpha[i], g.k_p[i]
        if not 0.0 <= a:
            out.append(f"k_alpha[{i}] = {a:g} violates 0 <= k_alpha")
        if not a < 1.0:
            out.append(f"k_alpha[{i}] = {a:g} violates k_alpha < 1")
        if not 0.0 < p:
            out.append(f"k_p[{i}] = {p:g} violates 0 < k_p")
        if not p <= 1.0:
            out.append(f"k_p[{i}] = {p:g} violates k_p <= 1")
    return out


def require_valid(g):
    bad = validate_gains(g)
    if bad:
        key = "k_alpha" if "k_alpha" in bad[0] else "k_p"
        raise ConfigError("; ".join(bad), key)
    return g


@dataclass(frozen=True)
class TilcState:
    u_de: np.ndarray
    u_e: np.ndarray
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u_de", vec3(self.u_de))
        object.__setattr__(self, "u_e", vec3(self.u_e))
        if self.k < 0:
            raise ValueError("iteration index must be >= 0")

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros(3), 0)

    def to_dict(self):
        return {"u_de": self.u_de.tolist(), "u_e": self.u_e.tolist(), "k": int(self.k)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["u_de"], d["u_e"], int(d["k"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class AttemptRecord:
    p_dr_e0: np.ndarray
    p_dr_T: np.ndarray
    p_pr_T: np.ndarray
    T: float

    def __post_init__(self):
        for name in ("p_dr_e0", "p_dr_T", "p_pr_T"):
            object.__setattr__(self, name, vec3(getattr(self, name)))
        if not np.isfinite(self.T):
            raise ValueError("T must be finite")


def compute_reference(p_dr_e0, s):
    return vec3(p_dr_e0) + s.u_de + s.u_e


def terminal_offset_observed(rec):
    """Drogue terminal offset from its observed equilibrium."""
    return rec.p_dr_T - rec.p_dr_e0


def update_offset_estimate(s, rec, g):
    ka = g.k_alpha
    return ka * s.u_de + (1.0 - ka) * terminal_offset_observed(rec)


def probe_error(s, rec):
    """Terminal probe tracking error measured against the attempt's own
    offset estimate ``s.u_de`` (the value that built that attempt's reference)."""
    return rec.p_dr_e0 + s.u_de - rec.p_pr_T


def update_probe_compensation(s, rec, g):
    return s.u_e + g.k_p * probe_error(s, rec)


def record_attempt(s, rec, g):
    """Fold one attempt into the learning state.

    Both laws read the state the attempt was flown with: the offset update
    first, then the probe compensation whose error term uses the offset
    estimate that was inside that attempt's reference.
    """
    u_de = update_offset_estimate(s, rec, g)
    u_e = update_probe_compensation(s, rec, g)
    return TilcState(u_de, u_e, s.k + 1)
