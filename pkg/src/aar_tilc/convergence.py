"""Between-attempt error recursion and its convergence certificate.

With the affine drogue map and ``p_pr(T) = u_hat - v_pr`` the learning loop
reduces to ``X(k) = A X(k-1) + v(k-1)`` for ``X = (docking error, probe
error)`` and a block upper-triangular ``A``.  Two noise vectors are offered:

* ``"exact"``: what the bookkeeping actually produces,
  top block ``(I - M1)^-1 (dv_dr + dv_pr)``;
* ``"drogue_only"``: the published form, top block ``(I - M1)^-1 dv_dr``.

``dv`` denotes the change of a noise term from one attempt to the next.
"""
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NotSymmetric, SingularMatrix
from .tilc import TilcGains, validate_gains

NOISE_FORMS = ("exact", "drogue_only")


@dataclass(frozen=True)
class AugmentedIteration:
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A: np.ndarray
    rho: float
    M1: np.ndarray
    B_pr: float = 0.0
    B_dr: float = 0.0

    @property
    def B_drpr(self):
        return nominal_bound(self.B_pr, self.B_dr)


@dataclass
class ErrorSequence:
    X: np.ndarray               # (k_max + 1, 6)
    noise: np.ndarray = None    # (k_max, 6) vectors v(k-1), k = 1..k_max

    @property
    def docking_error(self):
        return self.X[:, :3]

    @property
    def probe_error(self):
        return self.X[:, 3:]


def _inv_I_minus(M1):
    Q = np.eye(3) - np.asarray(M1, dtype=float)
    if np.linalg.cond(Q) > 1e12:
        raise SingularMatrix("M1 - I is singular")
    return np.linalg.inv(Q)


def build_augmented(M1, K_alpha, K_p, B_pr=0.0, B_dr=0.0):
    """Assemble ``A = [[A1, A2], [0, A3]]``; gains may be matrices or diagonals."""
    M1 = np.asarray(M1, dtype=float).reshape(3, 3)
    g = TilcGains(K_alpha, K_p)
    Ka, Kp = g.K_alpha, g.K_p
    # (M1 - I)^-1 = -(I - M1)^-1
    Minv = -_inv_I_minus(M1)
    I = np.eye(3)
    A1 = Minv @ (M1 - Ka)
    A2 = Minv @ (Kp + Ka - I)
    A3 = I - Kp
    A = np.block([[A1, A2], [np.zeros((3, 3)), A3]])
    return AugmentedIteration(A1, A2, A3, A, spectral_radius(A), M1, float(B_pr), float(B_dr))


def spectral_radius(A):
    return linalg.spectral_radius(np.asarray(A, dtype=float))


def nominal_bound(B_pr, B_dr):
    if B_pr < 0 or B_dr < 0:
        raise ValueError("noise bounds must be >= 0")
    return 2.0 * float(np.hypot(B_pr, B_dr))


def noise_vectors(M1, v_dr, v_pr, form="exact"):
    """Recursion inputs ``v(k-1)`` for k = 1..K from per-attempt noise
    samples ``v_dr[k]``, ``v_pr[k]`` (k = 0..K)."""
    if form not in NOISE_FORMS:
        raise ValueError(f"noise form must be one of {NOISE_FORMS}")
    v_dr = np.asarray(v_dr, dtype=float).reshape(-1, 3)
    v_pr = np.asarray(v_pr, dtype=float).reshape(-1, 3)
    Q = _inv_I_minus(M1)
    d_dr = np.diff(v_dr, axis=0)
    d_pr = np.diff(v_pr, axis=0)
    top = d_dr + d_pr if form == "exact" else d_dr
    return np.hstack([top @ Q.T, d_pr])


def initial_state(M1, m0, u_de, u_e, v_dr0=(0, 0, 0), v_pr0=(0, 0, 0)):
    """``X(0)`` for an affine-tier campaign starting from learning state
    ``(u_de, u_e)``."""
    Q = _inv_I_minus(M1)
    D0 = Q @ (np.asarray(m0) + np.asarray(v_dr0) + np.asarray(v_pr0)
              - np.asarray(u_de) - np.asarray(u_e))
    e0 = np.asarray(v_pr0) - np.asarray(u_e)
    return np.concatenate([D0, e0])


def iterate_recursion(it, X0, k_max, noise=None):
    """Direct iteration ``X(k) = A X(k-1) + v(k-1)``; ``noise`` is ``(k_max, 6)``."""
    A = it.A if isinstance(it, AugmentedIteration) else np.asarray(it, dtype=float)
    X = np.empty((k_max + 1, A.shape[0]))
    X[0] = np.asarray(X0, dtype=float)
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (k_max, A.shape[0]):
            raise ValueError(f"noise must have shape {(k_max, A.shape[0])}")
    for k in range(1, k_max + 1):
        X[k] = A @ X[k - 1]
        if noise is not None:
            X[k] += noise[k - 1]
    return ErrorSequence(X, noise)


def matrix_power(A, k):
    """``A**k`` by repeated squaring (independent of the direct iteration)."""
    A = np.asarray(A, dtype=float)
    out = np.eye(A.shape[0])
    base = A.copy()
    while k:
        if k & 1:
            out = out @ base
        base = base @ base
        k >>= 1
    return out


def contraction_norm(A, rho=None):
    """An induced norm with ``|A| < 1`` when one is found.

    Returns ``(norm, kappa, method)``: ``|A^i|_2 <= kappa * norm**i``.
    The spectral norm is tried first (``kappa = 1``).  Otherwise, for
    diagonalisable ``A = V diag(lam) V^-1``, the norm ``|V^-1 x|_2`` gives
    ``|A| = rho(A)`` with ``kappa = cond(V)``.
    """
    A = np.asarray(A, dtype=float)
    s = float(np.linalg.norm(A, 2))
    if s < 1:
        return s, 1.0, "spectral"
    lam, V = np.linalg.eig(A)
    kappa = float(np.linalg.cond(V))
    if not np.isfinite(kappa) or kappa > 1e10:
        return s, 1.0, "none"
    Vi = np.linalg.inv(V)
    scaled = float(np.linalg.norm(Vi @ A @ V, 2))
    if scaled < 1:
        return scaled, kappa, "eigen-scaled"
    return s, 1.0, "none"


def conservative_bound(B_pr, B_dr, A):
    """``kappa * 2 sqrt(B_pr^2 + B_dr^2) / (1 - |A|)`` or ``inf`` if no
    contracting norm was found."""
    n, kappa, method = contraction_norm(A)
    if n >= 1:
        return float("inf"), n, kappa, method
    return kappa * nominal_bound(B_pr, B_dr) / (1.0 - n), n, kappa, method


@dataclass
class Certificate:
    gains_valid: bool
    gain_violations: list
    M1_negative_definite: bool
    M1_symmetric: bool
    rho: float
    rho_pass: bool
    nominal_bound: float
    conservative_bound: float
    norm: float
    norm_kappa: float
    norm_method: str
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return self.gains_valid and self.M1_negative_definite and self.rho_pass

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "gains_valid": bool(self.gains_valid),
            "gain_violations": list(self.gain_violations),
            "M1_negative_definite": bool(self.M1_negative_definite),
            "M1_symmetric": bool(self.M1_symmetric),
            "spectral_radius": _num(self.rho),
            "spectral_radius_pass": bool(self.rho_pass),
            "nominal_bound": _num(self.nominal_bound),
            "conservative_bound": _num(self.conservative_bound),
            "contraction_norm": _num(self.norm),
            "contraction_norm_kappa": _num(self.norm_kappa),
            "contraction_norm_method": self.norm_method,
            "messages": list(self.messages),
        }


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def certify(M1, gains, B_pr=0.0, B_dr=0.0):
    """Never raises on bad input; every failed check is reported."""
    M1 = np.asarray(M1, dtype=float).reshape(3, 3)
    msgs = []
    violations = validate_gains(gains)
    msgs += [f"gain constraint: {v}" for v in violations]
    sym = True
    try:
        linalg.check_symmetric(M1)
    except NotSymmetric:
        sym = False
    negdef = linalg.is_negative_definite_general(M1)
    if not negdef:
        msgs.append("NotNegativeDefinite: M1 is not negative definite")
    elif not sym:
        msgs.append("M1 is not symmetric; convergence rests on the numerical spectral radius")
    try:
        it = build_augmented(M1, gains.k_alpha, gains.k_p)
        rho = it.rho
        A = it.A
    except SingularMatrix as e:
        msgs.append(f"SingularMatrix: {e}")
        rho, A = float("inf"), None
    rho_pass = bool(rho < 1)
    if not rho_pass:
        msgs.append(f"spectral radius {rho:.6g} >= 1")
    nominal = nominal_bound(B_pr, B_dr)
    if A is not None and rho_pass:
        cons, n, kappa, method = conservative_bound(B_pr, B_dr, A)
    else:
        cons, n, kappa, method = float("inf"), float("nan"), float("nan"), "none"
    return Certificate(not violations, violations, negdef, sym, rho, rho_pass, nominal, cons,
                       n, kappa, method, msgs)


# ---- noise samplers for the bounded-noise study

def sample_ball(rng, n, bound):
    """``n`` vectors uniform in the 3-ball of radius ``bound``."""
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = bound * rng.random(n) ** (1.0 / 3.0)
    return d * r[:, None]


def sample_sphere_alternating(rng, n, bound):
    """Worst-case style draws: on the sphere, flipping sign every attempt so
    the attempt-to-attempt difference has norm close to ``2 * bound``."""
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    jitter = rng.standard_normal((n, 3)) * 0.05
    v = sign[:, None] * d[None, :] + jitter
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return bound * v


def sample_noise(rng, n, bound, kind="mixed"):
    if bound == 0:
        return np.zeros((n, 3))
    if kind == "ball":
        return sample_ball(rng, n, bound)
    if kind == "alternating":
        return sample_sphere_alternating(rng, n, bound)
    if kind == "mixed":
        return sample_ball(rng, n, bound) if rng.random() < 0.5 else sample_sphere_alternating(rng, n, bound)
    raise ValueError(f"unknown noise kind {kind!r}")


def random_negative_definite(rng, lo=-10.0, hi=-1e-3):
    """Symmetric ``Q diag(lam) Q'`` with eigenvalues uniform in ``[lo, hi]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    lam = rng.uniform(lo, hi, 3)
    M = Q @ np.diag(lam) @ Q.T
    return 0.5 * (M + M.T)


def random_gains(rng):
    ka = rng.uniform(0.0, 1.0, 3)
    kp = 1.0 - rng.uniform(0.0, 1.0, 3)   # (0, 1]
    return TilcGains(ka, kp)
