"""Docking attempts, learning campaigns and Monte Carlo sweeps.

Attempt ``k`` (1-based) starts at ``first_attempt_time + (k - 1) * attempt_period``
of campaign time.  Each attempt:

1. resets the hose to its static shape under the wind at the start time and
   puts the probe ``standby_offset`` metres behind that drogue position;
2. holds the probe there for ``observation_window`` seconds while the drogue
   moves under turbulence, and averages the measured drogue positions;
3. computes the TILC reference and flies the approach at the closure speed
   until the probe reaches the drogue plane or the time budget runs out;
4. detects the terminal instant, scores it and updates the learning state.

Seeds: every random stream is drawn from
``SeedSequence(master_seed, spawn_key=(run, attempt, stream))`` with the
stream numbers in :data:`STREAMS`, so any attempt can be replayed alone.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numba
import numpy as np

from .disturbances import (BowWaveSurrogate, DrogueOffsetMap, NoiseSpec, Turbulence,
                           gust_velocity)
from .errors import ConfigError, InsufficientSamples, NumericalDivergence, SimTimeout
from .geometry import docking_outcome, radial_error, terminal_crossing, vec3
from .hose import HoseParams, _drogue_position, _hose_rk4, solve_equilibrium
from .receiver import AutopilotGains, ReceiverLinearModel, _receiver_rk4, default_gains, default_receiver
from .tilc import (AttemptRecord, TilcGains, TilcState, compute_reference, probe_error,
                   record_attempt, require_valid)
from .disturbances import _bow_force

DEFAULT_SEED = 20240607
STREAMS = {"turbulence_drogue": 0, "turbulence_receiver": 1, "measurement": 2, "affine": 3}
TIERS = ("physical", "affine")
DECIMATE = 10
TERMINAL_KEEP = 0.5     # seconds of full-rate samples kept before contact


@dataclass(frozen=True)
class Scenario:
    hose: HoseParams = field(default_factory=HoseParams)
    receiver: ReceiverLinearModel = field(default_factory=default_receiver)
    autopilot: AutopilotGains = field(default_factory=default_gains)
    tier: str = "physical"
    bow: BowWaveSurrogate = None
    offset_map: DrogueOffsetMap = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    receiver_gust_gain: float = 0.0          # N per m/s of wind on the receiver
    tilc: TilcGains = field(default_factory=lambda: TilcGains(0.2, 0.8))
    warm_start: TilcState = field(default_factory=TilcState.zero)
    R_C: float = 0.15
    standby_offset: float = 5.0
    observation_window: float = 10.0
    dt: float = 1e-3
    max_attempt_duration: float = 60.0
    attempt_period: float = 50.0
    first_attempt_time: float = 50.0
    attempts: int = 4
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ConfigError(f"tier must be one of {TIERS}", "tier")
        if not self.R_C > 0:
            raise ConfigError("R_C must be > 0", "R_C")
        if not self.standby_offset > 0:
            raise ConfigError("standby_offset must be > 0", "standby_offset")
        if not 0 < self.dt <= 0.02:
            raise ConfigError("dt must lie in (0, 0.02]", "dt")
        if self.observation_window < 1.0:
            raise ConfigError("observation_window must be >= 1 s", "observation_window")
        if self.max_attempt_duration <= self.observation_window:
            raise ConfigError("max_attempt_duration must exceed the observation window",
                              "max_attempt_duration")
        if not self.attempt_period > 0:
            raise ConfigError("attempt_period must be > 0", "attempt_period")
        if self.attempts < 1:
            raise ConfigError("attempts must be >= 1", "attempts")
        if self.receiver_gust_gain < 0:
            raise ConfigError("receiver_gust_gain must be >= 0", "receiver_gust_gain")
        require_valid(self.tilc)
        if self.tier == "affine" and self.offset_map is None:
            raise ConfigError("affine tier needs m0 and M1", "M1")
        if self.tier == "physical":
            r = self.receiver
            if r.n != 6 or not np.allclose(r.C, np.hstack([np.eye(3), np.zeros((3, 3))])):
                raise ConfigError("physical tier needs the [position, velocity] receiver layout",
                                  "C_r")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0", "seed")

    def attempt_start(self, k):
        return self.first_attempt_time + (k - 1) * self.attempt_period


@dataclass
class AttemptLog:
    k: int
    t_start: float
    p_dr_e0: np.ndarray
    u_hat: np.ndarray
    T: float
    p_dr_T: np.ndarray
    p_pr_T: np.ndarray
    radial_error: float
    success: bool
    timeout: bool
    state_before: TilcState
    state_after: TilcState
    e_pr: np.ndarray = None
    closure_speed: float = float("nan")
    trajectory: np.ndarray = None      # columns t, p_dr xyz, p_pr xyz, phase

    def summary(self):
        def lst(a):
            return None if a is None else [float(v) for v in a]
        return {
            "k": self.k, "t_start": self.t_start, "p_dr_e0": lst(self.p_dr_e0),
            "u_hat": lst(self.u_hat), "T": None if self.timeout else float(self.T),
            "p_dr_T": lst(self.p_dr_T), "p_pr_T": lst(self.p_pr_T),
            "radial_error": None if self.timeout else float(self.radial_error),
            "success": bool(self.success), "timeout": bool(self.timeout),
            "closure_speed": None if not np.isfinite(self.closure_speed) else float(self.closure_speed),
            "state_before": self.state_before.to_dict(), "state_after": self.state_after.to_dict(),
        }


@dataclass
class CampaignResult:
    attempts: list
    run: int = 0

    @property
    def success_rate(self):
        return sum(a.success for a in self.attempts) / len(self.attempts)

    @property
    def first_success(self):
        """1-based index of the first success, or ``None``."""
        for a in self.attempts:
            if a.success:
                return a.k
        return None

    @property
    def learning_curve(self):
        return np.array([np.nan if a.timeout else a.radial_error for a in self.attempts])

    @property
    def final_state(self):
        return self.attempts[-1].state_after

    def summary(self):
        return {
            "run": self.run,
            "attempts": len(self.attempts),
            "success_rate": self.success_rate,
            "first_success": self.first_success,
            "radial_errors": [None if np.isnan(r) else float(r) for r in self.learning_curve],
            "successes": [bool(a.success) for a in self.attempts],
        }


def attempt_rng(master, run, attempt, stream):
    ss = np.random.SeedSequence(int(master), spawn_key=(int(run), int(attempt), STREAMS[stream]))
    return np.random.default_rng(ss)


def estimate_equilibrium(t, p):
    """Time average of the drogue positions ``p`` sampled at times ``t``.

    Samples are weighted by the trapezoid rule so uneven spacing is fine.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    if t.size < 2 or p.shape[0] != t.size:
        raise InsufficientSamples("need at least two drogue samples")
    span = t[-1] - t[0]
    if span < 1.0 - 1e-9:
        raise InsufficientSamples(f"observation window {span:.3g} s is shorter than 1 s")
    w = np.empty(t.size)
    dt = np.diff(t)
    w[0], w[-1] = dt[0] / 2, dt[-1] / 2
    w[1:-1] = (dt[:-1] + dt[1:]) / 2
    return (w[:, None] * p).sum(axis=0) / w.sum()


# ------------------------------------------------------------------ kernel

@numba.njit(cache=True)
def _phase_kernel(y, x, eI, prm, A, B, G, KP, KI, clamp, p_trim0, v_trim, uhat,
                  bow, wind, Fr, dt, nmax, stop_on_contact):
    """Fly one phase with the hose, receiver and autopilot stepped together.

    Returns the recorded drogue and probe positions (row ``k`` is time
    ``k * dt`` into the phase), the final states, the number of recorded
    rows and a status: 0 ran to ``nmax``, 1 contact, 2 diverged.
    """
    P_dr = np.empty((nmax + 1, 3))
    P_pr = np.empty((nmax + 1, 3))
    status = 0
    nrec = 0
    for k in range(nmax + 1):
        s = k * dt
        pd = _drogue_position(y, prm)
        pp = np.empty(3)
        for i in range(3):
            pp[i] = p_trim0[i] + v_trim[i] * s + x[i]
            P_dr[k, i] = pd[i]
            P_pr[k, i] = pp[i]
        nrec = k + 1
        if stop_on_contact and k > 0 and pd[0] - pp[0] <= 0.0:
            status = 1
            break
        if k == nmax:
            break
        # autopilot on the current (unsaturated-integral) state
        sat = np.empty(3)
        for i in range(3):
            sat[i] = min(max(eI[i], -clamp[i]), clamp[i])
        du = -(KP @ x) - KI @ sat
        for i in range(3):
            eI[i] = min(max(eI[i] + (pp[i] - uhat[i]) * dt, -clamp[i]), clamp[i])
        dp = pd - pp
        fb = _bow_force(dp, bow)
        x = _receiver_rk4(x, du, Fr[k], A, B, G, dt)
        y = _hose_rk4(y, prm, fb, wind[k], dt)
        big = 0.0
        for i in range(y.size):
            a = abs(y[i])
            if not a < 1e6:
                big = 1e300
        if big > 0.0:
            status = 2
            break
    return P_dr[:nrec], P_pr[:nrec], y, x, eI, nrec, status


@lru_cache(maxsize=64)
def _equilibrium_cached(hose, wind):
    st, pd = solve_equilibrium(hose, wind=np.array(wind))
    return st.as_vector(), pd


def hose_equilibrium(hose, wind):
    y, pd = _equilibrium_cached(hose, tuple(float(w) for w in vec3(wind)))
    return y.copy(), pd.copy()


def _wind_series(scn, t0, n, rng):
    """Gust plus drogue turbulence, one row per step."""
    spec = scn.noise
    t = t0 + np.arange(n) * scn.dt
    gust = np.array([gust_velocity(tt, spec.gust) for tt in t]) if any(spec.gust.amplitude) \
        else np.zeros((n, 3))
    turb = Turbulence(rng, spec.turbulence_drogue, spec.corr_time).series(n, scn.dt)
    return gust, turb


def _phase_inputs(scn, t0, n, rngs):
    gust, turb_dr = _wind_series(scn, t0, n, rngs["turbulence_drogue"])
    turb_r = Turbulence(rngs["turbulence_receiver"], scn.noise.turbulence_receiver,
                        scn.noise.corr_time).series(n, scn.dt)
    wind = gust + turb_dr
    Fr = scn.receiver_gust_gain * (gust + turb_r)
    return np.ascontiguousarray(wind), np.ascontiguousarray(Fr)


def _run_phase(scn, y, x, eI, p_trim0, v_trim, uhat, t0, nmax, rngs, stop_on_contact):
    wind, Fr = _phase_inputs(scn, t0, nmax, rngs)
    bow = scn.bow.as_array() if scn.bow is not None else np.array([0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    g = scn.autopilot
    m = scn.receiver
    out = _phase_kernel(y, x, eI, scn.hose.as_array(), m.A, m.B, m.G, g.K_P, g.K_I, g.clamp,
                        vec3(p_trim0), vec3(v_trim), vec3(uhat), bow, wind, Fr, scn.dt,
                        nmax, stop_on_contact)
    if out[6] == 2:
        raise NumericalDivergence("hose state diverged during the attempt")
    return out


def _closure_speed(t, p_pr, settle=5.0):
    """Mean probe x speed after the first ``settle`` seconds of the approach."""
    if t[-1] - t[0] <= settle + 0.5:
        return float("nan")
    i = np.searchsorted(t, t[0] + settle)
    return float((p_pr[-1, 0] - p_pr[i, 0]) / (t[-1] - t[i]))


def approach_speed_profile(t, p_pr, settle=5.0):
    """Finite-difference probe x speed after ``settle`` seconds."""
    i = np.searchsorted(t, t[0] + settle)
    return np.diff(p_pr[i:, 0]) / np.diff(t[i:])


def _decimate(t_sb, pd_sb, pp_sb, t_ap, pd_ap, pp_ap):
    n_sb = t_sb.size
    keep_sb = np.arange(0, n_sb, DECIMATE)
    keep_sb = keep_sb[t_sb[keep_sb] < t_ap[0]]     # the approach logs the switch instant
    n_ap = t_ap.size
    keep = set(range(0, n_ap, DECIMATE))
    keep.update(np.nonzero(t_ap >= t_ap[-1] - TERMINAL_KEEP)[0].tolist())
    keep_ap = np.array(sorted(keep), dtype=int)
    a = np.column_stack([t_sb[keep_sb], pd_sb[keep_sb], pp_sb[keep_sb], np.zeros(keep_sb.size)])
    b = np.column_stack([t_ap[keep_ap], pd_ap[keep_ap], pp_ap[keep_ap], np.ones(keep_ap.size)])
    return np.vstack([a, b])


def run_docking_attempt(scn, state, k=None, run=0, raise_on_timeout=True):
    """Fly attempt ``k`` (default ``state.k + 1``) and fold it into ``state``."""
    k = state.k + 1 if k is None else int(k)
    if scn.tier == "affine":
        return _affine_attempt(scn, state, k, run)
    rngs = {name: attempt_rng(scn.seed, run, k, name) for name in STREAMS}
    t0 = scn.attempt_start(k)
    dt = scn.dt
    y0, pd_nom = hose_equilibrium(scn.hose, gust_velocity(t0, scn.noise.gust))
    p_sb = pd_nom - np.array([scn.standby_offset, 0.0, 0.0])

    # standby: hold at the standby point and watch the drogue
    n_sb = int(round(scn.observation_window / dt))
    Pd, Pp, y, x, eI, nrec, _ = _run_phase(scn, y0, np.zeros(6), np.zeros(3), p_sb, np.zeros(3),
                                           p_sb, t0, n_sb, rngs, False)
    t_sb = t0 + np.arange(nrec) * dt
    meas = scn.noise.measurement
    noise = rngs["measurement"].uniform(-meas, meas, Pd.shape) if meas > 0 else 0.0
    p_e0 = estimate_equilibrium(t_sb, Pd + noise)
    u_hat = compute_reference(p_e0, state)

    # approach: re-express the receiver about a trim moving at the closure speed
    # that passes through the reference laterally
    v_close = scn.autopilot.closure_speed
    v_trim = np.array([v_close, 0.0, 0.0])
    p_abs, v_abs = Pp[-1], x[3:]
    trim0 = np.array([p_abs[0], u_hat[1], u_hat[2]])
    x_ap = np.concatenate([p_abs - trim0, v_abs - v_trim])
    t1 = t_sb[-1]
    n_ap = int(round((scn.max_attempt_duration - scn.observation_window) / dt))
    Pd2, Pp2, *_rest = _run_phase(scn, y, x_ap, np.zeros(3), trim0, v_trim, u_hat, t1, n_ap,
                                  rngs, True)
    status = _rest[-1]
    t_ap = t1 + np.arange(Pd2.shape[0]) * dt
    traj = _decimate(t_sb, Pd, Pp, t_ap, Pd2, Pp2)
    speed = _closure_speed(t_ap, Pp2)
    if status != 1:
        if raise_on_timeout:
            raise SimTimeout(f"no contact within {scn.max_attempt_duration:g} s in attempt {k}")
        return AttemptLog(k, t0, p_e0, u_hat, float("nan"), None, None, float("nan"), False, True,
                          state, state, None, speed, traj)
    T, p_dr_T, p_pr_T = terminal_crossing(t_ap, Pd2, Pp2)
    out = docking_outcome(T, p_dr_T, p_pr_T, scn.R_C)
    rec = AttemptRecord(p_e0, p_dr_T, p_pr_T, T)
    new = record_attempt(state, rec, scn.tilc)
    return AttemptLog(k, t0, p_e0, u_hat, T, out.p_dr_T, out.p_pr_T, out.radial_error,
                      out.success, False, state, new, probe_error(state, rec), speed, traj)


def affine_noise(scn, k, run=0):
    """Per-attempt ``(v_dr, v_pr)`` for the affine tier, uniform in the declared balls."""
    rng = attempt_rng(scn.seed, run, k, "affine")
    out = []
    for b in (scn.noise.B_dr, scn.noise.B_pr):
        if not b:
            out.append(np.zeros(3))
            continue
        d = rng.standard_normal(3)
        out.append(b * rng.random() ** (1 / 3) * d / np.linalg.norm(d))
    return out


def _affine_attempt(scn, state, k, run):
    t0 = scn.attempt_start(k)
    _, p_e0 = hose_equilibrium(scn.hose, gust_velocity(t0, scn.noise.gust))
    v_dr, v_pr = affine_noise(scn, k, run)
    u_hat = compute_reference(p_e0, state)
    p_pr_T = u_hat - v_pr
    M1, m0 = scn.offset_map.M1, scn.offset_map.m0
    # docking error D solves D = m0 + M1 D + v_dr + p_e0 - p_pr_T
    D = np.linalg.solve(np.eye(3) - M1, m0 + v_dr + p_e0 - p_pr_T)
    p_dr_T = p_pr_T + D
    T = t0 + scn.observation_window + scn.standby_offset / scn.autopilot.closure_speed
    out = docking_outcome(T, p_dr_T, p_pr_T, scn.R_C)
    rec = AttemptRecord(p_e0, p_dr_T, p_pr_T, T)
    new = record_attempt(state, rec, scn.tilc)
    return AttemptLog(k, t0, p_e0, u_hat, T, p_dr_T, p_pr_T, out.radial_error, out.success,
                      False, state, new, probe_error(state, rec), scn.autopilot.closure_speed, None)


def run_campaign(scn, n_attempts=None, run=0, state=None):
    n = scn.attempts if n_attempts is None else int(n_attempts)
    if n < 1:
        raise ValueError("n_attempts must be >= 1")
    state = scn.warm_start if state is None else state
    logs = []
    for k in range(1, n + 1):
        log = run_docking_attempt(scn, state, k, run, raise_on_timeout=False)
        logs.append(log)
        state = log.state_after
    return CampaignResult(logs, run)


def wilson_interval(successes, n, z=1.959963984540054):
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, c - h), min(1.0, c + h))


def steady_state_counts(result):
    """(successes, attempts) strictly after the first success.

    A run that never succeeds contributes all its attempts as failures.
    """
    fs = result.first_success
    if fs is None:
        return 0, len(result.attempts)
    after = [a for a in result.attempts if a.k > fs]
    return sum(a.success for a in after), len(after)


def _mc_run(args):
    scn, run, n = args
    return run_campaign(scn, n, run)


def monte_carlo(scn, n_runs, n_attempts=None, workers=1, keep_logs=False):
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    jobs = [(scn, r, n_attempts) for r in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_mc_run, jobs))
    else:
        results = [_mc_run(j) for j in jobs]
    results.sort(key=lambda r: r.run)
    return aggregate(results, keep_logs)


def aggregate(results, keep_logs=False):
    ss = [steady_state_counts(r) for r in results]
    s_succ = sum(s for s, _ in ss)
    s_n = sum(n for _, n in ss)
    all_att = [a for r in results for a in r.attempts]
    errs = [a.radial_error for a in all_att if not a.timeout]
    rate = s_succ / s_n if s_n else float("nan")
    lo, hi = wilson_interval(s_succ, s_n)
    report = {
        "runs": len(results),
        "attempts_per_run": len(results[0].attempts),
        "steady_state_successes": s_succ,
        "steady_state_attempts": s_n,
        "success_rate": rate,
        "success_rate_ci95": [lo, hi],
        "overall_success_rate": sum(a.success for a in all_att) / len(all_att),
        "mean_radial_error": float(np.mean(errs)) if errs else None,
        "timeouts": sum(a.timeout for a in all_att),
        "runs_without_success": sum(r.first_success is None for r in results),
        "per_run": [r.summary() for r in results],
    }
    if keep_logs:
        report["_results"] = results
    return report


def with_overrides(scn, **kw):
    return replace(scn, **kw)
