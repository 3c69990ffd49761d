"""Link-chain hose with a drogue end mass.

The hose is ``n`` rigid massless links of equal length with the link mass
lumped at each link's distal node; the drogue mass sits on the last node.
The root is pinned at the tanker joint.  Each link direction is

    e(theta, psi) = (-sin(theta) cos(psi), sin(psi), cos(theta) cos(psi))

so ``theta`` is the pitch away from vertical (positive trails aft) and
``psi`` the lateral swing.  The parametrisation is regular everywhere except
``psi = +-pi/2``, which a towed hose never reaches.

Accelerations are obtained from the link tensions, which satisfy a
tridiagonal system, so one right-hand-side evaluation costs O(n).
"""
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, NoConvergence, NumericalDivergence
from .geometry import vec3

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class HoseParams:
    n_links: int = 20
    link_length: float = 0.75
    link_mass: float = 3.0
    drogue_mass: float = 30.0
    hose_diameter: float = 0.067
    cd_normal: float = 1.0
    cd_tangential: float = 0.01
    cd_drogue: float = 0.8
    drogue_area: float = 0.28
    air_density: float = 0.6
    airspeed: float = 120.0
    gravity: float = 9.81
    joint_damping: float = 2.0

    def __post_init__(self):
        if int(self.n_links) != self.n_links or self.n_links < 1:
            raise ConfigError("n_links must be an integer >= 1", "n_links")
        for name in ("link_length", "link_mass", "drogue_mass", "gravity", "hose_diameter",
                     "drogue_area"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0", name)
        for name in ("cd_normal", "cd_tangential", "cd_drogue", "air_density", "airspeed",
                     "joint_damping"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", name)

    @property
    def total_length(self):
        return self.n_links * self.link_length

    def as_array(self):
        return np.array([self.n_links, self.link_length, self.link_mass, self.drogue_mass,
                         self.hose_diameter, self.cd_normal, self.cd_tangential, self.cd_drogue,
                         self.drogue_area, self.air_density, self.airspeed, self.gravity,
                         self.joint_damping], dtype=float)


@dataclass
class HoseState:
    """Link angles (rad) and rates (rad/s); the flat vector has length 4n."""
    theta: np.ndarray
    psi: np.ndarray
    theta_dot: np.ndarray
    psi_dot: np.ndarray

    @classmethod
    def from_vector(cls, y):
        y = np.asarray(y, dtype=float)
        n = y.size // 4
        if y.size != 4 * n:
            raise ValueError("state length must be a multiple of 4")
        return cls(y[:n].copy(), y[n:2 * n].copy(), y[2 * n:3 * n].copy(), y[3 * n:].copy())

    @classmethod
    def hanging(cls, n):
        z = np.zeros(n)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())

    def as_vector(self):
        return np.concatenate([self.theta, self.psi, self.theta_dot, self.psi_dot])

    @property
    def n_links(self):
        return self.theta.size


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True)
def _link_frames(th, ps):
    n = th.size
    e = np.empty((n, 3))
    et = np.empty((n, 3))
    ep = np.empty((n, 3))
    for j in range(n):
        st, ct = np.sin(th[j]), np.cos(th[j])
        sp, cp = np.sin(ps[j]), np.cos(ps[j])
        e[j, 0], e[j, 1], e[j, 2] = -st * cp, sp, ct * cp
        et[j, 0], et[j, 1], et[j, 2] = -ct * cp, 0.0, -st * cp
        ep[j, 0], ep[j, 1], ep[j, 2] = st * sp, cp, -ct * sp
    return e, et, ep


@numba.njit(cache=True)
def _node_positions(y, prm):
    n = int(prm[0])
    L = prm[1]
    e, et, ep = _link_frames(y[:n], y[n:2 * n])
    r = np.zeros((n, 3))
    acc = np.zeros(3)
    for j in range(n):
        acc = acc + L * e[j]
        r[j] = acc
    return r


@numba.njit(cache=True)
def _drogue_position(y, prm):
    n = int(prm[0])
    L = prm[1]
    e, et, ep = _link_frames(y[:n], y[n:2 * n])
    out = np.zeros(3)
    for j in range(n):
        out += L * e[j]
    return out


@numba.njit(cache=True)
def _link_drag3(ex, ey, ez, vx, vy, vz, wind, prm):
    # aerodynamic force on one link from the air velocity relative to its midpoint
    L, d, cdn, cdt, rho, V = prm[1], prm[4], prm[5], prm[6], prm[9], prm[10]
    rx = -V + wind[0] - vx
    ry = wind[1] - vy
    rz = wind[2] - vz
    along = rx * ex + ry * ey + rz * ez
    tx, ty, tz = along * ex, along * ey, along * ez
    nx, ny, nz = rx - tx, ry - ty, rz - tz
    qn = 0.5 * rho * cdn * d * L * np.sqrt(nx * nx + ny * ny + nz * nz)
    qt = 0.5 * rho * cdt * np.pi * d * L * abs(along)
    return qn * nx + qt * tx, qn * ny + qt * ty, qn * nz + qt * tz


@numba.njit(cache=True)
def _link_drag(e, vmid, wind, prm):
    fx, fy, fz = _link_drag3(e[0], e[1], e[2], vmid[0], vmid[1], vmid[2], wind, prm)
    out = np.empty(3)
    out[0], out[1], out[2] = fx, fy, fz
    return out


@numba.njit(cache=True)
def _drogue_drag3(vx, vy, vz, wind, prm):
    cd, area, rho, V = prm[7], prm[8], prm[9], prm[10]
    rx = -V + wind[0] - vx
    ry = wind[1] - vy
    rz = wind[2] - vz
    q = 0.5 * rho * cd * area * np.sqrt(rx * rx + ry * ry + rz * rz)
    return q * rx, q * ry, q * rz


@numba.njit(cache=True)
def _drogue_drag(v, wind, prm):
    fx, fy, fz = _drogue_drag3(v[0], v[1], v[2], wind, prm)
    out = np.empty(3)
    out[0], out[1], out[2] = fx, fy, fz
    return out


@numba.njit(cache=True)
def _hose_rhs(y, prm, f_ext, wind):
    n = int(prm[0])
    L, mlink, mdr, g, cdamp = prm[1], prm[2], prm[3], prm[11], prm[12]
    e = np.empty((n, 3))
    et = np.empty((n, 3))
    ep = np.empty((n, 3))
    ed = np.empty((n, 3))
    h = np.empty((n, 3))
    v = np.empty((n, 3))
    F = np.zeros((n, 3))
    m = np.empty(n)
    vx = vy = vz = 0.0
    for j in range(n):
        st, ct = np.sin(y[j]), np.cos(y[j])
        sp, cp = np.sin(y[n + j]), np.cos(y[n + j])
        a, b = y[2 * n + j], y[3 * n + j]
        e[j, 0], e[j, 1], e[j, 2] = -st * cp, sp, ct * cp
        et[j, 0], et[j, 1], et[j, 2] = -ct * cp, 0.0, -st * cp
        ep[j, 0], ep[j, 1], ep[j, 2] = st * sp, cp, -ct * sp
        ed[j, 0] = et[j, 0] * a + ep[j, 0] * b
        ed[j, 1] = ep[j, 1] * b
        ed[j, 2] = et[j, 2] * a + ep[j, 2] * b
        # second-order terms of e(theta, psi)
        h[j, 0] = st * cp * a * a + 2.0 * ct * sp * a * b + st * cp * b * b
        h[j, 1] = -sp * b * b
        h[j, 2] = -ct * cp * a * a + 2.0 * st * sp * a * b - ct * cp * b * b
        vx += L * ed[j, 0]
        vy += L * ed[j, 1]
        vz += L * ed[j, 2]
        v[j, 0], v[j, 1], v[j, 2] = vx, vy, vz
        m[j] = mlink
    m[n - 1] += mdr

    px = py = pz = 0.0
    for j in range(n):
        F[j, 2] += m[j] * g
        fx, fy, fz = _link_drag3(e[j, 0], e[j, 1], e[j, 2], 0.5 * (px + v[j, 0]),
                                 0.5 * (py + v[j, 1]), 0.5 * (pz + v[j, 2]), wind, prm)
        dx = cdamp * (v[j, 0] - px)
        dy_ = cdamp * (v[j, 1] - py)
        dz = cdamp * (v[j, 2] - pz)
        F[j, 0] += 0.5 * fx - dx
        F[j, 1] += 0.5 * fy - dy_
        F[j, 2] += 0.5 * fz - dz
        if j > 0:
            F[j - 1, 0] += 0.5 * fx + dx
            F[j - 1, 1] += 0.5 * fy + dy_
            F[j - 1, 2] += 0.5 * fz + dz
        px, py, pz = v[j, 0], v[j, 1], v[j, 2]
    fx, fy, fz = _drogue_drag3(v[n - 1, 0], v[n - 1, 1], v[n - 1, 2], wind, prm)
    F[n - 1, 0] += fx + f_ext[0]
    F[n - 1, 1] += fy + f_ext[1]
    F[n - 1, 2] += fz + f_ext[2]

    # tridiagonal system for link tensions, solved with the Thomas algorithm
    cpr = np.empty(n)
    dpr = np.empty(n)
    for i in range(n):
        di = -1.0 / m[i]
        r = -L * (ed[i, 0] ** 2 + ed[i, 1] ** 2 + ed[i, 2] ** 2) \
            - (e[i, 0] * F[i, 0] + e[i, 1] * F[i, 1] + e[i, 2] * F[i, 2]) / m[i]
        lo = 0.0
        if i > 0:
            di -= 1.0 / m[i - 1]
            lo = (e[i, 0] * e[i - 1, 0] + e[i, 1] * e[i - 1, 1] + e[i, 2] * e[i - 1, 2]) / m[i - 1]
            r += (e[i, 0] * F[i - 1, 0] + e[i, 1] * F[i - 1, 1] + e[i, 2] * F[i - 1, 2]) / m[i - 1]
        up = 0.0
        if i < n - 1:
            up = (e[i, 0] * e[i + 1, 0] + e[i, 1] * e[i + 1, 1] + e[i, 2] * e[i + 1, 2]) / m[i]
        if i == 0:
            cpr[0] = up / di
            dpr[0] = r / di
        else:
            den = di - lo * cpr[i - 1]
            cpr[i] = up / den
            dpr[i] = (r - lo * dpr[i - 1]) / den
    T = np.empty(n)
    T[n - 1] = dpr[n - 1]
    for i in range(n - 2, -1, -1):
        T[i] = dpr[i] - cpr[i] * T[i + 1]

    dy = np.empty(4 * n)
    dy[:2 * n] = y[2 * n:]
    ax0 = ay0 = az0 = 0.0
    for i in range(n):
        fx = F[i, 0] - T[i] * e[i, 0]
        fy = F[i, 1] - T[i] * e[i, 1]
        fz = F[i, 2] - T[i] * e[i, 2]
        if i < n - 1:
            fx += T[i + 1] * e[i + 1, 0]
            fy += T[i + 1] * e[i + 1, 1]
            fz += T[i + 1] * e[i + 1, 2]
        ax, ay, az = fx / m[i], fy / m[i], fz / m[i]
        ex_ = (ax - ax0) / L - h[i, 0]
        ey_ = (ay - ay0) / L - h[i, 1]
        ez_ = (az - az0) / L - h[i, 2]
        cps = np.cos(y[n + i])
        dy[2 * n + i] = (et[i, 0] * ex_ + et[i, 2] * ez_) / (cps * cps)
        dy[3 * n + i] = ep[i, 0] * ex_ + ep[i, 1] * ey_ + ep[i, 2] * ez_
        ax0, ay0, az0 = ax, ay, az
    return dy


@numba.njit(cache=True)
def _hose_rk4(y, prm, f_ext, wind, dt):
    k1 = _hose_rhs(y, prm, f_ext, wind)
    k2 = _hose_rhs(y + 0.5 * dt * k1, prm, f_ext, wind)
    k3 = _hose_rhs(y + 0.5 * dt * k2, prm, f_ext, wind)
    k4 = _hose_rhs(y + dt * k3, prm, f_ext, wind)
    out = np.empty_like(y)
    for i in range(y.size):
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


@numba.njit(cache=True)
def _hose_integrate(y, prm, f_ext, wind, dt, nsteps):
    for _ in range(nsteps):
        y = _hose_rk4(y, prm, f_ext, wind, dt)
        if np.max(np.abs(y)) > 1e6:
            break
    return y


@numba.njit(cache=True)
def _hose_energy(y, prm):
    n = int(prm[0])
    L, mlink, mdr, g = prm[1], prm[2], prm[3], prm[11]
    e, et, ep = _link_frames(y[:n], y[n:2 * n])
    ke = 0.0
    pe = 0.0
    v = np.zeros(3)
    z = 0.0
    for j in range(n):
        v = v + L * (et[j] * y[2 * n + j] + ep[j] * y[3 * n + j])
        z += L * e[j, 2]
        mj = mlink + (mdr if j == n - 1 else 0.0)
        ke += 0.5 * mj * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
        # zero potential when every link hangs straight down
        pe += mj * g * (L * (j + 1) - z)
    return ke + pe


# ------------------------------------------------------------- public API

def _check(y):
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
        raise NumericalDivergence("hose state diverged")
    return y


def hose_derivative(state, params, F_hd=(0, 0, 0), F_bow=(0, 0, 0), wind=(0, 0, 0)):
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    return _hose_rhs(y, params.as_array(), vec3(F_hd) + vec3(F_bow), vec3(wind))


def hose_dynamics_step(state, F_hd, F_bow, dt, params, wind=(0.0, 0.0, 0.0)):
    """Advance the chain one RK4 step with the drogue forces held constant."""
    if not 0 < dt <= 0.02:
        raise ValueError("dt must lie in (0, 0.02]")
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    y1 = _check(_hose_rk4(y, params.as_array(), vec3(F_hd) + vec3(F_bow), vec3(wind), dt))
    return HoseState.from_vector(y1) if isinstance(state, HoseState) else y1


def simulate(state, params, duration, dt=1e-3, F_hd=(0, 0, 0), wind=(0, 0, 0)):
    """Integrate for ``duration`` seconds under constant drogue force and wind."""
    if not 0 < dt <= 0.02:
        raise ValueError("dt must lie in (0, 0.02]")
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    nsteps = int(round(duration / dt))
    y1 = _check(_hose_integrate(y.copy(), params.as_array(), vec3(F_hd), vec3(wind), dt, nsteps))
    return HoseState.from_vector(y1) if isinstance(state, HoseState) else y1


def drogue_position(state, params=None):
    """Sum of link vectors from the tanker joint to the drogue."""
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    n = y.size // 4
    L = params.link_length if params is not None else 1.0
    prm = np.array([n, L], dtype=float)
    return _drogue_position(y, prm)


def node_positions(state, params):
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    return _node_positions(y, params.as_array())


def mechanical_energy(state, params):
    """Kinetic plus gravitational energy, zero for the plumb-line rest state."""
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    return float(_hose_energy(y, params.as_array()))


def angles_from_direction(e):
    e = np.asarray(e, dtype=float)
    psi = np.arcsin(np.clip(e[1], -1.0, 1.0))
    theta = np.arctan2(-e[0], e[2])
    return theta, psi


def generalized_forces(state, params, F_hd=(0, 0, 0), wind=(0, 0, 0)):
    """Static joint torques (N m) on a motionless chain; zero at equilibrium."""
    y = state.as_vector() if isinstance(state, HoseState) else np.asarray(state, float)
    prm = params.as_array()
    n, L = params.n_links, params.link_length
    e, et, ep = _link_frames(y[:n], y[n:2 * n])
    F = _static_node_forces(e, prm, vec3(F_hd), vec3(wind))
    S = np.cumsum(F[::-1], axis=0)[::-1]
    return np.concatenate([L * np.einsum("ij,ij->i", et, S), L * np.einsum("ij,ij->i", ep, S)])


def _static_node_forces(e, prm, f_ext, wind):
    n = e.shape[0]
    m = np.full(n, prm[2])
    m[-1] += prm[3]
    F = np.zeros((n, 3))
    F[:, 2] = m * prm[11]
    zero = np.zeros(3)
    for j in range(n):
        fl = _link_drag(e[j], zero, wind, prm)
        F[j] += 0.5 * fl
        if j > 0:
            F[j - 1] += 0.5 * fl
    F[-1] += _drogue_drag(zero, wind, prm) + f_ext
    return F


def solve_equilibrium(params, F_hd=(0.0, 0.0, 0.0), wind=(0.0, 0.0, 0.0), tol=1e-8,
                      max_iter=200):
    """Static shape of the towed chain under steady drogue force and wind.

    Works inward from the drogue: each link must line up with the resultant
    of every force acting outboard of it.  A link's own drag depends on its
    direction, so each link is a small fixed-point problem.  Returns the
    state (zero rates) and the drogue position.
    """
    prm = params.as_array()
    f_ext = vec3(F_hd)
    wind = vec3(wind)
    n, L = params.n_links, params.link_length
    m = np.full(n, params.link_mass)
    m[-1] += params.drogue_mass
    zero = np.zeros(3)
    e = np.zeros((n, 3))
    outboard = _drogue_drag(zero, wind, prm) + f_ext
    half_next = np.zeros(3)
    for j in range(n - 1, -1, -1):
        base = outboard + half_next + np.array([0.0, 0.0, m[j] * params.gravity])
        ej = base / np.linalg.norm(base) if np.linalg.norm(base) > 0 else np.array([0.0, 0.0, 1.0])
        for _ in range(max_iter):
            S = base + 0.5 * _link_drag(ej, zero, wind, prm)
            nrm = np.linalg.norm(S)
            if nrm == 0:
                raise NoConvergence(f"zero resultant on link {j}")
            new = S / nrm
            if np.linalg.norm(new - ej) < 1e-15:
                ej = new
                break
            ej = new
        else:
            raise NoConvergence(f"link {j} direction did not converge")
        e[j] = ej
        fl = _link_drag(ej, zero, wind, prm)
        outboard = base + 0.5 * fl
        half_next = 0.5 * fl
    theta, psi = angles_from_direction(e.T)
    state = HoseState(theta, psi, np.zeros(n), np.zeros(n))
    resid = np.max(np.abs(generalized_forces(state, params, f_ext, wind)))
    if resid > tol:
        raise NoConvergence(f"equilibrium residual {resid:.3e} N m exceeds {tol:g}")
    return state, drogue_position(state, params)


def settle(params, state, duration=60.0, dt=1e-3, F_hd=(0, 0, 0), wind=(0, 0, 0)):
    """Damped dynamic settling; returns the final state and drogue position."""
    final = simulate(state, params, duration, dt, F_hd, wind)
    return final, drogue_position(final, params)
