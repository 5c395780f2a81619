"""Trajectory integration in the doubled phase space.

A complex trajectory is propagated as a real trajectory of the 4-D
system (Q1, Q2, P1, P2) under the real part H1 of the analytically
continued Hamiltonian.  Alongside the state we integrate

* the 4x4 tangent matrix n (variational equations, dn/dt = J.Hess(H1).n),
* the complex action integral and its boundary term,
* the correction integral (1/2) int d2H/dudv dt,
* the continuously unwrapped phase xi of the tangent block M_vv.

The integrator is fixed-step classic RK4 (a final partial step lands
exactly on each requested time).  The right-hand side is polynomial, so
the hot loop uses arithmetic only; this keeps ensemble results bitwise
independent of how the ensemble is chunked across workers.

A trajectory whose imaginary energy H2 drifts by more than
``H2_DRIFT_CAP`` (or that leaves the range of float64) is flagged
invalid; downstream code gives it zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import PhaseGridSpec
from .hamiltonian import ScaledHamiltonian
from .phase_space import CoherentLabel, ComplexPhasePoint, DoublePhasePoint, SQRT2

H2_DRIFT_CAP = 1e-4

# layout of the packed real state vector: x(4), n(16), Re S, Im S, Re I, Im I
_NSTATE = 24
_SL_X = slice(0, 4)
_SL_N = slice(4, 20)


@dataclass(frozen=True)
class LaunchParams:
    """Wavepacket center (q0, p0), companion point (q1, p1), time grid."""

    q0: float
    p0: float
    q1: float
    p1: float
    T: float
    dt: float = 1e-3

    @property
    def dq(self) -> float:
        return self.q1 - self.q0

    @property
    def dp(self) -> float:
        return self.p1 - self.p0

    @property
    def w(self) -> complex:
        """q(0) = q0 + w, p(0) = p0 + i w."""
        return 0.5 * (self.dq - 1j * self.dp)


@dataclass
class TrajectoryRecord:
    """Endpoint data of one propagated trajectory (scaled units)."""

    end: ComplexPhasePoint
    S: complex
    I: complex
    n: np.ndarray
    m: np.ndarray
    M: np.ndarray
    xi: float
    H2_drift: float
    H1_drift: float
    max_xi_step: float
    valid: bool

    @property
    def M_vv(self) -> complex:
        return self.M[1, 1]

    @property
    def M_uv(self) -> complex:
        return self.M[0, 1]


def initial_conditions(lp: LaunchParams) -> DoublePhasePoint:
    """Doubled-space start point for a companion-point launch."""
    return DoublePhasePoint(
        Q1=lp.q0 + 0.5 * lp.dq,
        Q2=0.5 * lp.dq,
        P1=lp.p0 + 0.5 * lp.dp,
        P2=-0.5 * lp.dp,
    )


def launch_grid(z0: CoherentLabel, grid1: PhaseGridSpec):
    """Start points for every companion node of a rectangular grid.

    Returns (q1 nodes, p1 nodes, x0 array of shape (size, 4)), q-major.
    """
    q1, p1 = grid1.mesh()
    x0 = np.empty((q1.size, 4))
    x0[:, 0] = z0.q + 0.5 * (q1 - z0.q)
    x0[:, 1] = 0.5 * (q1 - z0.q)
    x0[:, 2] = z0.p + 0.5 * (p1 - z0.p)
    x0[:, 3] = -0.5 * (p1 - z0.p)
    return q1, p1, x0


def n_to_m(n: np.ndarray) -> np.ndarray:
    """Tangent matrix in complex (q, p) variables from the real 4x4 block."""
    m = np.empty(n.shape[:-2] + (2, 2), dtype=complex)
    m[..., 0, 0] = n[..., 0, 0] - 1j * n[..., 0, 3]
    m[..., 0, 1] = n[..., 0, 2] - 1j * n[..., 0, 1]
    m[..., 1, 0] = n[..., 1, 3] + 1j * n[..., 1, 0]
    m[..., 1, 1] = n[..., 1, 1] + 1j * n[..., 1, 2]
    return m


def m_to_M(m: np.ndarray) -> np.ndarray:
    """Tangent matrix in (u, v) variables from the complex (q, p) one."""
    mqq = m[..., 0, 0]
    mqp = m[..., 0, 1]
    mpq = m[..., 1, 0]
    mpp = m[..., 1, 1]
    M = np.empty_like(m)
    M[..., 0, 0] = 0.5 * (mqq + mpp + 1j * mpq - 1j * mqp)
    M[..., 0, 1] = 0.5 * (mqq - mpp + 1j * mpq + 1j * mqp)
    M[..., 1, 0] = 0.5 * (mqq - mpp - 1j * mpq - 1j * mqp)
    M[..., 1, 1] = 0.5 * (mqq + mpp - 1j * mpq + 1j * mqp)
    return M


@dataclass
class EnsembleSnapshot:
    """State of a trajectory ensemble at one requested time."""

    T: float
    u: np.ndarray            # u(T), complex (N,)
    v: np.ndarray            # v(T), complex (N,)
    S: np.ndarray            # action incl. boundary term, complex (N,)
    I: np.ndarray            # correction integral, complex (N,)
    n: np.ndarray            # real tangent matrices (N, 4, 4)
    M: np.ndarray            # (u, v) tangent matrices (N, 2, 2)
    xi: np.ndarray           # unwrapped arg M_vv, real (N,)
    q1t: np.ndarray          # Q1 + Q2 at T (endpoint companion coordinate)
    p1t: np.ndarray          # P1 - P2 at T
    h1_drift: np.ndarray     # max |H1(t) - H1(0)| so far
    h2_drift: np.ndarray     # max |H2(t) - H2(0)| so far
    max_xi_step: np.ndarray  # largest single-step |d xi| so far
    valid: np.ndarray        # bool (N,)

    @property
    def M_vv(self) -> np.ndarray:
        return self.M[:, 1, 1]

    @property
    def M_uv(self) -> np.ndarray:
        return self.M[:, 0, 1]

    def record(self, i: int) -> TrajectoryRecord:
        n_i = self.n[i].copy()
        m_i = n_to_m(n_i)
        q = self.u[i] + self.v[i]
        p = -1j * (self.u[i] - self.v[i])
        return TrajectoryRecord(
            end=ComplexPhasePoint(q / SQRT2, p / SQRT2),
            S=complex(self.S[i]),
            I=complex(self.I[i]),
            n=n_i,
            m=m_i,
            M=m_to_M(m_i),
            xi=float(self.xi[i]),
            H2_drift=float(self.h2_drift[i]),
            H1_drift=float(self.h1_drift[i]),
            max_xi_step=float(self.max_xi_step[i]),
            valid=bool(self.valid[i]),
        )


def _rhs(h: ScaledHamiltonian, y: np.ndarray, out: np.ndarray) -> None:
    """Time derivative of the packed state (arithmetic only).

    The action integrand simplifies for this Hamiltonian family:
    (i/2)(du/dt v - dv/dt u) - H = (dq/dt p - dp/dt q)/2 - H
                                 = omega (lambda_bar q^4 / 4 - const).
    """
    om = h.omega
    c1 = om * h.nu_bar_sq
    c2 = om * h.lambda_bar
    q = y[:, 0] + 1j * y[:, 3]
    p = y[:, 2] + 1j * y[:, 1]
    q2 = q * q
    hq = (c1 + c2 * q2) * q
    hp = om * p
    # flow: dq/dt = dH/dp, dp/dt = -dH/dq in the doubled encoding
    out[:, 0] = hp.real
    out[:, 3] = hp.imag
    np.negative(hq.real, out=out[:, 2])
    np.negative(hq.imag, out=out[:, 1])
    # variational equations dn/dt = J.Hess(H1).n, written out row by row
    hqq = c1 + (3.0 * c2) * q2
    a = hqq.real[:, None]
    b = hqq.imag[:, None]
    n = y[:, _SL_N].reshape(-1, 4, 4)
    dn = out[:, _SL_N].reshape(-1, 4, 4)
    np.multiply(n[:, 2, :], om, out=dn[:, 0, :])
    np.multiply(n[:, 1, :], om, out=dn[:, 3, :])
    dn[:, 1, :] = -(b * n[:, 0, :] + a * n[:, 3, :])
    dn[:, 2, :] = b * n[:, 3, :] - a * n[:, 0, :]
    ds = (0.25 * c2) * (q2 * q2) - om * h.const_term
    out[:, 20] = ds.real
    out[:, 21] = ds.imag
    out[:, 22] = 0.25 * hqq.real + 0.25 * om
    out[:, 23] = 0.25 * hqq.imag


class _Integrator:
    """Vectorized fixed-step RK4 over an ensemble, with bookkeeping."""

    def __init__(self, h: ScaledHamiltonian, x0: np.ndarray):
        self.h = h
        n_traj = x0.shape[0]
        y = np.zeros((n_traj, _NSTATE))
        y[:, _SL_X] = x0
        y[:, _SL_N].reshape(-1, 4, 4)[:] = np.eye(4)
        self.y = y
        q0 = x0[:, 0] + 1j * x0[:, 3]
        p0 = x0[:, 2] + 1j * x0[:, 1]
        self.u0 = (q0 + 1j * p0) / SQRT2
        self.v0 = (q0 - 1j * p0) / SQRT2
        h0 = h.value(q0, p0)
        self.h1_ref = h0.real
        self.h2_ref = h0.imag
        self.h1_drift = np.zeros(n_traj)
        self.h2_drift = np.zeros(n_traj)
        self.xi = np.zeros(n_traj)
        self.max_xi_step = np.zeros(n_traj)
        self.mvv_re = np.ones(n_traj)
        self.mvv_im = np.zeros(n_traj)
        self.valid = np.ones(n_traj, dtype=bool)
        self._k = [np.empty_like(y) for _ in range(4)]
        self._yt = np.empty_like(y)

    def step(self, dt: float) -> None:
        y, yt = self.y, self._yt
        k1, k2, k3, k4 = self._k
        _rhs(self.h, y, k1)
        np.multiply(k1, 0.5 * dt, out=yt)
        yt += y
        _rhs(self.h, yt, k2)
        np.multiply(k2, 0.5 * dt, out=yt)
        yt += y
        _rhs(self.h, yt, k3)
        np.multiply(k3, dt, out=yt)
        yt += y
        _rhs(self.h, yt, k4)
        k2 += k3
        k2 *= 2.0
        k2 += k1
        k2 += k4
        k2 *= dt / 6.0
        y += k2
        self._after_step()

    def _after_step(self) -> None:
        y = self.y
        q = y[:, 0] + 1j * y[:, 3]
        p = y[:, 2] + 1j * y[:, 1]
        hval = self.h.value(q, p)
        np.maximum(self.h1_drift, np.abs(hval.real - self.h1_ref), out=self.h1_drift)
        np.maximum(self.h2_drift, np.abs(hval.imag - self.h2_ref), out=self.h2_drift)
        n = y[:, _SL_N].reshape(-1, 4, 4)
        re = 0.5 * (n[:, 0, 0] + n[:, 1, 1] + n[:, 1, 0] + n[:, 0, 1])
        im = 0.5 * (n[:, 0, 2] - n[:, 0, 3] + n[:, 1, 2] - n[:, 1, 3])
        # principal-branch increment of arg M_vv relative to the last step
        cross_re = re * self.mvv_re + im * self.mvv_im
        cross_im = im * self.mvv_re - re * self.mvv_im
        dxi = np.arctan2(cross_im, cross_re)
        self.xi += dxi
        np.maximum(self.max_xi_step, np.abs(dxi), out=self.max_xi_step)
        self.mvv_re = re
        self.mvv_im = im
        # a blown-up lane shows up as nan drift (inf - inf), and nan <= cap
        # is False, so this also catches departures from float64 range
        self.valid &= self.h2_drift <= H2_DRIFT_CAP

    def advance(self, duration: float, dt: float) -> None:
        if duration < 0.0:
            raise ValueError("snapshot times must be non-decreasing")
        nfull = int(np.floor(duration / dt + 1e-9))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(nfull):
                self.step(dt)
            rem = duration - nfull * dt
            if rem > 1e-12:
                self.step(rem)

    def snapshot(self, T: float) -> EnsembleSnapshot:
        y = self.y
        q = y[:, 0] + 1j * y[:, 3]
        p = y[:, 2] + 1j * y[:, 1]
        u = (q + 1j * p) / SQRT2
        v = (q - 1j * p) / SQRT2
        s_int = y[:, 20] + 1j * y[:, 21]
        with np.errstate(invalid="ignore", over="ignore"):
            s = s_int - 0.5j * (u * v + self.u0 * self.v0)
        n = y[:, _SL_N].reshape(-1, 4, 4).copy()
        return EnsembleSnapshot(
            T=T,
            u=u,
            v=v,
            S=s,
            I=y[:, 22] + 1j * y[:, 23],
            n=n,
            M=m_to_M(n_to_m(n)),
            xi=self.xi.copy(),
            q1t=y[:, 0] + y[:, 1],
            p1t=y[:, 2] - y[:, 3],
            h1_drift=self.h1_drift.copy(),
            h2_drift=self.h2_drift.copy(),
            max_xi_step=self.max_xi_step.copy(),
            valid=self.valid.copy(),
        )


def _integrate_times(h: ScaledHamiltonian, x0: np.ndarray, times, dt: float):
    integ = _Integrator(h, np.asarray(x0, dtype=float))
    snaps = []
    t_prev = 0.0
    for T in times:
        integ.advance(T - t_prev, dt)
        snaps.append(integ.snapshot(T))
        t_prev = T
    return snaps


def _worker_integrate(args):
    h, x0, times, dt = args
    return _integrate_times(h, x0, times, dt)


def evolve_ensemble(h: ScaledHamiltonian, x0: np.ndarray, times, dt: float = 1e-3,
                    workers: int = 1):
    """Propagate an ensemble and snapshot it at each requested time.

    Parameters
    ----------
    h : ScaledHamiltonian
    x0 : (N, 4) array of doubled-space start points
    times : non-decreasing sequence of snapshot times (0 allowed)
    dt : base step; a shorter final step lands exactly on each time
    workers : number of processes; the ensemble is split into contiguous
        chunks and results are reassembled in launch order, so output does
        not depend on the worker count.

    Returns
    -------
    list of EnsembleSnapshot, one per entry of ``times``
    """
    times = [float(T) for T in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be non-decreasing")
    x0 = np.asarray(x0, dtype=float)
    if workers <= 1 or x0.shape[0] < 2 * workers:
        return _integrate_times(h, x0, times, dt)

    import multiprocessing as mp

    chunks = np.array_split(np.arange(x0.shape[0]), workers)
    jobs = [(h, x0[c], times, dt) for c in chunks if c.size]
    with mp.get_context("fork").Pool(len(jobs)) as pool:
        parts = pool.map(_worker_integrate, jobs)
    snaps = []
    for k, T in enumerate(times):
        fields = {}
        for name in ("u", "v", "S", "I", "n", "M", "xi", "q1t", "p1t",
                     "h1_drift", "h2_drift", "max_xi_step", "valid"):
            fields[name] = np.concatenate([getattr(p[k], name) for p in parts])
        snaps.append(EnsembleSnapshot(T=T, **fields))
    return snaps


def evolve(h: ScaledHamiltonian, lp: LaunchParams) -> TrajectoryRecord:
    """Propagate a single trajectory to time T."""
    x0 = initial_conditions(lp).as_array()[None, :]
    snap = evolve_ensemble(h, x0, [lp.T], dt=lp.dt)[-1]
    return snap.record(0)


def evolve_from_point(h: ScaledHamiltonian, x0: DoublePhasePoint, T: float,
                      dt: float = 1e-3) -> EnsembleSnapshot:
    """Propagate from an explicit doubled-space point (test hook)."""
    return evolve_ensemble(h, x0.as_array()[None, :], [T], dt=dt)[-1]


def finite_diff_tangent(h: ScaledHamiltonian, lp: LaunchParams,
                        eps: float = 1e-5) -> np.ndarray:
    """Tangent matrix by central differences of the endpoint map.

    Independent check of the variational integration: displaces each of
    the four doubled-space start coordinates by +/- eps and differences
    the endpoints.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps outside [1e-7, 1e-3]")
    x0 = initial_conditions(lp).as_array()
    starts = np.repeat(x0[None, :], 8, axis=0)
    for j in range(4):
        starts[2 * j, j] += eps
        starts[2 * j + 1, j] -= eps
    snap = evolve_ensemble(h, starts, [lp.T], dt=lp.dt)[-1]
    ends = np.empty((8, 4))
    q = (snap.u + snap.v) / SQRT2
    p = -1j * (snap.u - snap.v) / SQRT2
    ends[:, 0] = q.real
    ends[:, 3] = q.imag
    ends[:, 2] = p.real
    ends[:, 1] = p.imag
    n = np.empty((4, 4))
    for j in range(4):
        n[:, j] = (ends[2 * j] - ends[2 * j + 1]) / (2.0 * eps)
    return n


def trajectory_history(h: ScaledHamiltonian, lp: LaunchParams, stride: int = 1):
    """Time series of one trajectory for CSV dumps.

    Returns a dict of 1-D arrays: t, Q1, Q2, P1, P2, re_S, im_S,
    re_Mvv, im_Mvv, xi.
    """
    x0 = initial_conditions(lp).as_array()[None, :]
    times, cols, _ = ensemble_history(h, x0, lp.T, dt=lp.dt, stride=stride)
    out = {"t": times}
    out.update({name: col[:, 0] for name, col in cols.items()})
    return out


def ensemble_history(h: ScaledHamiltonian, x0: np.ndarray, T: float,
                     dt: float = 1e-3, stride: int = 10):
    """Thinned time series of the dump columns for a whole ensemble.

    Returns (times, columns, valid) where each column is an array of
    shape (n_samples, N) and valid is the final validity mask.  Memory
    stays modest because only the dump columns are kept, not full
    snapshots.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n_steps = max(1, int(np.ceil(T / dt - 1e-9))) if T > 0 else 0
    sample = list(range(0, n_steps + 1, stride))
    if sample[-1] != n_steps:
        sample.append(n_steps)
    times = [min(k * dt, T) for k in sample]
    integ = _Integrator(h, np.asarray(x0, dtype=float))
    names = ("Q1", "Q2", "P1", "P2", "re_S", "im_S", "re_Mvv", "im_Mvv", "xi")
    cols = {name: np.empty((len(times), x0.shape[0])) for name in names}
    t_prev = 0.0
    for k, t in enumerate(times):
        integ.advance(t - t_prev, dt)
        t_prev = t
        y = integ.y
        q = y[:, 0] + 1j * y[:, 3]
        p = y[:, 2] + 1j * y[:, 1]
        u = (q + 1j * p) / SQRT2
        v = (q - 1j * p) / SQRT2
        with np.errstate(invalid="ignore", over="ignore"):
            s = (y[:, 20] + 1j * y[:, 21]) - 0.5j * (u * v + integ.u0 * integ.v0)
        cols["Q1"][k] = y[:, 0]
        cols["Q2"][k] = y[:, 1]
        cols["P1"][k] = y[:, 2]
        cols["P2"][k] = y[:, 3]
        cols["re_S"][k] = s.real
        cols["im_S"][k] = s.imag
        cols["re_Mvv"][k] = integ.mvv_re
        cols["im_Mvv"][k] = integ.mvv_im
        cols["xi"][k] = integ.xi
    return np.array(times), cols, integ.valid.copy()


def period_and_turning_points(h: ScaledHamiltonian, q0: float, p0: float,
                              dt: float = 1e-4):
    """Oscillation period and |q| at the turning points of the bare flow.

    The bare (correction-free) Hamiltonian is the one whose energy the
    wavepacket center reports; turning points are detected as sign
    changes of p with linear interpolation in time.
    """
    q, p = float(q0), float(p0)
    om, nu2, lb = h.omega, h.nu * h.nu, h.lambda_bar

    def acc(qq):
        return -om * (nu2 * qq + lb * qq ** 3)

    crossings = []
    t = 0.0
    # two p = 0 crossings bound half a period
    for _ in range(int(1e6)):
        # one RK4 step of the bare flow
        k1q, k1p = om * p, acc(q)
        k2q, k2p = om * (p + 0.5 * dt * k1p), acc(q + 0.5 * dt * k1q)
        k3q, k3p = om * (p + 0.5 * dt * k2p), acc(q + 0.5 * dt * k2q)
        k4q, k4p = om * (p + dt * k3p), acc(q + dt * k3q)
        q_new = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p_new = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        t_new = t + dt
        if p != 0.0 and (p_new == 0.0 or (p < 0) != (p_new < 0)):
            frac = p / (p - p_new)
            crossings.append((t + frac * dt, q + frac * (q_new - q)))
            if len(crossings) == 2:
                break
        q, p, t = q_new, p_new, t_new
    else:
        raise RuntimeError("no turning points found")
    (t1, x1), (t2, x2) = crossings
    return 2.0 * (t2 - t1), abs(x1), abs(x2)
