"""Assembly of trajectory ensembles into coherent-state propagators.

Each companion-grid trajectory contributes

    |M_vv|^{3/2} * exp(phi) * (quadrature weight)

to K(zf*, z0, T).  The exponent phi is expanded to second order around
the trajectory endpoint,

    phi = i(S + I) + u(T)(zf* - v(T)) + M_uv/(2 M_vv) (zf* - v(T))^2
          - |zf|^2/2 - |z0|^2/2 - i xi/2,

a form fixed by requiring K(zf*, z0, 0) = <zf|z0> exactly.  Terms with
Re(phi) > c would diverge in the semiclassical limit and are dropped;
the cutoff acts on each (trajectory, final label) pair, which also
bounds every retained term by e^c.  Invalid trajectories and caustic
ones (M_vv ~ 0, which carry vanishing weight here rather than a
divergence) never contribute.

Two endpoint filters are available: a Filinov-smoothed Gaussian of
rescaled width alpha = a |M_vv| ("smooth"), and a narrow-Gaussian
realization of the endpoint delta function ("sudden").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import PhaseGridSpec
from .hamiltonian import ScaledHamiltonian
from .phase_space import CoherentLabel, SQRT2
from .trajectory import (EnsembleSnapshot, LaunchParams, TrajectoryRecord,
                         evolve_ensemble, initial_conditions, launch_grid)

CAUSTIC_TOL = 1e-12


@dataclass(frozen=True)
class CivrParams:
    """Width, cutoff and companion grid of one propagator evaluation."""

    a: float
    c: float
    grid1: PhaseGridSpec
    mode: str = "smooth"
    epsilon: float = 0.25   # sudden-mode delta width, in zf-grid spacings

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("smoothing width a must be positive")
        if self.mode not in ("smooth", "sudden"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class Contribution:
    """One trajectory's integrand value for one final label."""

    phi: complex
    weight: complex
    accepted: bool
    vT: complex
    alpha: float


@dataclass
class PropagatorGrid:
    """K(zf*, z0, T) sampled on a rectangular grid of final labels."""

    grid: PhaseGridSpec
    K: np.ndarray            # complex, flat q-major
    T: float
    meta: dict = field(default_factory=dict)

    def K2d(self) -> np.ndarray:
        return self.K.reshape(self.grid.q.n, self.grid.p.n)


def phi_exponent(rec: TrajectoryRecord, z0: CoherentLabel,
                 zf: CoherentLabel) -> complex:
    """Second-order exponent of the smoothed integrand at final label zf."""
    mvv = rec.M_vv
    if abs(mvv) < CAUSTIC_TOL:
        return complex(np.inf, 0.0)
    d = zf.z_conj - rec.end.v
    return (1j * (rec.S + rec.I) + rec.end.u * d
            + rec.M_uv / (2.0 * mvv) * d * d
            - 0.5 * zf.abs2 - 0.5 * z0.abs2 - 0.5j * rec.xi)


def phi_endpoint(rec: TrajectoryRecord, z0: CoherentLabel) -> complex:
    """phi evaluated at the trajectory's own endpoint label (zf* = v(T))."""
    vT = rec.end.v
    return (1j * (rec.S + rec.I) - 0.5 * abs(vT) ** 2
            - 0.5 * z0.abs2 - 0.5j * rec.xi)


def passes_cutoff(phi: complex, c: float) -> bool:
    """Keep a trajectory iff Re(phi) <= c (scaled units)."""
    return bool(np.real(phi) <= c)


def contribution(rec: TrajectoryRecord, z0: CoherentLabel, zf: CoherentLabel,
                 civr: CivrParams) -> Contribution:
    """Full smoothed-integrand value of one trajectory at one final label."""
    mvv = rec.M_vv
    alpha = civr.a * abs(mvv)
    phi = phi_exponent(rec, z0, zf)
    accepted = rec.valid and passes_cutoff(phi, civr.c)
    if not accepted or alpha == 0.0:
        return Contribution(phi=phi, weight=0.0j, accepted=False,
                            vT=rec.end.v, alpha=alpha)
    kern = -abs(rec.end.v - zf.z_conj) ** 2 / alpha ** 2
    weight = (abs(mvv) ** 1.5 * np.exp(phi + kern)
              * civr.grid1.cell_area / (2.0 * np.pi * alpha ** 2))
    return Contribution(phi=phi, weight=weight, accepted=True,
                        vT=rec.end.v, alpha=alpha)


# -- vectorized ensemble assembly -------------------------------------------


def _endpoint_exponents(snap: EnsembleSnapshot, z0: CoherentLabel):
    """Per-trajectory base exponent A, endpoint exponent and masks.

    A collects the zf-independent part of phi:
    A = i(S+I) - |z0|^2/2 - i xi/2, so that
    phi = A + u d + (M_uv / 2 M_vv) d^2 - |zf|^2/2 with d = zf* - v(T).
    """
    with np.errstate(invalid="ignore", over="ignore"):
        A = 1j * (snap.S + snap.I) - 0.5 * z0.abs2 - 0.5j * snap.xi
        phi_self = A - 0.5 * np.abs(snap.v) ** 2
    caustic = np.abs(snap.M_vv) < CAUSTIC_TOL
    return A, phi_self, caustic


def endpoint_masks(snap: EnsembleSnapshot, z0: CoherentLabel, c: float):
    """Per-trajectory cutoff masks at the endpoint label (zf* = v(T)).

    This is the single-label summary used for contribution maps; the
    propagator assembly itself applies the cutoff per final label.
    """
    _, phi_self, caustic = _endpoint_exponents(snap, z0)
    ok = snap.valid & ~caustic
    with np.errstate(invalid="ignore"):
        accepted = ok & (np.real(phi_self) <= c)
    rejected = ok & ~accepted
    return accepted, rejected, caustic


def _meta(snap: EnsembleSnapshot, civr: CivrParams, contributing, caustic):
    valid = snap.valid
    usable = valid & ~caustic
    meta = {
        "mode": civr.mode,
        "a": civr.a,
        "c": civr.c,
        "n_trajectories": int(valid.size),
        "accepted": int(np.count_nonzero(contributing)),
        "rejected": int(np.count_nonzero(usable & ~contributing)),
        "invalid": int(np.count_nonzero(~valid)),
        "caustic": int(np.count_nonzero(valid & caustic)),
        "empty": bool(np.count_nonzero(contributing) == 0),
    }
    if np.any(valid):
        meta["h2_drift_max"] = float(np.max(snap.h2_drift[valid]))
        meta["h1_drift_max"] = float(np.max(snap.h1_drift[valid]))
        meta["max_xi_step"] = float(np.max(snap.max_xi_step[valid]))
    return meta


def _zf_conj_labels(zf_grid: PhaseGridSpec):
    qf, pf = zf_grid.mesh()
    zfc = (qf - 1j * pf) / SQRT2
    abs2 = 0.5 * (qf * qf + pf * pf)
    return qf, pf, zfc, abs2


def assemble_smooth(snap: EnsembleSnapshot, z0: CoherentLabel,
                    civr: CivrParams, zf_grid: PhaseGridSpec,
                    block: int = 512) -> PropagatorGrid:
    """Smoothed propagator from an already-propagated ensemble."""
    A, _, caustic = _endpoint_exponents(snap, z0)
    usable = snap.valid & ~caustic

    mvv_abs = np.abs(snap.M_vv)
    # sanitize masked lanes so that dropped terms never multiply nan/inf
    A = np.where(usable, A, 0.0)
    u = np.where(usable, snap.u, 0.0)
    vT = np.where(usable, snap.v, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        Cq = np.where(usable, snap.M_uv / (2.0 * snap.M_vv), 0.0)
    alpha2 = np.where(usable, (civr.a * mvv_abs) ** 2, 1.0)
    w = np.where(usable,
                 mvv_abs ** 1.5 * civr.grid1.cell_area / (2.0 * np.pi * alpha2),
                 0.0)

    _, _, zfc, zf_abs2 = _zf_conj_labels(zf_grid)
    K = np.empty(zfc.size, dtype=complex)
    contributing = np.zeros(usable.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(0, zfc.size, block):
            zb = zfc[s:s + block][None, :]
            d = zb - vT[:, None]
            phi = (A[:, None] + u[:, None] * d + Cq[:, None] * d * d
                   - 0.5 * zf_abs2[s:s + block][None, :])
            keep = (phi.real <= civr.c) & usable[:, None]
            contributing |= keep.any(axis=1)
            expo = phi - (d.real ** 2 + d.imag ** 2) / alpha2[:, None]
            expo = np.where(keep, expo, -np.inf)
            K[s:s + block] = (w[:, None] * np.exp(expo)).sum(axis=0)

    return PropagatorGrid(grid=zf_grid, K=K, T=snap.T,
                          meta=_meta(snap, civr, contributing, caustic))


def assemble_sudden(snap: EnsembleSnapshot, z0: CoherentLabel,
                    civr: CivrParams, zf_grid: PhaseGridSpec,
                    block: int = 512) -> PropagatorGrid:
    """Sudden propagator: endpoint delta realized as a narrow Gaussian.

    The delta pair in the endpoint variables (q1(T), p1(T)) uses per-axis
    widths epsilon * (zf grid spacing); the 2-pi of the complex delta
    cancels the 2-pi of the companion measure.
    """
    A, _, caustic = _endpoint_exponents(snap, z0)
    usable = snap.valid & ~caustic

    A = np.where(usable, A, 0.0)
    q1t = np.where(usable, snap.q1t, 0.0)
    p1t = np.where(usable, snap.p1t, 0.0)
    w = np.where(usable, np.abs(snap.M_vv) ** 1.5 * civr.grid1.cell_area, 0.0)

    sq = civr.epsilon * zf_grid.q.step
    sp = civr.epsilon * zf_grid.p.step
    norm = 1.0 / (2.0 * np.pi * sq * sp)

    qf, pf, _, zf_abs2 = _zf_conj_labels(zf_grid)
    K = np.empty(qf.size, dtype=complex)
    contributing = np.zeros(usable.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(0, qf.size, block):
            phi = A[:, None] - 0.5 * zf_abs2[s:s + block][None, :]
            keep = (phi.real <= civr.c) & usable[:, None]
            contributing |= keep.any(axis=1)
            dq = qf[s:s + block][None, :] - q1t[:, None]
            dp = pf[s:s + block][None, :] - p1t[:, None]
            expo = phi - 0.5 * (dq / sq) ** 2 - 0.5 * (dp / sp) ** 2
            expo = np.where(keep, expo, -np.inf)
            K[s:s + block] = (w[:, None] * (norm * np.exp(expo))).sum(axis=0)

    return PropagatorGrid(grid=zf_grid, K=K, T=snap.T,
                          meta=_meta(snap, civr, contributing, caustic))


def _propagate_grid(h: ScaledHamiltonian, z0: CoherentLabel, civr: CivrParams,
                    T: float, dt: float, workers: int) -> EnsembleSnapshot:
    _, _, x0 = launch_grid(z0, civr.grid1)
    return evolve_ensemble(h, x0, [T], dt=dt, workers=workers)[-1]


def smooth_K(h: ScaledHamiltonian, z0: CoherentLabel, civr: CivrParams,
             zf_grid: PhaseGridSpec, T: float, dt: float = 1e-3,
             workers: int = 1) -> PropagatorGrid:
    """Filinov-smoothed propagator on a grid of final labels."""
    snap = _propagate_grid(h, z0, civr, T, dt, workers)
    return assemble_smooth(snap, z0, civr, zf_grid)


def sudden_K(h: ScaledHamiltonian, z0: CoherentLabel, civr: CivrParams,
             zf_grid: PhaseGridSpec, T: float, dt: float = 1e-3,
             workers: int = 1) -> PropagatorGrid:
    """Sharp-endpoint propagator on a grid of final labels."""
    snap = _propagate_grid(h, z0, civr, T, dt, workers)
    return assemble_sudden(snap, z0, civr, zf_grid)


def endpoint_acceptance(snap: EnsembleSnapshot, z0: CoherentLabel, c: float):
    """(accepted mask, Re phi at the endpoint) for maps and reports."""
    _, phi_self, _ = _endpoint_exponents(snap, z0)
    accepted, _, _ = endpoint_masks(snap, z0, c)
    with np.errstate(invalid="ignore"):
        re_phi = np.where(snap.valid, np.real(phi_self), np.inf)
    return accepted, re_phi


def contribution_map(h: ScaledHamiltonian, z0: CoherentLabel, civr: CivrParams,
                     T: float, dt: float = 1e-3, workers: int = 1):
    """Acceptance mask over the companion grid.

    Returns (q1, p1, accepted, re_phi) flat arrays, q-major; re_phi is
    the endpoint exponent that the cutoff is applied to.
    """
    q1, p1, x0 = launch_grid(z0, civr.grid1)
    snap = evolve_ensemble(h, x0, [T], dt=dt, workers=workers)[-1]
    accepted, re_phi = endpoint_acceptance(snap, z0, civr.c)
    return q1, p1, accepted, re_phi


def lambda_check(rec: TrajectoryRecord, h: ScaledHamiltonian, lp: LaunchParams,
                 eps: float = 1e-5):
    """det of the endpoint-displacement matrix vs |M_vv|^2.

    The determinant is computed by central finite differences of the
    endpoint coordinates (q1(T), p1(T)) with respect to the companion
    point, independently of the variational integration behind rec.
    """
    starts = []
    for dq1, dp1 in ((eps, 0.0), (-eps, 0.0), (0.0, eps), (0.0, -eps)):
        lp_d = LaunchParams(lp.q0, lp.p0, lp.q1 + dq1, lp.p1 + dp1, lp.T, lp.dt)
        starts.append(initial_conditions(lp_d).as_array())
    snap = evolve_ensemble(h, np.array(starts), [lp.T], dt=lp.dt)[-1]
    lam = np.empty((2, 2))
    lam[0, 0] = (snap.q1t[0] - snap.q1t[1]) / (2.0 * eps)
    lam[1, 0] = (snap.p1t[0] - snap.p1t[1]) / (2.0 * eps)
    lam[0, 1] = (snap.q1t[2] - snap.q1t[3]) / (2.0 * eps)
    lam[1, 1] = (snap.p1t[2] - snap.p1t[3]) / (2.0 * eps)
    det = float(lam[0, 0] * lam[1, 1] - lam[0, 1] * lam[1, 0])
    return det, float(abs(rec.M_vv) ** 2)
