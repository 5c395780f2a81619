"""Independent quantum propagators used as accuracy oracles.

Two references: the closed-form coherent-state propagator of the unit
harmonic oscillator, and a Strang-split spectral solver for the bare
quantum Hamiltonian H = p^2/2 + Omega^2 q^2/2 + lambda q^4/4 (the
hbar-corrections of the classical function belong to the trajectory
side, not to the quantum operator).  Imaginary-time relaxation of the
same solver, with Gram-Schmidt deflation, supplies the lowest
eigenenergies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import QuarticSpec
from .phase_space import CoherentLabel
from .reconstruction import WavefunctionGrid, _trapz


class NumericalFailure(RuntimeError):
    """A propagation failed a hard numerical validity check."""


@dataclass(frozen=True)
class SplitOpConfig:
    x_min: float = -12.0
    x_max: float = 12.0
    n_x: int = 2048
    dt: float = 1e-3
    T: float = 0.0

    def __post_init__(self):
        if self.n_x < 2 or self.n_x & (self.n_x - 1):
            raise ValueError("n_x must be a power of two")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    def x_nodes(self) -> np.ndarray:
        # periodic grid: x_max is the wrap-around image of x_min
        return self.x_min + np.arange(self.n_x) * self.dx


def harmonic_exact_K(z0: CoherentLabel, zf: CoherentLabel, T: float) -> complex:
    """K(zf*, z0, T) of the unit harmonic oscillator (scaled units)."""
    rot = np.exp(-1j * T)
    return np.exp(-0.5j * T) * np.exp(zf.z_conj * z0.z * rot
                                      - 0.5 * zf.abs2 - 0.5 * z0.abs2)


class _SplitOp:
    """Strang-split spectral stepper for the bare scaled Hamiltonian."""

    def __init__(self, spec: QuarticSpec, cfg: SplitOpConfig):
        self.cfg = cfg
        om = spec.scaling.omega
        nu = spec.Omega / om
        lb = spec.lam * spec.scaling.hbar / om ** 3
        x = cfg.x_nodes()
        self.x = x
        self.v = om * (0.5 * nu * nu * x * x + 0.25 * lb * x ** 4)
        k = 2.0 * np.pi * np.fft.fftfreq(cfg.n_x, d=cfg.dx)
        self.kin = om * 0.5 * k * k

    def run(self, psi0: np.ndarray, duration: float, dt: float,
            factor: complex = -1j) -> np.ndarray:
        """Apply exp(factor * H * duration) with Strang steps of size dt."""
        psi = np.asarray(psi0, dtype=complex).copy()
        nfull = int(np.floor(duration / dt + 1e-9))
        rem = duration - nfull * dt
        steps = [dt] * nfull + ([rem] if rem > 1e-12 else [])
        half_v = np.exp(0.5 * factor * dt * self.v)
        full_k = np.exp(factor * dt * self.kin)
        for h in steps:
            if h != dt:
                half_v = np.exp(0.5 * factor * h * self.v)
                full_k = np.exp(factor * h * self.kin)
            psi *= half_v
            psi = np.fft.ifft(full_k * np.fft.fft(psi))
            psi *= half_v
        return psi

    def energy(self, psi: np.ndarray) -> float:
        """Rayleigh quotient <psi|H|psi> / <psi|psi>."""
        hpsi = np.fft.ifft(self.kin * np.fft.fft(psi)) + self.v * psi
        num = _trapz((np.conj(psi) * hpsi).real, self.cfg.dx)
        den = _trapz(np.abs(psi) ** 2, self.cfg.dx)
        return float(num / den)


def _check_edges(psi: np.ndarray, tol: float = 1e-10) -> None:
    peak = np.max(np.abs(psi))
    if peak > 0.0 and max(abs(psi[0]), abs(psi[-1])) > tol * peak:
        raise NumericalFailure("wavefunction reached the grid edge; "
                               "widen the oracle grid")


def split_operator_evolve(spec: QuarticSpec, psi0: WavefunctionGrid,
                          cfg: SplitOpConfig) -> WavefunctionGrid:
    """Evolve psi0 to cfg.T under the bare quantum Hamiltonian."""
    return split_operator_evolve_times(spec, psi0, cfg, [cfg.T])[-1]


def split_operator_evolve_times(spec: QuarticSpec, psi0: WavefunctionGrid,
                                cfg: SplitOpConfig, times) -> list:
    """Snapshots of the split-operator evolution at each requested time."""
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
        raise ValueError("times must be non-decreasing and non-negative")
    solver = _SplitOp(spec, cfg)
    if psi0.x.shape != solver.x.shape or not np.allclose(psi0.x, solver.x):
        raise ValueError("psi0 is not sampled on the oracle grid")
    out = []
    psi = psi0.psi
    t_prev = 0.0
    for T in times:
        psi = solver.run(psi, T - t_prev, cfg.dt)
        out.append(WavefunctionGrid(solver.x.copy(), psi.copy()))
        t_prev = T
    _check_edges(psi)
    return out


def lowest_energies(spec: QuarticSpec, cfg: SplitOpConfig | None = None,
                    n_states: int = 3, dtau: float = 5e-3,
                    tol: float = 1e-10, max_steps: int = 200_000) -> np.ndarray:
    """Lowest eigenenergies by imaginary-time relaxation with deflation.

    Energies are returned in physical units (hbar times the scaled
    Rayleigh quotients).
    """
    cfg = cfg or SplitOpConfig()
    solver = _SplitOp(spec, cfg)
    x = solver.x
    dx = cfg.dx
    # Gaussian seed times polynomials; orthogonalization keeps parities apart
    seeds = [np.exp(-0.5 * x * x) * x ** j for j in range(n_states)]
    states = [s / np.sqrt(_trapz(np.abs(s) ** 2, dx)) for s in
              (np.asarray(s, dtype=complex) for s in seeds)]
    energies = np.array([solver.energy(s) for s in states])
    for _ in range(max_steps):
        new_states = []
        for j, s in enumerate(states):
            s = solver.run(s, dtau, dtau, factor=-1.0)
            for t in new_states:
                s = s - t * _trapz(np.conj(t) * s, dx)
            s = s / np.sqrt(_trapz(np.abs(s) ** 2, dx))
            new_states.append(s)
        states = new_states
        new_energies = np.array([solver.energy(s) for s in states])
        delta = np.max(np.abs(new_energies - energies))
        energies = new_energies
        if delta < tol:
            break
    else:
        raise NumericalFailure("imaginary-time relaxation did not converge")
    return energies * spec.scaling.hbar


def ground_energy_check(spec: QuarticSpec, cfg: SplitOpConfig | None = None) -> float:
    """Ground-state energy of the bare quantum Hamiltonian."""
    return float(lowest_energies(spec, cfg, n_states=1)[0])
