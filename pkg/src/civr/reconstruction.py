"""Position-space wavefunctions from coherent-state data.

The propagator sampled on a rectangular grid of final labels is summed
against the coherent-state position amplitudes,

    psi(x, T) = sum_nm <x|z_nm> K(z_nm*, z0, T) dq dp / (2 pi),

and the resulting wavefunction supports norms, overlaps and fidelities
by trapezoid quadrature.  The phase convention

    <x|z> = pi^{-1/4} exp(-(x - q)^2/2 + i p (x - q/2))

is used everywhere (it makes <x|z=0> the real positive ground state).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .phase_space import CoherentLabel
from .propagator import PropagatorGrid

EDGE_DECAY = 1e-8


@dataclass
class WavefunctionGrid:
    """Complex samples on a uniform position grid."""

    x: np.ndarray
    psi: np.ndarray
    renormalized: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.x.shape != self.psi.shape:
            raise ValueError("x and psi must have the same shape")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def norm(self) -> float:
        """integral of |psi|^2 dx (trapezoid)."""
        return float(_trapz(np.abs(self.psi) ** 2, self.dx))

    def renormalize(self) -> "WavefunctionGrid":
        nrm = self.norm
        if nrm <= 0.0 or not np.isfinite(nrm):
            raise ValueError("cannot renormalize a wavefunction with zero norm")
        return WavefunctionGrid(self.x, self.psi / np.sqrt(nrm), renormalized=True)


def _trapz(y: np.ndarray, dx: float):
    return dx * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def coherent_position_amplitude(x, z: CoherentLabel) -> np.ndarray:
    """<x|z> on the given positions (scaled units)."""
    x = np.asarray(x, dtype=float)
    return np.pi ** -0.25 * np.exp(-0.5 * (x - z.q) ** 2
                                   + 1j * z.p * (x - 0.5 * z.q))


def coherent_state(x, z: CoherentLabel) -> WavefunctionGrid:
    return WavefunctionGrid(x, coherent_position_amplitude(x, z))


def reconstruct(K: PropagatorGrid, x) -> WavefunctionGrid:
    """Sum the propagator grid into a position-space wavefunction."""
    x = np.asarray(x, dtype=float)
    qf, pf = K.grid.mesh()
    # <x|z_nm>: outer product over (x, grid node)
    amp = np.pi ** -0.25 * np.exp(-0.5 * (x[:, None] - qf[None, :]) ** 2
                                  + 1j * pf[None, :] * (x[:, None] - 0.5 * qf[None, :]))
    psi = amp @ (K.K * (K.grid.cell_area / (2.0 * np.pi)))
    return WavefunctionGrid(x, psi)


def fidelity(a: WavefunctionGrid, b: WavefunctionGrid) -> float:
    """|<a|b>| / (||a|| ||b||); invariant under global phases and scaling."""
    if a.x.shape != b.x.shape or not np.allclose(a.x, b.x):
        raise ValueError("wavefunctions live on different grids")
    dx = a.dx
    ov = _trapz(np.conj(a.psi) * b.psi, dx)
    na = _trapz(np.abs(a.psi) ** 2, dx)
    nb = _trapz(np.abs(b.psi) ** 2, dx)
    if na <= 0.0 or nb <= 0.0:
        raise ValueError("fidelity of a zero wavefunction is undefined")
    return float(np.abs(ov) / np.sqrt(na * nb))


def coherent_overlap_from_grid(psi: WavefunctionGrid, z: CoherentLabel) -> complex:
    """<z|psi> by quadrature; warns when psi has not decayed at the edges."""
    tail = max(abs(psi.psi[0]), abs(psi.psi[-1]))
    peak = np.max(np.abs(psi.psi))
    if peak > 0.0 and tail > EDGE_DECAY * max(1.0, peak):
        warnings.warn("wavefunction has not decayed at the grid edges; "
                      "overlap may be inaccurate", stacklevel=2)
    integrand = np.conj(coherent_position_amplitude(psi.x, z)) * psi.psi
    return complex(_trapz(integrand, psi.dx))
