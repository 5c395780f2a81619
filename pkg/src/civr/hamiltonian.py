"""Classical Hamiltonian for the quadratic-plus-quartic family.

The quantum operator is H = p^2/2 + Omega^2 q^2/2 + lambda q^4/4.  Its
normal-ordered coherent-state matrix element defines the classical
function H(u, v) that drives the complex trajectories.  In scaled units
this function is

    H(q, p) = omega * ( p^2/2 + nu_bar^2 q^2/2 + lambda_bar q^4/4 + const )

with nu = Omega/omega, lambda_bar = lambda*hbar/omega^3 and
nu_bar^2 = nu^2 + 3*lambda_bar/2.  The additive constant carries the
hbar-corrections; the "bare" evaluation (no corrections) is kept
separately for reporting classical energies and turning points.

Evaluation at complex (q, p) is the analytic continuation of the
polynomial; the split into real functions H1 + i H2 of the doubled
phase-space point and the derivatives needed by the integrator are all
closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase_space import DoublePhasePoint, UnitScaling


@dataclass(frozen=True)
class QuarticSpec:
    """Physical (unscaled) parameters of the oscillator."""

    Omega: float = 1.0
    lam: float = 0.4
    scaling: UnitScaling = UnitScaling(1.0, 1.0)

    def __post_init__(self):
        if self.Omega < 0.0 or self.lam < 0.0:
            raise ValueError("Omega and lambda must be non-negative")


@dataclass(frozen=True)
class ScaledHamiltonian:
    """Dimensionless Hamiltonian coefficients (b = hbar = 1)."""

    nu: float
    lambda_bar: float
    nu_bar_sq: float
    const_term: float
    omega: float

    # -- complex evaluation ------------------------------------------------

    def value(self, q, p):
        """Analytic continuation of H(q, p), hbar-corrections included."""
        return self.omega * (0.5 * p * p + 0.5 * self.nu_bar_sq * q * q
                             + 0.25 * self.lambda_bar * q ** 4 + self.const_term)

    def bare_value(self, q, p):
        """Kinetic + bare potential, the energy the wavepacket center reports."""
        return 0.5 * self.omega * p * p + self.bare_potential(q)

    def bare_potential(self, q):
        return self.omega * (0.5 * self.nu * self.nu * q * q
                             + 0.25 * self.lambda_bar * q ** 4)

    def dq(self, q, p):
        """dH/dq."""
        return self.omega * (self.nu_bar_sq * q + self.lambda_bar * q ** 3)

    def dp(self, q, p):
        """dH/dp."""
        return self.omega * p

    def dqq(self, q):
        """d^2H/dq^2."""
        return self.omega * (self.nu_bar_sq + 3.0 * self.lambda_bar * q * q)

    def mixed_uv(self, q, p):
        """d^2H/du dv = (H_qq + H_pp)/2, the action-correction integrand."""
        return 0.5 * (self.dqq(q) + self.omega)

    # -- doubled phase space -----------------------------------------------

    def split(self, x: DoublePhasePoint):
        """H(q, p) = H1 + i H2 at the encoded complex point."""
        h = self.value(x.Q1 + 1j * x.P2, x.P1 + 1j * x.Q2)
        return h.real, h.imag

    def gradient(self, x: DoublePhasePoint) -> np.ndarray:
        """(dH1/dQ1, dH1/dQ2, dH1/dP1, dH1/dP2)."""
        q = x.Q1 + 1j * x.P2
        p = x.P1 + 1j * x.Q2
        hq = self.dq(q, p)
        hp = self.dp(q, p)
        return np.array([hq.real, -hp.imag, hp.real, -hq.imag])

    def hessian(self, x: DoublePhasePoint) -> np.ndarray:
        """Second derivatives of H1 in (Q1, Q2, P1, P2) order."""
        q = x.Q1 + 1j * x.P2
        hqq = self.dqq(q)
        a, bb = hqq.real, hqq.imag
        w = self.omega
        return np.array([
            [a, 0.0, 0.0, -bb],
            [0.0, -w, 0.0, 0.0],
            [0.0, 0.0, w, 0.0],
            [-bb, 0.0, 0.0, -a],
        ])


def build_scaled(spec: QuarticSpec) -> ScaledHamiltonian:
    """Convert physical parameters to the scaled coefficient set."""
    omega = spec.scaling.omega
    nu = spec.Omega / omega
    lambda_bar = spec.lam * spec.scaling.hbar / omega ** 3
    nu_bar_sq = nu * nu + 1.5 * lambda_bar
    const_term = 0.25 * (1.0 + nu * nu + 3.0 * lambda_bar / 16.0)
    return ScaledHamiltonian(nu=nu, lambda_bar=lambda_bar, nu_bar_sq=nu_bar_sq,
                             const_term=const_term, omega=omega)
