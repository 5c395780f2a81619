"""Phase-space value types: coherent-state labels, unit scaling, doubled points.

All internal computation happens in scaled units (length scale b = 1,
hbar = 1).  ``UnitScaling`` converts user-facing quantities at the
boundary.  A complex phase-space point (q, p) is stored either as a pair
of complex numbers or, equivalently, as the real 4-vector
(Q1, Q2, P1, P2) with q = Q1 + i*P2 and p = P1 + i*Q2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class CoherentLabel:
    """Center (q, p) of a minimum-uncertainty wavepacket, scaled units."""

    q: float
    p: float

    @property
    def z(self) -> complex:
        return (self.q + 1j * self.p) / SQRT2

    @property
    def z_conj(self) -> complex:
        return (self.q - 1j * self.p) / SQRT2

    @property
    def abs2(self) -> float:
        """|z|^2 = (q^2 + p^2)/2."""
        return 0.5 * (self.q * self.q + self.p * self.p)


@dataclass(frozen=True)
class UnitScaling:
    """Length scale b and hbar defining the dimensionless variables.

    Scaled coordinates are q/b and p*b/hbar; omega = hbar/b**2 is the
    frequency unit that multiplies the scaled Hamiltonian.
    """

    b: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.b <= 0.0 or self.hbar <= 0.0:
            raise ValueError("b and hbar must be positive")

    @property
    def omega(self) -> float:
        return self.hbar / (self.b * self.b)

    def scale(self, q, p):
        """Physical (q, p) -> dimensionless (q/b, p*b/hbar)."""
        return q / self.b, p * self.b / self.hbar

    def unscale(self, qs, ps):
        """Inverse of :meth:`scale`."""
        return qs * self.b, ps * self.hbar / self.b


@dataclass(frozen=True)
class DoublePhasePoint:
    """Real 4-vector encoding a complex phase-space point."""

    Q1: float
    Q2: float
    P1: float
    P2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.Q1, self.Q2, self.P1, self.P2], dtype=float)

    @staticmethod
    def from_array(x) -> "DoublePhasePoint":
        return DoublePhasePoint(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class ComplexPhasePoint:
    """Complex (q, p) with the associated holomorphic pair (u, v).

    u and v are independent coordinates: v equals u* only when q and p
    are both real.
    """

    q: complex
    p: complex

    @property
    def u(self) -> complex:
        return (self.q + 1j * self.p) / SQRT2

    @property
    def v(self) -> complex:
        return (self.q - 1j * self.p) / SQRT2


def to_double(cp: ComplexPhasePoint) -> DoublePhasePoint:
    """Encode complex (q, p) as (Q1, Q2, P1, P2) with q = Q1 + i P2, p = P1 + i Q2."""
    return DoublePhasePoint(cp.q.real, cp.p.imag, cp.p.real, cp.q.imag)


def from_double(x: DoublePhasePoint) -> ComplexPhasePoint:
    """Inverse of :func:`to_double`."""
    return ComplexPhasePoint(q=x.Q1 + 1j * x.P2, p=x.P1 + 1j * x.Q2)


def uv_from_qp(q: complex, p: complex):
    """Holomorphic coordinates u = (q + i p)/sqrt(2), v = (q - i p)/sqrt(2)."""
    return (q + 1j * p) / SQRT2, (q - 1j * p) / SQRT2


def qp_from_uv(u: complex, v: complex):
    """Inverse of :func:`uv_from_qp`."""
    return (u + v) / SQRT2, -1j * (u - v) / SQRT2


def label_overlap(zf: CoherentLabel, z0: CoherentLabel) -> complex:
    """Overlap <zf|z0> = exp(zf* z0 - |zf|^2/2 - |z0|^2/2)."""
    return np.exp(zf.z_conj * z0.z - 0.5 * zf.abs2 - 0.5 * z0.abs2)
