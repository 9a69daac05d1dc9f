"""Coordinate systems for the planar three-identical-nucleus problem.

Three equivalent descriptions of the triangle of nuclei are supported and
interconverted:

- interparticle distances (r12, r23, r31),
- democratic hyperspherical coordinates (R, theta, phi) with
  ``r12 = 3^{-1/4} R [1 + sin(theta) sin(phi - pi/6)]^{1/2}`` and cyclic
  partners shifted by -5pi/6 and +pi/2,
- vibrational symmetry coordinates (Q1, Qx, Qy) measuring displacements from
  the equilateral equilibrium, with polar form (rho, phi_p).

The body-frame cartesian positions of the nuclei (z' = 0 plane, x' along the
smallest moment of inertia) are also provided; their pairwise distances
reproduce the hyperspherical distance formulas exactly, which pins down the
normalization constant of the cartesian map.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .units import MASS_H

# Normalization of the body-frame cartesian map.  Fixed uniquely by requiring
# |x_i - x_j| to equal the hyperspherical distance formulas; regression-tested.
BODY_FRAME_D = math.sqrt(2.0) * 3.0 ** (-0.25)

# Azimuthal offsets of the three nuclei in the body frame.
_VERTEX_ANGLES = (5.0 * math.pi / 6.0, -math.pi / 2.0, math.pi / 6.0)

# Phase offsets of the three distance formulas: r12, r23, r31.
_DIST_PHASES = (-math.pi / 6.0, -5.0 * math.pi / 6.0, math.pi / 2.0)


@dataclass(frozen=True)
class GeomConstants:
    """Geometry constants of the X3+ ion (defaults: H3+).

    f        dimensionless-izing scale of the symmetry coordinates [1/bohr]
    r_equi   equilibrium internuclear distance [bohr]
    m        nuclear (atomic) mass [electron masses]
    """

    f: float = 2.639255
    r_equi: float = 1.6504
    m: float = MASS_H

    @property
    def R0(self) -> float:
        """Hyperradius of the equilibrium equilateral configuration."""
        return 3.0 ** 0.25 * self.r_equi

    @property
    def mu3b(self) -> float:
        """Three-body reduced mass m/sqrt(3) [electron masses]."""
        return self.m / math.sqrt(3.0)

    @property
    def d(self) -> float:
        return BODY_FRAME_D


H3_CONSTANTS = GeomConstants()


@dataclass(frozen=True)
class HyperPoint:
    """A shape point in hyperspherical coordinates (R > 0 bohr, angles rad)."""

    R: float
    theta: float
    phi: float

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError(f"hyperradius must be positive, got {self.R}")
        if not 0.0 <= self.theta <= math.pi / 2.0 + 1e-12:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")
        object.__setattr__(self, "phi", self.phi % (2.0 * math.pi))


@dataclass(frozen=True)
class InterparticleDistances:
    r12: float
    r23: float
    r31: float

    def __post_init__(self):
        r = (self.r12, self.r23, self.r31)
        if min(r) <= 0.0:
            raise ValueError(f"distances must be positive, got {r}")
        s = sum(r)
        for x in r:
            if x > s - x + 1e-12 * s:
                raise ValueError(f"triangle inequality violated: {r}")

    def as_tuple(self):
        return (self.r12, self.r23, self.r31)


@dataclass(frozen=True)
class SymCoords:
    """Jahn-Teller symmetry coordinates; (rho, phi_p) is the polar form of
    (Qx, Qy)."""

    Q1: float
    Qx: float
    Qy: float
    rho: float = field(default=None)  # type: ignore[assignment]
    phi_p: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        rho = math.hypot(self.Qx, self.Qy)
        phi_p = math.atan2(self.Qy, self.Qx) if rho > 0.0 else 0.0
        if self.rho is None:
            object.__setattr__(self, "rho", rho)
        elif abs(self.rho - rho) > 1e-10 * max(1.0, rho):
            raise ValueError("inconsistent rho for given (Qx, Qy)")
        if self.phi_p is None:
            object.__setattr__(self, "phi_p", phi_p)
        elif rho > 1e-300:
            dq = math.hypot(rho * math.cos(self.phi_p) - self.Qx,
                            rho * math.sin(self.phi_p) - self.Qy)
            if dq > 1e-10 * max(1.0, rho):
                raise ValueError("inconsistent phi_p for given (Qx, Qy)")

    @classmethod
    def from_polar(cls, Q1: float, rho: float, phi_p: float) -> "SymCoords":
        return cls(Q1, rho * math.cos(phi_p), rho * math.sin(phi_p))


def interparticle_arrays(R, theta, phi):
    """Vectorized distance formulas; returns (r12, r23, r31) arrays."""
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    pref = 3.0 ** (-0.25) * R
    out = []
    for delta in _DIST_PHASES:
        arg = 1.0 + np.sin(theta) * np.sin(phi + delta)
        out.append(pref * np.sqrt(np.clip(arg, 0.0, None)))
    return tuple(out)


def to_interparticle(p: HyperPoint) -> InterparticleDistances:
    r12, r23, r31 = interparticle_arrays(p.R, p.theta, p.phi)
    return InterparticleDistances(float(r12), float(r23), float(r31))


def from_interparticle(d: InterparticleDistances) -> HyperPoint:
    """Inverse map; phi is returned in [0, 2pi)."""
    r2 = np.array([d.r12 ** 2, d.r23 ** 2, d.r31 ** 2])
    R2 = r2.sum() / math.sqrt(3.0)
    R = math.sqrt(R2)
    a = math.sqrt(3.0) * r2 / R2 - 1.0  # sin(theta)*sin(phi + delta_k)
    # a3 = sin(theta) cos(phi); (a1 - a2)/sqrt(3) = sin(theta) sin(phi)
    x = a[2]
    y = (a[0] - a[1]) / math.sqrt(3.0)
    st = math.hypot(x, y)
    st = min(st, 1.0)
    theta = math.asin(st)
    phi = math.atan2(y, x) % (2.0 * math.pi) if st > 0.0 else 0.0
    return HyperPoint(R, theta, phi)


def sym_coords_arrays(R, theta, phi, c: GeomConstants = H3_CONSTANTS):
    """Vectorized (Q1, rho, phi_p) through the exact distance chain."""
    r12, r23, r31 = interparticle_arrays(R, theta, phi)
    # Opposite-particle displacement convention: dr1 pairs with r23.
    dr1 = r23 - c.r_equi
    dr2 = r31 - c.r_equi
    dr3 = r12 - c.r_equi
    Q1 = c.f / math.sqrt(3.0) * (dr1 + dr2 + dr3)
    Qx = c.f / math.sqrt(3.0) * (2.0 * dr3 - dr2 - dr1)
    Qy = c.f * (dr1 - dr2)
    rho = np.hypot(Qx, Qy)
    phi_p = np.arctan2(Qy, Qx)
    return Q1, Qx, Qy, rho, phi_p


def to_sym_coords(d: InterparticleDistances,
                  c: GeomConstants = H3_CONSTANTS) -> SymCoords:
    dr1 = d.r23 - c.r_equi
    dr2 = d.r31 - c.r_equi
    dr3 = d.r12 - c.r_equi
    Q1 = c.f / math.sqrt(3.0) * (dr1 + dr2 + dr3)
    Qx = c.f / math.sqrt(3.0) * (2.0 * dr3 - dr2 - dr1)
    Qy = c.f * (dr1 - dr2)
    return SymCoords(Q1, Qx, Qy)


def sym_coords_at(p: HyperPoint, c: GeomConstants = H3_CONSTANTS) -> SymCoords:
    """Symmetry coordinates of a hyperspherical point (exact chain)."""
    return to_sym_coords(to_interparticle(p), c)


def nuclear_positions(p: HyperPoint,
                      c: GeomConstants = H3_CONSTANTS) -> np.ndarray:
    """Body-frame cartesian positions, shape (3, 3); z' = 0 for all nuclei."""
    pref = 2.0 / (3.0 * c.d) * p.R
    u = p.theta / 2.0 - math.pi / 4.0
    pos = np.zeros((3, 3))
    for i, v in enumerate(_VERTEX_ANGLES):
        pos[i, 0] = pref * math.cos(u) * math.cos(p.phi / 2.0 + v)
        pos[i, 1] = -pref * math.sin(u) * math.sin(p.phi / 2.0 + v)
    return pos


def small_theta_map(p: HyperPoint, c: GeomConstants = H3_CONSTANTS,
                    warn_threshold: float = 0.3) -> SymCoords:
    """Linearized symmetry coordinates, valid near the equilateral limit.

    Q1 = 3^{1/4} f (R - R0), rho = 3^{1/4} f R theta / 2, phi_p = phi - 2pi/3.
    Emits a warning when theta exceeds ``warn_threshold``.
    """
    if p.theta > warn_threshold:
        warnings.warn(
            f"small-theta map used at theta={p.theta:.3f} rad "
            f"(> {warn_threshold}); accuracy degrades as O(theta^2)",
            stacklevel=2,
        )
    scale = 3.0 ** 0.25 * c.f
    Q1 = scale * (p.R - c.R0)
    rho = scale * p.R * p.theta / 2.0
    phi_p = p.phi - 2.0 * math.pi / 3.0
    return SymCoords.from_polar(Q1, rho, phi_p)
