"""Potential-energy-surface ingestion for the three-nucleus ion.

Two plain-text file formats are accepted, distinguished by a header line
``# format = grid`` or ``# format = expansion``:

grid
    rows ``r12 r23 r31 energy_hartree``; the points must form a full tensor
    grid in hyperspherical (R, theta, phi) after conversion.  Evaluation uses
    trilinear interpolation in (R, theta, phi) with periodic wrapping in phi.

expansion
    labeled analytic terms, one per line.  Supported terms:
    ``pair_morse D a r0`` (sum of pairwise Morse bonds, energy zero at
    dissociation) and ``offset E0``.

Ingested surfaces must be fully permutation-symmetric in the three
distances; :func:`validate_s3_symmetry` spot-checks this on random triangles
before a surface is accepted for production use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import geom


class PesError(Exception):
    pass


class PesDomainError(PesError):
    """Raised when a surface is evaluated outside its tabulated domain."""


class PotentialSurface:
    """Interface: energy as a function of the three internuclear distances."""

    name = "unnamed"

    def evaluate(self, r12, r23, r31):
        raise NotImplementedError

    def evaluate_hyper(self, R, theta, phi):
        r12, r23, r31 = geom.interparticle_arrays(R, theta, phi)
        return self.evaluate(r12, r23, r31)


@dataclass
class PairMorsePES(PotentialSurface):
    """Sum of pairwise Morse bonds; permutation-symmetric by construction."""

    D: float
    a: float
    r0: float
    offset: float = 0.0
    name: str = "pair-morse"

    def evaluate(self, r12, r23, r31):
        tot = np.zeros(np.broadcast(np.asarray(r12), np.asarray(r23),
                                    np.asarray(r31)).shape)
        for r in (r12, r23, r31):
            x = np.exp(-self.a * (np.asarray(r) - self.r0))
            tot = tot + self.D * (x * x - 2.0 * x)
        return tot + self.offset


class GridPES(PotentialSurface):
    """Tabulated surface, trilinear in (R, theta, phi) with periodic phi."""

    def __init__(self, R_axis, theta_axis, phi_axis, values, name="grid"):
        self.name = name
        self.R_axis = np.asarray(R_axis)
        self.theta_axis = np.asarray(theta_axis)
        self.phi_axis = np.asarray(phi_axis)
        # wrap phi: duplicate the first plane at phi0 + 2pi
        phi_ext = np.concatenate([self.phi_axis,
                                  [self.phi_axis[0] + 2.0 * math.pi]])
        vals_ext = np.concatenate([values, values[:, :, :1]], axis=2)
        self._interp = RegularGridInterpolator(
            (self.R_axis, self.theta_axis, phi_ext), vals_ext,
            method="linear", bounds_error=True)

    def evaluate(self, r12, r23, r31):
        r12 = np.asarray(r12, dtype=float)
        r23 = np.asarray(r23, dtype=float)
        r31 = np.asarray(r31, dtype=float)
        r12, r23, r31 = np.broadcast_arrays(np.atleast_1d(r12),
                                            np.atleast_1d(r23),
                                            np.atleast_1d(r31))
        shape = r12.shape
        pts = np.empty((r12.size, 3))
        for i, (a, b, c) in enumerate(zip(r12.ravel(), r23.ravel(),
                                          r31.ravel())):
            p = geom.from_interparticle(
                geom.InterparticleDistances(float(a), float(b), float(c)))
            ph = p.phi - self.phi_axis[0]
            ph = self.phi_axis[0] + (ph % (2.0 * math.pi))
            pts[i] = (p.R, p.theta, ph)
        try:
            out = self._interp(pts)
        except ValueError as exc:
            raise PesDomainError(str(exc)) from exc
        return out.reshape(shape)

    def evaluate_hyper(self, R, theta, phi):
        R, theta, phi = np.broadcast_arrays(
            np.asarray(R, float), np.asarray(theta, float),
            np.asarray(phi, float))
        ph = self.phi_axis[0] + ((phi - self.phi_axis[0]) % (2.0 * math.pi))
        pts = np.stack([R.ravel(), theta.ravel(), ph.ravel()], axis=-1)
        try:
            out = self._interp(pts)
        except ValueError as exc:
            raise PesDomainError(str(exc)) from exc
        return out.reshape(R.shape)


def _parse_header(lines):
    meta = {}
    body = []
    for ln in lines:
        s = ln.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "=" in s:
                k, _, v = s[1:].partition("=")
                meta[k.strip()] = v.strip()
            continue
        body.append(s)
    return meta, body


def load_pes(path) -> PotentialSurface:
    """Parse a PES file; raises PesError on malformed input or NaN."""
    with open(path) as fh:
        meta, body = _parse_header(fh.readlines())
    fmt = meta.get("format")
    name = meta.get("name", "unnamed")
    if fmt == "expansion":
        terms = {"offset": 0.0}
        morse = None
        for ln in body:
            parts = ln.split()
            if parts[0] == "pair_morse":
                if len(parts) != 4:
                    raise PesError(f"pair_morse needs 3 parameters: {ln!r}")
                morse = tuple(float(x) for x in parts[1:])
            elif parts[0] == "offset":
                terms["offset"] = float(parts[1])
            else:
                raise PesError(f"unknown expansion term {parts[0]!r}")
        if morse is None:
            raise PesError("expansion file defines no potential term")
        if any(math.isnan(x) for x in morse + (terms["offset"],)):
            raise PesError("NaN in expansion parameters")
        return PairMorsePES(*morse, offset=terms["offset"], name=name)
    if fmt == "grid":
        rows = []
        for ln in body:
            parts = ln.split()
            if len(parts) != 4:
                raise PesError(f"grid rows need 4 columns: {ln!r}")
            rows.append([float(x) for x in parts])
        arr = np.array(rows)
        if np.isnan(arr).any():
            raise PesError("NaN in grid data")
        hyper = np.empty((len(rows), 3))
        for i, (a, b, c, _) in enumerate(arr):
            p = geom.from_interparticle(
                geom.InterparticleDistances(a, b, c))
            hyper[i] = (p.R, p.theta, p.phi)
        axes = []
        for k in range(3):
            u = np.unique(np.round(hyper[:, k], 10))
            axes.append(u)
        nR, nt, nph = (len(a) for a in axes)
        if nR * nt * nph != len(rows):
            raise PesError(
                "grid rows do not form a full (R, theta, phi) tensor grid")
        vals = np.full((nR, nt, nph), np.nan)
        for (R, t, ph), e in zip(hyper, arr[:, 3]):
            i = np.searchsorted(axes[0], round(R, 10))
            j = np.searchsorted(axes[1], round(t, 10))
            k = np.searchsorted(axes[2], round(ph, 10))
            vals[i, j, k] = e
        if np.isnan(vals).any():
            raise PesError("grid has duplicate or missing points")
        return GridPES(*axes, vals, name=name)
    raise PesError(f"unknown or missing PES format {fmt!r}")


def validate_s3_symmetry(pes: PotentialSurface, n: int = 100,
                         tol: float = 1e-8, seed: int = 7,
                         r_range=(1.0, 3.2)) -> float:
    """Max deviation of V under the 6 relabelings of random triangles.

    Raises PesError when the deviation exceeds ``tol``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    while count < n:
        r = rng.uniform(*r_range, size=3)
        if (r[0] + r[1] <= r[2] or r[1] + r[2] <= r[0]
                or r[2] + r[0] <= r[1]):
            continue
        count += 1
        perms = [(0, 1, 2), (1, 2, 0), (2, 0, 1),
                 (0, 2, 1), (2, 1, 0), (1, 0, 2)]
        vals = [float(pes.evaluate(r[p[0]], r[p[1]], r[p[2]]))
                for p in perms]
        worst = max(worst, max(vals) - min(vals))
    scale = max(1e-30, abs(float(pes.evaluate(*
                    [sum(r_range) / 2.0] * 3))))
    if worst > tol * max(1.0, scale):
        raise PesError(
            f"surface is not permutation-symmetric: deviation {worst:.3e}")
    return worst
