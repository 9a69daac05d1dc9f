"""Determinantal bound-level search for closed-channel MQDT.

Bound levels below all channel thresholds satisfy
``det[tan(pi nu) + K] = 0`` with nu_i = 1 / sqrt(2 (E_i - E)).  The search
uses the pole-free rescaling ``det[sin(pi nu) + cos(pi nu) K]`` (the
original determinant times prod_i cos(pi nu_i); same zero set away from
simultaneous poles).  The energy grid is uniform in the effective quantum
number of the lowest threshold, which makes the root density uniform as the
threshold is approached.  Roots are bracketed by sign changes and refined
with Brent's method; nearly degenerate pairs that do not produce a sign
change are recovered from local minima of the smallest singular value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import brentq

from .units import HARTREE_TO_INVCM


class MqdtError(Exception):
    pass


@dataclass
class LevelRecord:
    """One bound level: energy, per-channel effective quantum numbers, and
    the dominant-channel annotation from the determinant's null vector."""

    energy_h: float
    nu: np.ndarray
    dominant: int
    weights: np.ndarray
    block: dict = field(default_factory=dict)

    @property
    def energy_cm(self) -> float:
        return self.energy_h * HARTREE_TO_INVCM

    @property
    def nu_dominant(self) -> float:
        return float(self.nu[self.dominant])


def _nu_vector(E: float, thresholds: np.ndarray) -> np.ndarray:
    gap = thresholds - E
    if np.any(gap <= 0.0):
        raise MqdtError(f"E = {E} is not below every threshold")
    return 1.0 / np.sqrt(2.0 * gap)


def det_function(E: float, K: np.ndarray, thresholds) -> float:
    """Pole-free determinant det[sin(pi nu) + cos(pi nu) K] at energy E."""
    thresholds = np.asarray(thresholds, dtype=float)
    nu = _nu_vector(E, thresholds)
    s = np.sin(math.pi * nu)
    c = np.cos(math.pi * nu)
    M = np.diag(s) + c[:, None] * np.asarray(K)
    return float(np.linalg.det(M))


def _matrix(E: float, K: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    nu = _nu_vector(E, thresholds)
    return (np.diag(np.sin(math.pi * nu))
            + np.cos(math.pi * nu)[:, None] * K)


def _null_weights(E: float, K: np.ndarray, thresholds: np.ndarray):
    M = _matrix(E, K, thresholds)
    _, sv, vt = np.linalg.svd(M)
    v = vt[-1]
    w = v ** 2
    return w / w.sum(), sv


def find_levels(K, thresholds, window=None, n_max: int | None = None,
                nu_step: float = 0.002, refine_tol: float = 1e-12,
                threads: int = 1, block: dict | None = None,
                stability_check: bool = True):
    """All determinantal roots in an energy window below the thresholds.

    Parameters
    ----------
    K : (n, n) array
        Lab-frame reaction matrix, real symmetric.
    thresholds : (n,) array [hartree]
        Channel thresholds; the window must lie strictly below all of them.
    window : (E_lo, E_hi) or None
        Energy range searched.  Defaults to effective quantum numbers
        0.55 .. n_max + 0.45 of the lowest threshold (n_max defaults to 10).
    nu_step : float
        Scan resolution in the lowest-threshold effective quantum number;
        roots separated by more than ~2.5 nu_step are guaranteed separated.
    refine_tol : float [hartree]
        Absolute energy tolerance of the root refinement.
    threads : int
        Scan segments are evaluated in a thread pool and reduced in
        deterministic order; results do not depend on thread count.
    stability_check : bool
        Re-scan at half resolution and raise MqdtError if the root count
        changes (root-count instability).
    """
    K = np.asarray(K, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if K.shape != (thresholds.size, thresholds.size):
        raise MqdtError("K and thresholds sizes disagree")
    E_min_thr = float(thresholds.min())
    if n_max is None:
        n_max = 10
    if window is None:
        lo = E_min_thr - 1.0 / (2.0 * 0.55 ** 2)
        hi = E_min_thr - 1.0 / (2.0 * (n_max + 0.45) ** 2)
        window = (lo, hi)
    E_lo, E_hi = window
    if E_hi >= E_min_thr:
        raise MqdtError("window must lie strictly below the lowest threshold")

    def scan(step):
        nu_lo = 1.0 / math.sqrt(2.0 * (E_min_thr - E_lo))
        nu_hi = 1.0 / math.sqrt(2.0 * (E_min_thr - E_hi))
        ngrid = max(8, int(math.ceil((nu_hi - nu_lo) / step)) + 1)
        nus = np.linspace(nu_lo, nu_hi, ngrid)
        Es = E_min_thr - 1.0 / (2.0 * nus ** 2)
        nseg = max(1, min(threads * 4, ngrid // 8))
        bounds = np.linspace(0, ngrid, nseg + 1).astype(int)

        def seg_values(k):
            a, b = bounds[k], bounds[k + 1]
            return [det_function(E, K, thresholds) for E in Es[a:b]]

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                chunks = list(ex.map(seg_values, range(nseg)))
        else:
            chunks = [seg_values(k) for k in range(nseg)]
        vals = np.array([v for ch in chunks for v in ch])
        return Es, vals

    def roots_from(Es, vals):
        roots = []
        sign = np.sign(vals)
        for i in range(len(Es) - 1):
            if sign[i] == 0.0:
                roots.append(Es[i])
            elif sign[i] * sign[i + 1] < 0.0:
                r = brentq(det_function, Es[i], Es[i + 1],
                           args=(K, thresholds), xtol=refine_tol,
                           rtol=8.0 * np.finfo(float).eps)
                roots.append(r)
        # near-degenerate double roots: local |det| minima without a sign
        # change whose two smallest singular values both collapse
        absv = np.abs(vals)
        for i in range(1, len(Es) - 1):
            if (absv[i] < absv[i - 1] and absv[i] < absv[i + 1]
                    and sign[i - 1] * sign[i + 1] > 0.0):
                w, sv = _null_weights(Es[i], K, thresholds)
                scale = np.abs(np.diagonal(
                    _matrix(Es[i], K, thresholds))).max() + 1.0
                if sv[-1] < 1e-9 * scale and sv[-2] < 1e-6 * scale:
                    roots.extend([Es[i], Es[i]])
        return sorted(roots)

    Es, vals = scan(nu_step)
    roots = roots_from(Es, vals)
    if stability_check:
        Es2, vals2 = scan(nu_step / 2.0)
        roots2 = roots_from(Es2, vals2)
        if len(roots2) != len(roots):
            raise MqdtError(
                f"root count unstable under scan refinement: "
                f"{len(roots)} vs {len(roots2)}")

    out = []
    for r in roots:
        w, _sv = _null_weights(r, K, thresholds)
        dom = int(np.argmax(w))
        out.append(LevelRecord(float(r), _nu_vector(r, thresholds), dom, w,
                               dict(block or {})))
    out.sort(key=lambda rec: rec.energy_h)
    return out
