"""Long-range multipole reaction matrix for nonpenetrating electrons (l >= 2).

The electron-ion interaction beyond the Coulomb term is modeled by the
leading quadrupole and induced-dipole terms::

    V_eff = -Q2 P2(cos theta') / r^3 - alpha / (2 r^4)
            - (gamma / 3) P2(cos theta') / r^4

(the anisotropic-polarizability sign/normalization is adopted literally in
this form).  First-order body-frame reaction matrix, diagonal in the
electronic projection Lambda::

    K_Lambda = pi * n^3 * [ Q2 <r^-3> + (gamma/3) <r^-4> ] * <P2>_{l Lambda}
             + pi * n^3 * (alpha/2) <r^-4>

where <r^-p> are expectation values over the unit-normalized bound
hydrogenic (n, l) orbital and the n^3 factor converts to the
energy-normalized Coulomb functions of quantum-defect theory (density of
bound states dn/dE = n^3 in atomic units).  ``energy_normalized=False``
drops that factor for diagnostic purposes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.special import eval_genlaguerre, gammaln

from .angular import clebsch_gordan


@dataclass(frozen=True)
class MultipoleParams:
    """Quadrupole moment and polarizabilities of the ion core [a.u.]."""

    Q2: float
    alpha_iso: float
    gamma_aniso: float

    def __post_init__(self):
        if not self.alpha_iso > 0.0:
            raise ValueError("isotropic polarizability must be positive")


def load_multipole(path) -> MultipoleParams:
    vals = {}
    with open(path) as fh:
        for ln in fh:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            k, _, v = s.partition("=")
            vals[k.strip()] = float(v)
    try:
        return MultipoleParams(vals["Q2"], vals["alpha"], vals["gamma"])
    except KeyError as exc:
        raise ValueError(f"multipole file missing key {exc}") from exc


def hydrogenic_radial(n: int, l: int, r: np.ndarray) -> np.ndarray:
    """Unit-normalized bound radial function R_nl(r), Z = 1."""
    if not 0 <= l < n:
        raise ValueError("need n > l >= 0")
    r = np.asarray(r, dtype=float)
    x = 2.0 * r / n
    lognorm = 0.5 * (math.log(2.0 / n) * 3
                     + gammaln(n - l) - math.log(2.0 * n)
                     - gammaln(n + l + 1))
    lag = eval_genlaguerre(n - l - 1, 2 * l + 1, x)
    with np.errstate(divide="ignore"):
        logx = np.where(x > 0.0, np.log(x), -np.inf)
    mag = np.exp(lognorm + l * logx - x / 2.0)
    return mag * lag


def _loggrid(rmin: float, rmax: float, npts: int) -> np.ndarray:
    return np.exp(np.linspace(math.log(rmin), math.log(rmax), npts))


@lru_cache(maxsize=4096)
def hydrogenic_moment(n: int, l: int, power: int,
                      rmin: float = 1e-4, rmax: float = 400.0,
                      npts: int = 4000) -> float:
    """<r^power> for the bound (n, l) state by log-grid quadrature.

    Only the negative moments of the nonpenetrating model are supported
    (power -3 or -4), and l >= 1 is required for finiteness of the
    integrand at the origin.  Convergence is verified against a
    half-resolution grid; failure raises RuntimeError.
    """
    if power not in (-3, -4):
        raise ValueError("supported moments: r^-3 and r^-4")
    if l < 1:
        raise ValueError("nonpenetrating model requires l >= 1")
    if not l < n:
        raise ValueError("need n > l")

    def compute(npoints):
        r = _loggrid(rmin, rmax, npoints)
        R = hydrogenic_radial(n, l, r)
        integrand = R * R * r ** (power + 2) * r  # extra r: log-grid measure
        return float(simpson(integrand, x=np.log(r)))

    full = compute(npts)
    half = compute(npts // 2)
    if abs(full - half) > 1e-9 * max(abs(full), 1e-300):
        raise RuntimeError(
            f"<r^{power}> quadrature not converged for (n,l)=({n},{l}): "
            f"{full} vs {half}")
    return full


def p2_angular(l: int, Lam: int, Lamp: int) -> float:
    """<Y_{l Lam} | P2(cos theta) | Y_{l Lam'}>; diagonal in Lambda."""
    if abs(Lam) > l or abs(Lamp) > l:
        raise ValueError("|Lambda| must not exceed l")
    if Lam != Lamp:
        return 0.0
    return (clebsch_gordan(l, 0, 2, 0, l, 0)
            * clebsch_gordan(l, Lam, 2, 0, l, Lam))


DEFAULT_LAMBDAS_BY_L = {2: (0, 1, -1, 2, -2)}


def lambda_list(l: int):
    return tuple(v for k in range(0, l + 1)
                 for v in ((0,) if k == 0 else (k, -k)))


def k_body_longrange(n: int, l: int, params: MultipoleParams,
                     energy_normalized: bool = True,
                     allow_l1: bool = False,
                     warn_threshold: float = 0.3):
    """Diagonal body-frame reaction matrix over Lambda for one (n, l).

    Returns (lambdas, K) with K[i] the reaction-matrix element for
    projection lambdas[i].  Warns when any |K| exceeds ``warn_threshold``
    (perturbative regime violated).  l = 1 is refused by default (core
    penetration invalidates the model).
    """
    if l < 2 and not allow_l1:
        raise ValueError(
            "long-range model is valid for l >= 2 (allow_l1 to override)")
    if l < 1:
        raise ValueError("l must be >= 1")
    m3 = hydrogenic_moment(n, l, -3)
    m4 = hydrogenic_moment(n, l, -4)
    scale = float(n) ** 3 if energy_normalized else 1.0
    lams = lambda_list(l)
    K = np.empty(len(lams))
    for i, lam in enumerate(lams):
        p2 = p2_angular(l, lam, lam)
        K[i] = math.pi * scale * (
            params.Q2 * m3 * p2
            + 0.5 * params.alpha_iso * m4
            + params.gamma_aniso / 3.0 * m4 * p2)
    if np.max(np.abs(K)) > warn_threshold:
        warnings.warn(
            f"long-range K reaches {np.max(np.abs(K)):.3f}; "
            "first-order treatment is unreliable", stacklevel=2)
    return lams, K
