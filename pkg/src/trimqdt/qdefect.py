"""Body-frame p-wave quantum-defect surface with linear Jahn-Teller coupling.

The 3x3 defect matrix over electronic body projections Lambda = (0, +1, -1)
is block diagonal: the 0 component decouples, the (+1, -1) block carries the
Jahn-Teller structure.  Diagonal entries are cubic polynomials in the
breathing coordinate Q1 plus a rho^2 term; the off-diagonal coupling is
linear in the distortion amplitude, mu_{1,-1} = mu_{-1,1} = lambda_jt * rho,
real in the standard body frame used here.  A frame rotated azimuthally by
phi_p/2 multiplies each element by exp(i(Lambda - Lambda') phi_p / 2)
(:func:`phase_rotate`); spectra are invariant under the switch.

Taylor coefficients are not bundled as physical truth: the shipped default
is an equilibrium-only parameter set (all derivatives zero).  A least-squares
fitter for effective-quantum-number samples is provided instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import geom

LAMBDA_ORDER = (0, 1, -1)

_PARAM_KEYS = ("mu00_eq", "shift00", "mu11_eq", "shift11",
               "a1", "a2", "a3", "a4", "b1", "b2", "b3",
               "delta", "lambda_jt")


class QdefectPoleError(Exception):
    """An eigen-defect sits (numerically) on a half-integer: tan pole."""


@dataclass(frozen=True)
class MuSurfaceParams:
    mu00_eq: float = 0.0683
    shift00: float = 0.0043
    mu11_eq: float = 0.4069
    shift11: float = 0.0021
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0
    delta: float = 0.0
    lambda_jt: float = 0.0

    def mu00(self, Q1, rho):
        return (self.mu00_eq + self.shift00 + self.a1 * Q1
                + self.a2 * Q1 ** 2 + self.a3 * Q1 ** 3
                + self.a4 * rho ** 2)

    def mu11(self, Q1, rho):
        return (self.mu11_eq + self.shift11 + self.b1 * Q1
                + self.b2 * Q1 ** 2 + self.b3 * Q1 ** 3
                + self.delta * rho ** 2)

    def mu_offdiag(self, rho):
        return self.lambda_jt * rho


def load_params(path) -> MuSurfaceParams:
    """Read a ``key = value`` parameter file; every key is mandatory."""
    values = {}
    with open(path) as fh:
        for ln in fh:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ValueError(f"malformed line in defect file: {ln!r}")
            k, _, v = s.partition("=")
            values[k.strip()] = float(v)
    missing = [k for k in _PARAM_KEYS if k not in values]
    if missing:
        raise ValueError(f"defect parameter file missing keys: {missing}")
    extra = [k for k in values if k not in _PARAM_KEYS]
    if extra:
        raise ValueError(f"unknown keys in defect file: {extra}")
    return MuSurfaceParams(**values)


def save_params(params: MuSurfaceParams, path, header=""):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for k, v in asdict(params).items():
            fh.write(f"{k} = {v!r}\n")


def mu_body(q: geom.SymCoords, p: MuSurfaceParams) -> np.ndarray:
    """3x3 real symmetric defect matrix at a shape point, Lambda order
    (0, +1, -1)."""
    m = np.zeros((3, 3))
    m[0, 0] = p.mu00(q.Q1, q.rho)
    m[1, 1] = m[2, 2] = p.mu11(q.Q1, q.rho)
    m[1, 2] = m[2, 1] = p.mu_offdiag(q.rho)
    return m


def mu_components_hyper(R, theta, phi, p: MuSurfaceParams,
                        c: geom.GeomConstants = geom.H3_CONSTANTS):
    """Vectorized (mu00, mu11, mu_offdiag) over hyperspherical arrays,
    using the exact coordinate chain."""
    Q1, _, _, rho, _ = geom.sym_coords_arrays(R, theta, phi, c)
    return p.mu00(Q1, rho), p.mu11(Q1, rho), p.mu_offdiag(rho)


def eigen_defects(mu: np.ndarray) -> np.ndarray:
    """Eigenvalues of a defect matrix (ascending)."""
    return np.linalg.eigvalsh(mu)


def effective_nu(n: int, mu: np.ndarray):
    """Effective-quantum-number pair n - [mu11 +- |mu_offdiag|] from the
    (+1, -1) block."""
    if n < 2:
        raise ValueError("principal quantum number must be >= 2")
    mu11 = mu[1, 1]
    off = abs(mu[1, 2])
    return (n - (mu11 + off), n - (mu11 - off))


def k_from_mu(mu: np.ndarray, pole_tol: float = 1e-8) -> np.ndarray:
    """Reaction matrix with the same eigenvectors and eigenvalues
    tan(pi * eigen-defect).  Flags half-integer eigen-defects (poles)."""
    mu = np.asarray(mu, dtype=float)
    w, v = np.linalg.eigh(0.5 * (mu + mu.T))
    frac = np.abs((w - 0.5) % 1.0 - 0.5)  # distance to nearest integer
    dist_half = np.abs(frac - 0.5)
    if np.any(dist_half < pole_tol):
        raise QdefectPoleError(
            f"eigen-defect within {pole_tol} of a half-integer: {w}")
    return (v * np.tan(math.pi * w)) @ v.T


def mu_from_k(K: np.ndarray, branch: int = 0) -> np.ndarray:
    """Inverse spectral map: defects arctan(K-eigenvalues)/pi + branch."""
    K = np.asarray(K, dtype=float)
    w, v = np.linalg.eigh(0.5 * (K + K.T))
    mu_e = np.arctan(w) / math.pi + branch
    return (v * mu_e) @ v.T


def phase_rotate(m: np.ndarray, phi_p: float) -> np.ndarray:
    """Azimuthal body-frame rotation by phi_p/2:
    element (Lambda, Lambda') acquires exp(i (Lambda - Lambda') phi_p / 2)."""
    lam = np.array(LAMBDA_ORDER, dtype=float)
    ph = np.exp(1j * np.subtract.outer(lam, lam) * phi_p / 2.0)
    return np.asarray(m, dtype=complex) * ph


def fit_defect_surface(samples: np.ndarray, n: int,
                       base: MuSurfaceParams | None = None):
    """Least-squares fit of the surface coefficients to effective-quantum-
    number samples.

    ``samples`` has rows (Q1, rho, phi, nu1, nu2) or, with a sixth
    column nu0, also constrains the Lambda=0 polynomial.  nu1/nu2 are the
    lower/upper members of n - [mu11 +- |lambda| rho].  Returns
    (params, rms_residual).  The sign of lambda_jt is not observable from
    nu pairs; the fitted value is reported non-negative.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] not in (5, 6):
        raise ValueError("sample rows must have 5 or 6 columns")
    base = base or MuSurfaceParams()
    Q1 = samples[:, 0]
    rho = samples[:, 1]
    nu1 = samples[:, 3]
    nu2 = samples[:, 4]
    # mean constrains mu11(Q): n - (nu1+nu2)/2 = mu11_eq+shift11 + poly
    y_mean = n - 0.5 * (nu1 + nu2) - (base.mu11_eq + base.shift11)
    X = np.column_stack([Q1, Q1 ** 2, Q1 ** 3, rho ** 2])
    coef_m, *_ = np.linalg.lstsq(X, y_mean, rcond=None)
    # splitting constrains |lambda| rho: (nu2 - nu1)/2 = |lambda| rho
    y_split = 0.5 * np.abs(nu2 - nu1)
    denom = float(rho @ rho)
    lam = float(rho @ y_split) / denom if denom > 0.0 else 0.0
    params = replace(base, b1=float(coef_m[0]), b2=float(coef_m[1]),
                     b3=float(coef_m[2]), delta=float(coef_m[3]),
                     lambda_jt=lam)
    if samples.shape[1] == 6:
        nu0 = samples[:, 5]
        y0 = n - nu0 - (base.mu00_eq + base.shift00)
        coef_0, *_ = np.linalg.lstsq(X, y0, rcond=None)
        params = replace(params, a1=float(coef_0[0]), a2=float(coef_0[1]),
                         a3=float(coef_0[2]), a4=float(coef_0[3]))
    # rms of the reproduced nus
    pred1, pred2 = [], []
    for q1, rh in zip(Q1, rho):
        m = mu_body(geom.SymCoords.from_polar(q1, rh, 0.0), params)
        lo, hi = effective_nu(n, m)
        pred1.append(lo)
        pred2.append(hi)
    res = np.concatenate([np.asarray(pred1) - nu1, np.asarray(pred2) - nu2])
    if samples.shape[1] == 6:
        pred0 = [n - params.mu00(q1, rh) for q1, rh in zip(Q1, rho)]
        res = np.concatenate([res, np.asarray(pred0) - samples[:, 5]])
    rms = float(np.sqrt(np.mean(res ** 2)))
    return params, rms


def load_samples(path) -> np.ndarray:
    """Sample table for the fitter: whitespace rows
    ``Q1 rho phi nu1 nu2 [nu0]``."""
    rows = []
    ncol = None
    with open(path) as fh:
        for ln in fh:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            parts = [float(x) for x in s.split()]
            if ncol is None:
                ncol = len(parts)
                if ncol not in (5, 6):
                    raise ValueError("sample rows must have 5 or 6 columns")
            elif len(parts) != ncol:
                raise ValueError("inconsistent column count in sample table")
            rows.append(parts)
    if not rows:
        raise ValueError("empty sample table")
    return np.array(rows)
