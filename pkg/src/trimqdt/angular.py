"""Angular-momentum algebra: Clebsch-Gordan coefficients, Wigner rotation
functions, normalized rotational harmonics, and the Wigner-function product
expansion used by the frame transformation.

Conventions follow Varshalovich: D^j_{mk}(alpha, beta, gamma) =
exp(-i m alpha) d^j_{mk}(beta) exp(-i k gamma) for an active z-y-z rotation,
and real Clebsch-Gordan coefficients.

Half-integer momenta are accepted as floats with exact halves.  Clebsch-Gordan
values are evaluated from the Racah closed form in exact rational arithmetic
(one floating square root at the end), accurate to ~1e-15 relative for j <= 20.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


def _two(x) -> int:
    """Doubled integer representation of a (half-)integer quantum number."""
    t = round(2.0 * float(x))
    if abs(2.0 * float(x) - t) > 1e-9:
        raise ValueError(f"quantum number {x} is not (half-)integral")
    return int(t)


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


@lru_cache(maxsize=500000)
def _cg_doubled(j1, m1, j2, m2, J, M) -> float:
    # All arguments are doubled integers.
    if m1 + m2 != M:
        return 0.0
    if not (abs(j1 - j2) <= J <= j1 + j2):
        return 0.0
    if (j1 + j2 + J) % 2 != 0:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if (j1 + m1) % 2 != 0 or (j2 + m2) % 2 != 0 or (J + M) % 2 != 0:
        return 0.0

    def f(twice: int) -> int:
        assert twice % 2 == 0
        return _fact(twice // 2)

    pre = Fraction(
        (J + 1)
        * f(j1 + j2 - J) * f(j1 - j2 + J) * f(-j1 + j2 + J),
        f(j1 + j2 + J + 2),
    ) * Fraction(
        f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1)
        * f(j2 - m2) * f(j2 + m2),
        1,
    )
    kmin = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    kmax = min((j1 + j2 - J) // 2, (j1 - m1) // 2, (j2 + m2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k)
            * f(j1 + j2 - J - 2 * k)
            * f(j1 - m1 - 2 * k)
            * f(j2 + m2 - 2 * k)
            * f(J - j2 + m1 + 2 * k)
            * f(J - j1 - m2 + 2 * k)
        )
        total += Fraction(-1 if k % 2 else 1, den)
    if total == 0:
        return 0.0
    value2 = pre * total * total
    return math.copysign(math.sqrt(float(value2)), float(total))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Real Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Invalid couplings (triangle rule, projection mismatch) return 0.
    """
    return _cg_doubled(_two(j1), _two(m1), _two(j2), _two(m2),
                       _two(J), _two(M))


@lru_cache(maxsize=200000)
def _wigner_d_doubled(j2, m2, k2, beta: float) -> float:
    if abs(m2) > j2 or abs(k2) > j2 or (j2 + m2) % 2 or (j2 + k2) % 2:
        return 0.0
    jm = (j2 + m2) // 2   # j + m
    jmm = (j2 - m2) // 2  # j - m
    jk = (j2 + k2) // 2   # j + k
    jkm = (j2 - k2) // 2  # j - k
    km = (k2 - m2) // 2   # k - m
    pre = math.sqrt(_fact(jm) * _fact(jmm) * _fact(jk) * _fact(jkm))
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    tmin = max(0, -km)
    tmax = min(jm, jkm)
    total = 0.0
    for t in range(tmin, tmax + 1):
        den = _fact(jm - t) * _fact(jkm - t) * _fact(t) * _fact(t + km)
        total += ((-1.0) ** t
                  * c ** (jm + jkm - 2 * t)
                  * s ** (2 * t + km)) / den
    return pre * total


def wigner_d(j, m, k, beta: float) -> float:
    """Reduced rotation matrix d^j_{mk}(beta), Varshalovich phase."""
    return _wigner_d_doubled(_two(j), _two(m), _two(k), float(beta))


def wigner_D(j, m, k, alpha: float, beta: float, gamma: float) -> complex:
    """Wigner rotation function D^j_{mk}(alpha, beta, gamma)."""
    return (np.exp(-1j * float(m) * alpha)
            * wigner_d(j, m, k, beta)
            * np.exp(-1j * float(k) * gamma))


def rot_harmonic(N, K, m, euler) -> complex:
    """Normalized rotational harmonic sqrt((2N+1)/8pi^2) [D^N_{mK}]^*.

    ``K`` is the body-frame projection, ``m`` the laboratory projection.
    """
    alpha, beta, gamma = euler
    norm = math.sqrt((2.0 * float(N) + 1.0) / (8.0 * math.pi ** 2))
    return norm * np.conj(wigner_D(N, m, K, alpha, beta, gamma))


def product_expand(Np, mp, Kp, l, lam, Lam):
    """Expansion of D^{Np}_{mp Kp} D^{l}_{lam Lam} over total-N Wigner
    functions.

    Returns a list of tuples (N, c_body, c_lab) with
    c_body = <Np Kp; l Lam | N, Kp+Lam> and c_lab = <Np mp; l lam | N, mp+lam>,
    so that D^{Np}_{mp Kp} D^l_{lam Lam} = sum_N c_body c_lab D^N_{mK}.
    """
    K = Kp + Lam
    m = mp + lam
    out = []
    Nmin = abs(_two(Np) - _two(l)) / 2.0
    Nmax = (_two(Np) + _two(l)) / 2.0
    N = Nmin
    while N <= Nmax + 1e-9:
        cK = clebsch_gordan(Np, Kp, l, Lam, N, K)
        cm = clebsch_gordan(Np, mp, l, lam, N, m)
        if cK != 0.0 or cm != 0.0:
            out.append((N if N % 1.0 else int(N), cK, cm))
        N += 1.0
    return out


def euler_rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Active z-y-z rotation matrix consistent with :func:`wigner_D`."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rz1 = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz2 = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz1 @ ry @ rz2
