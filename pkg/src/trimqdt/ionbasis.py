"""Symmetry-adapted rovibrational basis for three identical spin-1/2 nuclei.

A trial basis element is a product
``u_j(theta) * exp(i m2 phi) * R^{N+}_{K+ m+}(Euler) * Phi^I_{g_I}``
of a fifth-order B-spline in the bending hyperangle, a Fourier factor in the
pseudorotation-like hyperangle, a normalized rotational harmonic, and an
abstract nuclear-spin function carrying only its transformation phases.

Fermionic exchange symmetry restricts the quantum numbers:

- continuity of the double-valued (phi, gamma) parametrization requires
  K+/2 + m2 to be integral (K+ even <-> m2 integral, K+ odd <-> m2
  half-integral), and fixes the parity Pi+ = +1 (K+ even) / -1 (K+ odd);
- the antisymmetrizer annihilates the trial function unless
  m2 + g_I = 3n (K+ even) or 3n + 3/2 (K+ odd), n integer;
- surviving functions are two-term combinations
  (1/sqrt2)[T(m2,K+,g) - (-1)^{N+ + K+} T(-m2,-K+,-g)], except for
  (m2, K+, g_I) = (0, 0, 0) which is a bare one-term function for odd N+
  and vanishes identically for even N+.

Permutation phases of the factors are tabulated in ``PERMUTATION_TABLE``.
Phase factors attached to the Fourier and spin factors multiply m2 and g_I
respectively; the transposition (31) carries no extra phase (its tabulated
offset contributes e^{2 pi i g} = 1 and a literal unit factor on the Fourier
part), which is the unique choice closing the permutation group on the
continuity-allowed label set -- verified by :func:`verify_group_closure`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline


def is_half_integral(x: float) -> bool:
    return abs(2.0 * x - round(2.0 * x)) < 1e-9 and round(2.0 * x) % 2 != 0


def spin_class_ok(m2: float, g_I: int, Kp: int) -> bool:
    """Exchange-symmetry selection rule on (m2, g_I) for given K+ parity."""
    s = m2 + g_I
    if Kp % 2 == 0:
        return abs(s / 3.0 - round(s / 3.0)) < 1e-9
    return abs((s - 1.5) / 3.0 - round((s - 1.5) / 3.0)) < 1e-9


@dataclass(frozen=True)
class SymBasisFunction:
    """One symmetry-adapted basis function (canonical representative)."""

    j: int          # spline index
    m2: float       # integral or half-integral
    Kp: int         # body projection of N+, >= 0 for canonical forms
    Np: int
    mp: int
    g_I: int        # -1, 0, +1
    two_term: bool  # False only for the bare (0, 0, 0) odd-N+ form

    def __post_init__(self):
        if abs(self.mp) > self.Np:
            raise ValueError("|m+| must not exceed N+")
        if (self.Kp % 2 == 0) != (not is_half_integral(self.m2)):
            raise ValueError(
                f"continuity violated: K+={self.Kp}, m2={self.m2}")
        if not spin_class_ok(self.m2, self.g_I, self.Kp):
            raise ValueError(
                f"selection rule violated: m2={self.m2}, g_I={self.g_I}, "
                f"K+={self.Kp}")

    @property
    def Pi(self) -> int:
        return 1 if self.Kp % 2 == 0 else -1

    def ell_eff(self, coriolis_sign: int = 1) -> int:
        """Centrifugal quantum of the 2D bending motion near theta = 0."""
        ell = abs(self.m2 + coriolis_sign * self.Kp / 2.0)
        return int(round(ell))

    def components(self):
        """Primitive (coef, m2, kappa, g) terms; kappa is the signed body
        projection."""
        if not self.two_term:
            return [(1.0, self.m2, self.Kp, self.g_I)]
        r = 1.0 / math.sqrt(2.0)
        sign = -((-1.0) ** (self.Np + self.Kp))
        return [(r, self.m2, self.Kp, self.g_I),
                (sign * r, -self.m2, -self.Kp, -self.g_I)]


# Permutation phase table.  Row layout per operation:
#   (odd, m2_offset, rot_sign_exponents, g_offset)
# odd:   True when labels flip (m2, kappa, g) -> -(m2, kappa, g)
# phase: exp(i*m2_offset*m2) * (-1)^{sum of chosen exponents} *
#        exp(i*g_offset*g);  exponents drawn from {"N": N+, "K": K+}.
PERMUTATION_TABLE = {
    "P12":    (True,  4.0 * math.pi / 3.0, ("N", "K"), 4.0 * math.pi / 3.0),
    "P23":    (True,  2.0 * math.pi / 3.0, ("N",),     2.0 * math.pi / 3.0),
    "P31":    (True,  0.0,                 ("N", "K"), 2.0 * math.pi),
    "P12P31": (False, 2.0 * math.pi / 3.0, ("K",),     2.0 * math.pi / 3.0),
    "P12P23": (False, 4.0 * math.pi / 3.0, (),         4.0 * math.pi / 3.0),
}

ODD_OPS = ("P12", "P23", "P31")
CYCLIC_OPS = ("P12P31", "P12P23")


@dataclass(frozen=True)
class PhasedTerm:
    """A primitive term times a complex phase, as produced by permutations."""

    phase: complex
    m2: float
    kappa: int
    g: int


def permute_term(op: str, m2: float, kappa: int, g: int, Np: int) -> PhasedTerm:
    """Apply a permutation to a primitive term e^{i m2 phi} R^{Np}_{kappa m+}
    Phi_g."""
    odd, m2_off, rot_exps, g_off = PERMUTATION_TABLE[op]
    sign = 1.0
    for e in rot_exps:
        sign *= (-1.0) ** (Np if e == "N" else kappa)
    phase = (cmath.exp(1j * m2_off * m2) * sign * cmath.exp(1j * g_off * g))
    if odd:
        return PhasedTerm(phase, -m2, -kappa, -g)
    return PhasedTerm(phase, m2, kappa, g)


def apply_permutation(op: str, b: SymBasisFunction):
    """Permutation image of a basis function, as a list of PhasedTerms.

    For a symmetry-adapted function the result is (+/-1) times the original
    term list: -1 for transpositions, +1 for cyclic permutations.
    """
    if op not in PERMUTATION_TABLE:
        raise ValueError(f"unknown permutation {op!r}")
    out = []
    for coef, m2, kappa, g in b.components():
        t = permute_term(op, m2, kappa, g, b.Np)
        out.append(PhasedTerm(coef * t.phase, t.m2, t.kappa, t.g))
    return out


def permutation_eigenvalue(op: str, b: SymBasisFunction) -> complex:
    """Eigenvalue of a permutation on ``b``; raises if ``b`` is not an
    eigenfunction (it always is, for properly adapted functions)."""
    image = apply_permutation(op, b)
    ref = {(m2, kap, g): coef for coef, m2, kap, g in b.components()}
    vals = []
    for t in image:
        key = (t.m2, t.kappa, t.g)
        if key not in ref:
            raise ValueError(f"{op} maps {b} outside its own term set")
        vals.append(t.phase / ref[key])
    if abs(vals[0] - vals[-1]) > 1e-12:
        raise ValueError(f"{op} does not act as a scalar on {b}")
    return vals[0]


class Zero:
    """Sentinel: the antisymmetrizer annihilated the trial function."""

    def __repr__(self):
        return "Zero()"


def antisymmetrize(j: int, m2: float, Kp: int, Np: int, mp: int, g_I: int):
    """Project a trial product function onto the fermionic representation.

    Returns a canonical :class:`SymBasisFunction`, or :class:`Zero` when the
    projection vanishes.  Raises ValueError when K+/2 + m2 is not integral
    (the trial function violates the coordinate continuity condition).
    """
    if abs(Kp / 2.0 + m2 - round(Kp / 2.0 + m2)) > 1e-9:
        raise ValueError(
            f"K+/2 + m2 = {Kp / 2.0 + m2} must be integral")
    if not spin_class_ok(m2, g_I, Kp):
        return Zero()
    if m2 == 0.0 and Kp == 0 and g_I == 0:
        if Np % 2 == 0:
            return Zero()
        return SymBasisFunction(j, 0.0, 0, Np, mp, 0, two_term=False)
    # canonical representative of the (m2, K+, g) <-> (-m2, -K+, -g) pair
    if Kp < 0 or (Kp == 0 and (g_I < 0 or (g_I == 0 and m2 < 0))):
        m2, Kp, g_I = -m2, -Kp, -g_I
    return SymBasisFunction(j, m2, Kp, Np, mp, g_I, two_term=True)


def allowed_m2(Kp: int, g_I: int, m2_max: float):
    """All m2 with |m2| <= m2_max satisfying the selection rules for
    (K+, g_I)."""
    out = []
    if Kp % 2 == 0:
        base = -g_I  # m2 = 3n - g_I
        step = 3.0
        start = base % 3.0
    else:
        start = (1.5 - g_I) % 3.0
        step = 3.0
    m = start
    while m > -m2_max - 1e-9:
        m -= step
    m += step
    while m <= m2_max + 1e-9:
        out.append(m if is_half_integral(m) else float(round(m)))
        m += step
    return out


def enumerate_basis(Np: int, mp: int, g_I: int, Pi: int, m2_max: float,
                    spline: "SplineBasis"):
    """Complete list of canonical basis functions for one symmetry block.

    The block is labeled by (N+, m+, g_I, Pi+).  For K+ = 0 only canonical
    representatives are emitted: positive g_I, or for g_I = 0 positive m2,
    or the bare (0,0,0) one-term form when N+ is odd.  The Pauli-forbidden
    combination (m2=0, K+=0, g_I=0, N+ even) is excluded.
    """
    out = []
    Kp_start = 0 if Pi == 1 else 1
    for Kp in range(Kp_start, Np + 1, 2):
        for m2 in allowed_m2(Kp, g_I, m2_max):
            if Kp == 0:
                if g_I < 0:
                    continue
                if g_I == 0 and m2 < 0:
                    continue
                if g_I == 0 and m2 == 0:
                    if Np % 2 == 0:
                        continue  # Pauli-forbidden
                    for j in range(spline.count):
                        out.append(SymBasisFunction(j, 0.0, 0, Np, mp, 0,
                                                    two_term=False))
                    continue
            for j in range(spline.count):
                out.append(SymBasisFunction(j, m2, Kp, Np, mp, g_I,
                                            two_term=True))
    return out


def verify_group_closure(Np: int, label_set) -> float:
    """Check that composing tabulated transpositions reproduces the tabulated
    cyclic rows on a set of primitive labels (m2, kappa, g).

    Returns the maximum phase deviation; 0 means the table is consistent.
    """
    worst = 0.0
    for (m2, kappa, g) in label_set:
        # (12)(31) applied right-to-left equals the tabulated P12P31 row
        for first, second, combo in (("P31", "P12", "P12P31"),
                                     ("P23", "P12", "P12P23")):
            t1 = permute_term(first, m2, kappa, g, Np)
            t2 = permute_term(second, t1.m2, t1.kappa, t1.g, Np)
            tc = permute_term(combo, m2, kappa, g, Np)
            if (t2.m2, t2.kappa, t2.g) != (tc.m2, tc.kappa, tc.g):
                return math.inf
            worst = max(worst, abs(t1.phase * t2.phase - tc.phase))
        # transpositions are involutions
        t1 = permute_term("P12", m2, kappa, g, Np)
        t2 = permute_term("P12", t1.m2, t1.kappa, t1.g, Np)
        worst = max(worst, abs(t1.phase * t2.phase - 1.0))
    return worst


class SplineBasis:
    """Fifth-order (quartic-degree) B-splines on [0, pi/2] with per-interval
    Gauss-Legendre quadrature.

    Uniform clamped knots; ``count`` basis functions.  Basis values and first
    derivatives are tabulated once at the quadrature nodes.  Index sets with
    the first function removed impose u(0) = 0 for components whose effective
    bending angular momentum is nonzero.
    """

    def __init__(self, count: int = 60, degree: int = 4,
                 theta_max: float = math.pi / 2.0, quad_points: int = 10):
        if count <= degree + 1:
            raise ValueError("spline count too small for the degree")
        self.count = count
        self.degree = degree
        self.theta_max = theta_max
        nseg = count - degree
        self.breakpoints = np.linspace(0.0, theta_max, nseg + 1)
        self.knots = np.concatenate([
            np.zeros(degree), self.breakpoints, np.full(degree, theta_max)])
        xg, wg = np.polynomial.legendre.leggauss(quad_points)
        xs, ws = [], []
        for a, b in zip(self.breakpoints[:-1], self.breakpoints[1:]):
            xs.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
            ws.append(0.5 * (b - a) * wg)
        self.quad_x = np.concatenate(xs)
        self.quad_w = np.concatenate(ws)
        nq = self.quad_x.size
        self.B = np.empty((count, nq))
        self.dB = np.empty((count, nq))
        for j in range(count):
            c = np.zeros(count)
            c[j] = 1.0
            sp = BSpline(self.knots, c, degree)
            self.B[j] = sp(self.quad_x)
            self.dB[j] = sp.derivative()(self.quad_x)

    @cached_property
    def measure(self) -> np.ndarray:
        """Hyperangular volume weight sin(2 theta) at the quadrature nodes."""
        return np.sin(2.0 * self.quad_x)

    def indices(self, clamp_left: bool) -> tuple:
        js = range(1, self.count) if clamp_left else range(self.count)
        return tuple(js)

    def integral(self, weight, ja, jb, deriv: bool = False) -> np.ndarray:
        """Matrix of integrals of weight(theta) between basis (or derivative)
        functions with indices ``ja`` (rows) and ``jb`` (columns)."""
        tab = self.dB if deriv else self.B
        Ba = tab[np.asarray(ja)]
        Bb = tab[np.asarray(jb)]
        return (Ba * (self.quad_w * weight)) @ Bb.T

    def gram(self, ja) -> np.ndarray:
        return self.integral(self.measure, ja, ja)

    def evaluate(self, coeffs_by_index, theta):
        """Evaluate sum_j c_j u_j(theta) for a {j: c} mapping."""
        c = np.zeros(self.count)
        for j, v in coeffs_by_index.items():
            c[j] = v
        return BSpline(self.knots, c, self.degree)(theta)
