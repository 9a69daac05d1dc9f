"""Rovibrational frame transformation.

Laboratory channels |i> couple an ion rovibrational state (N+, v+) to the
Rydberg electron's orbital momentum l at total angular momentum N.  Their
body-frame expansion ("tilde" functions) attaches the electronic projection
Lambda to each primitive ion component (m2, kappa, g): the rotational factor
becomes R^N_{K m} with K = kappa + Lambda and a coupling coefficient
(-1)^{l - Lambda} <l, -Lambda; N, K | N+, kappa>.

The lab-frame reaction (or defect) matrix is the body-frame surface
sandwiched between tilde functions.  Euler-angle and spin integrals reduce to
Kronecker deltas; the remaining vibrational integral is evaluated

- exactly as unity for the rotational-only path (one shared vibrational
  function per band; constant or Lambda-diagonal surfaces), or
- by hyperradial-DVR x hyperangular quadrature for a full defect surface
  evaluated through the exact coordinate map (the integral is taken in the
  hyperspherical measure the rovibrational states are normalized in).

Lab matrices are real symmetric and block diagonal in
(N, m, nuclear-spin class, core parity); nothing depends on m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .angular import clebsch_gordan
from .geom import GeomConstants, H3_CONSTANTS
from .ionbasis import spin_class_ok, is_half_integral
from .ionsolver import RovibState
from .qdefect import MuSurfaceParams, mu_components_hyper
from .units import cm_to_hartree


# ---------------------------------------------------------------------------
# ion states for the rotational-only path
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RotationalIonState:
    """Ground-vibrational-band rotational level with its symmetry labels."""

    Np: int
    Kp: int
    m2: float
    g_I: int
    two_term: bool
    energy_cm: float
    band: str = "{0,0^0}"

    def components(self):
        if not self.two_term:
            return [(1.0, self.m2, self.Kp, self.g_I)]
        r = 1.0 / math.sqrt(2.0)
        sign = -((-1.0) ** (self.Np + self.Kp))
        return [(r, self.m2, self.Kp, self.g_I),
                (sign * r, -self.m2, -self.Kp, -self.g_I)]

    @property
    def spin_class(self) -> str:
        return "ortho" if self.g_I == 0 else "para"

    @property
    def core_parity(self) -> int:
        return 1 if self.Kp % 2 == 0 else -1


def ground_band_state(Np: int, G: int, energy_cm: float,
                      coriolis_sign: int = 1) -> RotationalIonState:
    """Rotational level of the vibrationless band: G = K+ and the Fourier
    quantum number follows from zero bending angular momentum,
    m2 = -s K+/2."""
    Kp = G
    m2 = -coriolis_sign * Kp / 2.0
    if not is_half_integral(m2):
        m2 = float(round(m2))
    if Kp == 0:
        if Np % 2 == 0:
            raise ValueError(
                f"(N+={Np}, K+=0) vibrationless level is Pauli-forbidden")
        return RotationalIonState(Np, 0, 0.0, 0, False, energy_cm)
    g_I = None
    for g in (-1, 0, 1):
        if spin_class_ok(m2, g, Kp):
            g_I = g
            break
    if g_I is None:
        raise ValueError(f"no spin label matches K+={Kp}, m2={m2}")
    return RotationalIonState(Np, Kp, m2, g_I, True, energy_cm)


@dataclass(frozen=True)
class IonLevelRow:
    Np: int
    G: int
    band: str
    tag: str
    energy_cm: float
    source: str


def load_ion_levels(path):
    """Parse an ion-level table: rows ``N+ G band tag energy_cm source``."""
    rows = []
    with open(path) as fh:
        for ln in fh:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 6:
                raise ValueError(
                    f"ion-level rows need 6 columns, got {len(parts)}: {ln!r}")
            rows.append(IonLevelRow(int(parts[0]), int(parts[1]), parts[2],
                                    parts[3], float(parts[4]), parts[5]))
    if not rows:
        raise ValueError("empty ion-level table")
    return rows


def save_ion_levels(rows, path, header=""):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        fh.write("# N+ G band tag energy_cm source\n")
        for r in rows:
            fh.write(f"{r.Np} {r.G} {r.band} {r.tag} "
                     f"{r.energy_cm:.3f} {r.source}\n")


# ---------------------------------------------------------------------------
# lab channels
# ---------------------------------------------------------------------------

@dataclass
class LabChannel:
    """One laboratory-frame channel |N+, v+>^(N, l, m, Pi+, g_I)."""

    l: int
    N: int
    ion: object                  # RotationalIonState or RovibState
    threshold_h: float
    label: str = ""

    @property
    def Np(self) -> int:
        if isinstance(self.ion, RotationalIonState):
            return self.ion.Np
        return self.ion.block.block.Np

    @property
    def Kp(self) -> int:
        if isinstance(self.ion, RotationalIonState):
            return self.ion.Kp
        return self.ion.labels.get("G", -1)


def tilde_terms(components, l: int, Lam: int, N: int, Np: int):
    """Body-frame expansion terms (coef, m2, kappa, g, K) of one ion
    component list coupled to electronic projection Lambda."""
    out = []
    for coef, m2, kappa, g in components:
        K = kappa + Lam
        if abs(K) > N:
            continue
        cg = clebsch_gordan(l, -Lam, N, K, Np, kappa)
        if cg == 0.0:
            continue
        out.append((coef * (-1.0) ** (l - Lam) * cg, m2, kappa, g, K))
    return out


def build_rot_channels(levels, l: int, N: int, spin_class: str,
                       core_parity: int, Np_max: int = 4,
                       coriolis_sign: int = 1, band: str = "{0,0^0}"):
    """Channels of one (N, spin class, core parity) block from an ingested
    level table, restricted to a vibrationless band (G = K+)."""
    chans = []
    for row in levels:
        if row.band != band or row.Np > Np_max:
            continue
        if not abs(N - l) <= row.Np <= N + l:
            continue
        ion = ground_band_state(row.Np, row.G, row.energy_cm, coriolis_sign)
        if ion.spin_class != spin_class or ion.core_parity != core_parity:
            continue
        # keep only channels with nonvanishing body-frame expansion
        norm = 0.0
        for Lam in range(-l, l + 1):
            for t in tilde_terms(ion.components(), l, Lam, N, ion.Np):
                norm += t[0] ** 2
        if norm < 1e-14:
            continue
        chans.append(LabChannel(
            l, N, ion, cm_to_hartree(row.energy_cm),
            label=f"({row.Np},{row.G})"))
    chans.sort(key=lambda c: (c.threshold_h, c.label))
    return chans


# ---------------------------------------------------------------------------
# constant / Lambda-diagonal surfaces (rotational-only transformation)
# ---------------------------------------------------------------------------

def transform_constant_surface(channels, body: dict) -> np.ndarray:
    """Lab matrix for a shape-independent body-frame matrix.

    ``body`` maps (Lambda, Lambda') to matrix elements; missing pairs are
    zero.  Vibrational overlaps within one band are taken as unity.
    """
    if not channels:
        return np.zeros((0, 0))
    l = channels[0].l
    N = channels[0].N
    tilde = []
    for ch in channels:
        comps = ch.ion.components()
        tilde.append({Lam: tilde_terms(comps, l, Lam, N, ch.Np)
                      for Lam in range(-l, l + 1)})
    n = len(channels)
    lab = np.zeros((n, n))
    for i in range(n):
        for ip in range(i, n):
            val = 0.0
            for (Lam, Lamp), m in body.items():
                if m == 0.0:
                    continue
                for (cA, m2A, _kA, gA, KA) in tilde[i].get(Lam, ()):
                    for (cB, m2B, _kB, gB, KB) in tilde[ip].get(Lamp, ()):
                        if gA == gB and m2A == m2B and KA == KB:
                            val += cA * cB * m
            lab[i, ip] = lab[ip, i] = val
    return lab


def transform_rotational_only(lambdas, k_values, channels) -> np.ndarray:
    """Lab reaction matrix from a Lambda-diagonal body matrix (high-l path)."""
    body = {(lam, lam): float(v) for lam, v in zip(lambdas, k_values)}
    return transform_constant_surface(channels, body)


def identity_body(l: int) -> dict:
    return {(lam, lam): 1.0 for lam in range(-l, l + 1)}


def unitarity_check(channels) -> float:
    """Completeness defect of the retained body-frame set:
    max |transform(identity) - identity|."""
    if not channels:
        return 0.0
    lab = transform_constant_surface(channels, identity_body(channels[0].l))
    return float(np.max(np.abs(lab - np.eye(len(channels)))))


# ---------------------------------------------------------------------------
# full vibrational transformation of a defect surface
# ---------------------------------------------------------------------------

def _tilde_theta_table(state: RovibState, l: int, N: int, node: int):
    """Collapse one rovibrational state at one DVR node into theta-space
    amplitudes keyed by (Lambda, m2, g, K)."""
    block = state.block.block
    A = state.block.A[node]
    avec = A @ state.coeffs[node]
    out: dict = {}
    for a_idx, ch in enumerate(block.channels):
        sl = block._slice(a_idx)
        js = np.asarray(block.jsets[a_idx])
        theta_vals = avec[sl] @ block.spline.B[js]
        for coef, m2, kappa, g in block.components(ch):
            for Lam in range(-l, l + 1):
                K = kappa + Lam
                if abs(K) > N:
                    continue
                cg = clebsch_gordan(l, -Lam, N, K, block.Np, kappa)
                if cg == 0.0:
                    continue
                t = coef * (-1.0) ** (l - Lam) * cg
                key = (Lam, m2, g, K)
                if key in out:
                    out[key] = out[key] + t * theta_vals
                else:
                    out[key] = t * theta_vals
    return out


_MU_COMPONENT = {(0, 0): 0, (1, 1): 1, (-1, -1): 1, (1, -1): 2, (-1, 1): 2}


def transform_mu(params: MuSurfaceParams, channels, n_phi: int = 48,
                 constants: GeomConstants = H3_CONSTANTS) -> np.ndarray:
    """Lab defect matrix of a p-wave surface between rovibrational channels.

    Every channel must reference a :class:`RovibState`; all states must share
    one spline basis and one DVR grid.  The surface components are Fourier
    analyzed in the hyperangle phi at each (R_n, theta) quadrature point, so
    matrix elements connect Fourier quanta differing by multiples of 3 and
    body projections differing by 0 or +-2.
    """
    if not channels:
        return np.zeros((0, 0))
    states = []
    for ch in channels:
        if not isinstance(ch.ion, RovibState):
            raise ValueError("transform_mu needs rovibrational channel states")
        states.append(ch.ion)
    spline = states[0].block.block.spline
    grid = states[0].block.grid
    for st in states:
        if st.block.block.spline is not spline or st.block.grid is not grid:
            raise ValueError("channels must share spline basis and DVR grid")
    l = channels[0].l
    N = channels[0].N
    x = spline.quad_x
    wmeas = spline.quad_w * spline.measure
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi

    n_nodes = grid.Rn.size
    # Fourier tables: harm[c][n] has shape (n_harmonics, n_theta)
    harm = [[None] * n_nodes for _ in range(3)]
    for nd, R in enumerate(grid.Rn):
        comps = mu_components_hyper(R, x[:, None], phis[None, :], params,
                                    constants)
        for c, vals in enumerate(comps):
            vals = np.broadcast_to(vals, (x.size, n_phi))
            harm[c][nd] = (np.fft.rfft(vals, axis=1) / n_phi).real.T

    tables = [[_tilde_theta_table(st, l, N, nd) for nd in range(n_nodes)]
              for st in states]

    nch = len(channels)
    lab = np.zeros((nch, nch))
    for i in range(nch):
        for ip in range(i, nch):
            val = 0.0
            for nd in range(n_nodes):
                ta = tables[i][nd]
                tb = tables[ip][nd]
                for (LamA, m2A, gA, KA), fa in ta.items():
                    for (LamB, m2B, gB, KB), fb in tb.items():
                        if gA != gB or KA != KB:
                            continue
                        cidx = _MU_COMPONENT.get((LamA, LamB))
                        if cidx is None:
                            continue
                        dm = m2B - m2A
                        dmr = round(dm)
                        if abs(dm - dmr) > 1e-9:
                            continue
                        dmr = abs(int(dmr))
                        table = harm[cidx][nd]
                        if dmr >= table.shape[0]:
                            continue
                        # rfft/n is the complex Fourier coefficient of the
                        # (real, even) surface component: no extra factor
                        wline = table[dmr]
                        val += float((fa * fb * wline) @ wmeas)
            lab[i, ip] = lab[ip, i] = val
    return lab


def brute_force_transform_mu(params: MuSurfaceParams, channels,
                             n_phi: int = 48, n_beta: int = 24,
                             n_gamma: int = 32,
                             constants: GeomConstants = H3_CONSTANTS):
    """Direct quadrature of the body-frame surface between tilde functions,
    with the Euler-angle integrals done numerically instead of by
    Clebsch-Gordan algebra.  Oracle for :func:`transform_mu`; restricted to
    integer-m2 blocks (even K+) so a 2pi gamma period suffices.
    """
    from .angular import wigner_d

    if not channels:
        return np.zeros((0, 0))
    states = [ch.ion for ch in channels]
    spline = states[0].block.block.spline
    grid = states[0].block.grid
    l = channels[0].l
    N = channels[0].N
    x = spline.quad_x
    wmeas = spline.quad_w * spline.measure
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = 1.0 / n_phi
    xb, wb = np.polynomial.legendre.leggauss(n_beta)
    betas = np.arccos(xb)
    gammas = 2.0 * math.pi * np.arange(n_gamma) / n_gamma
    wg = 1.0 / n_gamma

    # d-function tables: d[N][K] over beta for fixed lab projection m = 0...
    # matrix elements are m-independent; use m = 0 (valid since N >= 0).
    m_lab = 0
    dtab = {}
    for K in range(-N, N + 1):
        dtab[K] = np.array([wigner_d(N, m_lab, K, b) for b in betas])
    norm = (2.0 * N + 1.0) / 2.0  # beta-gamma part of |R|^2 normalization

    def tilde_values(state, nd):
        """psi(theta_q, phi_k, beta_b, gamma_g) summed over terms, with the
        (2N+1)/8pi^2 rotational normalization folded into `norm`."""
        table = _tilde_theta_table(state, l, N, nd)
        # group by (g): field over (theta, phi, beta, gamma)
        fields = {}
        for (Lam, m2, g, K), f in table.items():
            if abs(m2 - round(m2)) > 1e-9:
                raise ValueError("brute-force oracle needs integer m2 blocks")
            phase = np.exp(1j * m2 * phis)
            rot = dtab[K][:, None] * np.exp(-1j * K * gammas)[None, :]
            contrib = (f[:, None, None, None] * phase[None, :, None, None]
                       * rot[None, None, :, :])
            key = (Lam, g)
            fields[key] = fields.get(key, 0) + contrib
        return fields

    nch = len(channels)
    lab = np.zeros((nch, nch))
    for nd in range(grid.Rn.size):
        R = grid.Rn[nd]
        mu00, mu11, muoff = mu_components_hyper(
            R, x[:, None], phis[None, :], params, constants)
        comp_vals = {0: np.broadcast_to(mu00, (x.size, n_phi)),
                     1: np.broadcast_to(mu11, (x.size, n_phi)),
                     2: np.broadcast_to(muoff, (x.size, n_phi))}
        fields = [tilde_values(st, nd) for st in states]
        wt = (wmeas[:, None, None, None] * wphi
              * wb[None, None, :, None] * wg * norm)
        for i in range(nch):
            for ip in range(nch):
                val = 0.0
                for (LamA, gA), fA in fields[i].items():
                    for (LamB, gB), fB in fields[ip].items():
                        if gA != gB:
                            continue
                        cidx = _MU_COMPONENT.get((LamA, LamB))
                        if cidx is None:
                            continue
                        integrand = (np.conj(fA) * fB
                                     * comp_vals[cidx][:, :, None, None])
                        val += float(np.real(np.sum(integrand * wt)))
                lab[i, ip] += val
    return lab
