"""Rovibrational spectrum of the three-fermion ion.

The six-dimensional problem is split into a fixed-hyperradius ("adiabatic")
eigenproblem over the internal angles and Euler angles, and a hyperradial
problem on a Gauss-Lobatto discrete variable representation (DVR).  The two
are recoupled without derivative couplings through channel-overlap matrices
between neighboring DVR nodes (slow variable discretization).

Scaled hyperangular operator.  With the basis of :mod:`trimqdt.ionbasis`
and the volume weight sin(2 theta), the grand-angular operator times
2 mu R^2 acts on a primitive component (m2, kappa) as::

    4 d/. u' v' sin(2t)                                  (bending kinetic)
    + 4 (m2 + s*kappa*cos t / 2)^2 / sin^2 t             (Coriolis-coupled)
    + 2 [N+(N+ + 1) - kappa^2] / cos^2 t + kappa^2       (rotational, diag)
    + sin t / cos^2 t * <kappa'|J+^2 + J-^2|kappa>       (rotational, dK=+-2)

where s is the Coriolis sign convention switch.  The spectra are provably
independent of s (mirror symmetry m2 -> -m2, g -> -g); only spectroscopic
labels change meaning.  Free-space eigenvalues reproduce the exact grand
angular spectrum lambda(lambda+4), which is the primary correctness oracle.

Boundary handling: components with nonzero effective bending angular
momentum drop the first spline (u(0) = 0).  No constraint is imposed at the
collinear end; the 1/cos^2 singularities of the rotational terms cancel
pointwise at the shared quadrature nodes on the physical subspace (null
space of J_x^2), so diagonal and off-diagonal singular terms must be
assembled with the same quadrature -- which this module does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import eval_legendre, roots_jacobi

from .geom import GeomConstants, H3_CONSTANTS
from .ionbasis import SplineBasis, SymBasisFunction, enumerate_basis
from .pes import PotentialSurface
from .units import HARTREE_TO_INVCM


def ladder_squared(N: int, k_from: int, k_to: int) -> float:
    """<k_to | J+^2 + J-^2 | k_from> for body-frame projections."""
    if abs(k_to) > N or abs(k_from) > N:
        return 0.0
    if k_to == k_from - 2:
        return math.sqrt(N * (N + 1) - k_from * (k_from - 1)) * \
            math.sqrt(N * (N + 1) - (k_from - 1) * (k_from - 2))
    if k_to == k_from + 2:
        return math.sqrt(N * (N + 1) - k_from * (k_from + 1)) * \
            math.sqrt(N * (N + 1) - (k_from + 1) * (k_from + 2))
    return 0.0


# ---------------------------------------------------------------------------
# hyperradial DVR
# ---------------------------------------------------------------------------

@dataclass
class DvrGrid:
    """Gauss-Lobatto-Legendre DVR on [rmin, rmax] with Dirichlet endpoints.

    ``Rn`` are the interior abscissas, ``T`` the kinetic matrix
    -(1/2 mu) d^2/dR^2 in the normalized cardinal basis.  The quadrature is
    exact for the polynomial integrands involved, so the basis is exactly
    orthonormal and local potentials are diagonal at the abscissas.
    """

    rmin: float
    rmax: float
    n: int
    mu: float
    Rn: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    T: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("DVR needs at least 4 points")
        npts = self.n + 2  # including the two endpoints
        interior, _ = roots_jacobi(npts - 2, 1.0, 1.0)
        x = np.concatenate([[-1.0], np.sort(interior), [1.0]])
        PL = eval_legendre(npts - 1, x)
        w = 2.0 / (npts * (npts - 1) * PL ** 2)
        # derivative matrix of the Lagrange cardinals at the Lobatto nodes
        D = np.zeros((npts, npts))
        for i in range(npts):
            for j in range(npts):
                if i != j:
                    D[i, j] = PL[i] / (PL[j] * (x[i] - x[j]))
        D[0, 0] = -npts * (npts - 1) / 4.0
        D[-1, -1] = npts * (npts - 1) / 4.0
        half = 0.5 * (self.rmax - self.rmin)
        mid = 0.5 * (self.rmax + self.rmin)
        R_all = mid + half * x
        w_all = w * half
        D_all = D / half
        # weak-form kinetic with Dirichlet ends: strip endpoint functions
        M = (D_all.T * w_all) @ D_all
        inner = slice(1, npts - 1)
        wi = w_all[inner]
        self.Rn = R_all[inner]
        self.weights = wi
        self.T = M[inner, inner] / np.sqrt(np.outer(wi, wi)) / (2.0 * self.mu)
        self._x_all = x
        self._R_all = R_all
        self._w_all = w_all
        self._PL = PL

    def basis_values(self, R) -> np.ndarray:
        """Values of the normalized DVR functions pi_n at points R,
        shape (n, len(R))."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        npts = self._R_all.size
        vals = np.empty((npts, R.size))
        for i in range(npts):
            li = np.ones_like(R)
            for j in range(npts):
                if j != i:
                    li *= (R - self._R_all[j]) / \
                        (self._R_all[i] - self._R_all[j])
            vals[i] = li
        inner = vals[1:-1]
        return inner / np.sqrt(self.weights)[:, None]


# ---------------------------------------------------------------------------
# hyperangular blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularChannelLabel:
    """Angular part of a basis function: (m2, K+) with canonical spin label."""

    m2: float
    Kp: int
    g_I: int
    two_term: bool


class HyperangularBlock:
    """Fixed-(N+, m+, spin class, Pi+) hyperangular Hamiltonian factory.

    ``spin_class`` is "ortho" (g_I = 0) or "para" (the g_I = +1 and -1
    canonical sets solved together; the two are coupled by the Delta K = +-2
    rotational terms for odd K+).
    """

    def __init__(self, Np: int, mp: int, spin_class: str, Pi: int,
                 spline: SplineBasis, m2_max: float = 12.0,
                 coriolis_sign: int = 1,
                 constants: GeomConstants = H3_CONSTANTS):
        if spin_class not in ("ortho", "para"):
            raise ValueError("spin_class must be 'ortho' or 'para'")
        if coriolis_sign not in (1, -1):
            raise ValueError("coriolis_sign must be +1 or -1")
        self.Np = Np
        self.mp = mp
        self.spin_class = spin_class
        self.Pi = Pi
        self.spline = spline
        self.m2_max = m2_max
        self.s = coriolis_sign
        self.constants = constants

        g_list = (0,) if spin_class == "ortho" else (1, -1)
        funcs: list[SymBasisFunction] = []
        for g in g_list:
            funcs.extend(enumerate_basis(Np, mp, g, Pi, m2_max, spline))
        chans: dict[AngularChannelLabel, None] = {}
        for b in funcs:
            chans.setdefault(
                AngularChannelLabel(b.m2, b.Kp, b.g_I, b.two_term))
        self.channels = list(chans)
        self.jsets = []
        for ch in self.channels:
            ell = abs(ch.m2 + self.s * ch.Kp / 2.0)
            self.jsets.append(spline.indices(clamp_left=ell >= 0.5))
        self.offsets = np.concatenate(
            [[0], np.cumsum([len(js) for js in self.jsets])])
        self.dim = int(self.offsets[-1])
        self._gram = None
        self._kin = None

    # primitive expansion of channel c: [(coef, m2, kappa, g)]
    def components(self, ch: AngularChannelLabel):
        proto = SymBasisFunction(0, ch.m2, ch.Kp, self.Np, self.mp, ch.g_I,
                                 ch.two_term)
        return proto.components()

    def _slice(self, a: int) -> slice:
        return slice(int(self.offsets[a]), int(self.offsets[a + 1]))

    def gram(self) -> np.ndarray:
        if self._gram is None:
            S = np.zeros((self.dim, self.dim))
            for a, ja in enumerate(self.jsets):
                S[self._slice(a), self._slice(a)] = self.spline.gram(ja)
            self._gram = S
        return self._gram

    def scaled_kinematic(self) -> np.ndarray:
        """Matrix of 2 mu R^2 Lambda^2/(2 mu R^2) + 15/4, i.e. the full
        R-independent hyperangular kinematics in units of 1/(2 mu R^2)."""
        if self._kin is not None:
            return self._kin
        sp = self.spline
        x = sp.quad_x
        meas = sp.measure
        sin2 = np.sin(x) ** 2
        cos2 = np.cos(x) ** 2
        G = np.zeros((self.dim, self.dim))
        N = self.Np
        for a, cha in enumerate(self.channels):
            ja = self.jsets[a]
            sa = self._slice(a)
            comp_a = self.components(cha)
            for b, chb in enumerate(self.channels):
                if b < a:
                    continue
                jb = self.jsets[b]
                sb = self._slice(b)
                comp_b = self.components(chb)
                M = np.zeros((len(ja), len(jb)))
                hit = False
                for ca, m2a, ka, ga in comp_a:
                    for cb, m2b, kb, gb in comp_b:
                        if ga != gb or m2a != m2b:
                            continue
                        if ka == kb:
                            hit = True
                            w = (4.0 * (m2a + self.s * ka * np.cos(x) / 2.0)
                                 ** 2 / sin2
                                 + 2.0 * (N * (N + 1) - ka * ka) / cos2
                                 + ka * ka + 15.0 / 4.0)
                            M += ca * cb * (
                                4.0 * sp.integral(meas, ja, jb, deriv=True)
                                + sp.integral(meas * w, ja, jb))
                        elif abs(ka - kb) == 2:
                            lam = ladder_squared(N, kb, ka)
                            if lam != 0.0:
                                hit = True
                                w = np.sin(x) / cos2 * lam
                                M += ca * cb * sp.integral(meas * w, ja, jb)
                if hit:
                    G[sa, sb] += M
                    if b != a:
                        G[sb, sa] += M.T
        self._kin = G
        return G

    def potential_matrix(self, R: float, pot: PotentialSurface,
                         n_phi: int = 48) -> np.ndarray:
        """Quadrature matrix of V(R, theta, phi).

        The phi integral is done by Fourier decomposition: an S3-symmetric
        surface contains only cos(3k phi) harmonics, so matrix elements pick
        the harmonic matching Delta m2 (always a multiple of 3 within a
        block).
        """
        sp = self.spline
        x = sp.quad_x
        phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
        vals = pot.evaluate_hyper(R, x[:, None], phis[None, :])
        four = np.fft.rfft(vals, axis=1) / n_phi
        V = np.zeros((self.dim, self.dim))
        for a, cha in enumerate(self.channels):
            ja = self.jsets[a]
            comp_a = self.components(cha)
            for b, chb in enumerate(self.channels):
                if b < a:
                    continue
                jb = self.jsets[b]
                comp_b = self.components(chb)
                M = np.zeros((len(ja), len(jb)))
                hit = False
                for ca, m2a, ka, ga in comp_a:
                    for cb, m2b, kb, gb in comp_b:
                        if ga != gb or ka != kb:
                            continue
                        dm = m2b - m2a
                        if abs(dm - round(dm)) > 1e-9:
                            continue
                        dm = abs(int(round(dm)))
                        if dm >= four.shape[1]:
                            continue
                        # rfft/n is the complex Fourier coefficient v_dm;
                        # <m2a| V |m2b> = v_|dm| for a real even surface
                        wv = four[:, dm].real
                        hit = True
                        M += ca * cb * sp.integral(sp.measure * wv, ja, jb)
                if hit:
                    V[self._slice(a), self._slice(b)] += M
                    if b != a:
                        V[self._slice(b), self._slice(a)] += M.T
        return V

    def hyperangular_matrix(self, R: float,
                            pot: PotentialSurface | None) -> np.ndarray:
        """Fixed-R adiabatic Hamiltonian (includes the 15/(8 mu R^2) term)."""
        mu = self.constants.mu3b
        H = self.scaled_kinematic() / (2.0 * mu * R * R)
        if pot is not None:
            H = H + self.potential_matrix(R, pot)
        return H

    def solve_channels(self, R: float, pot: PotentialSurface | None,
                       n_chan: int):
        """Lowest adiabatic eigenpairs at fixed R.

        Returns (U, A): potentials U[nu] (ascending) and coefficient columns
        A[:, nu] normalized in the spline metric, with the sign convention
        that the largest-magnitude coefficient is positive.
        """
        n_chan = min(n_chan, self.dim)
        H = self.hyperangular_matrix(R, pot)
        U, A = sla.eigh(H, self.gram(), subset_by_index=(0, n_chan - 1))
        for k in range(A.shape[1]):
            i = np.argmax(np.abs(A[:, k]))
            if A[i, k] < 0.0:
                A[:, k] = -A[:, k]
        return U, A


# ---------------------------------------------------------------------------
# slow variable discretization
# ---------------------------------------------------------------------------

@dataclass
class RovibState:
    """One rovibrational eigenstate of the ion."""

    energy_h: float
    coeffs: np.ndarray            # c[n, nu] over (DVR node, channel)
    block: "BlockSolution"
    labels: dict = field(default_factory=dict)

    @property
    def energy_cm(self) -> float:
        return self.energy_h * HARTREE_TO_INVCM


@dataclass
class BlockSolution:
    """All SVD eigenstates of one symmetry block, with the channel data
    needed to evaluate wavefunction overlaps later."""

    block: HyperangularBlock
    grid: DvrGrid
    U: np.ndarray                 # U[n, nu]
    A: list                       # A[n][:, nu] spline-space coefficients
    states: list = field(default_factory=list)


def align_channel_phases(block: HyperangularBlock, A_list):
    """Flip channel-function signs so overlaps between neighboring DVR nodes
    are positive (smooth O matrices; the spectrum is gauge invariant)."""
    S = block.gram()
    for n in range(1, len(A_list)):
        ov = A_list[n - 1].T @ S @ A_list[n]
        for k in range(A_list[n].shape[1]):
            if ov[k, k] < 0.0:
                A_list[n][:, k] = -A_list[n][:, k]
    return A_list


def svd_solve(grid: DvrGrid, U_list, A_list, S, n_states=None,
              energy_max=None):
    """Couple per-node adiabatic channels through the DVR kinetic matrix.

    U_list[n] is the channel-potential vector at node n, A_list[n] the matrix
    of channel coefficients (basis dim x n_chan), and S the basis Gram
    matrix.  Returns (energies, coeffs) where coeffs[i] has shape
    (n_nodes, n_chan) and unit Euclidean norm.

    Raises ValueError when a node's channel set is rank-deficient in the
    overlap metric (singular overlap block).
    """
    nR = len(U_list)
    nch = A_list[0].shape[1]
    for n, A in enumerate(A_list):
        ov = A.T @ S @ A
        if np.linalg.cond(ov) > 1e8:
            raise ValueError(f"singular channel-overlap block at node {n}")
    SA = [S @ A for A in A_list]
    H = np.zeros((nR, nch, nR, nch))
    for n in range(nR):
        for npr in range(n, nR):
            O = A_list[n].T @ SA[npr]
            H[n, :, npr, :] = grid.T[n, npr] * O
            if npr != n:
                H[npr, :, n, :] = H[n, :, npr, :].T
        H[n, :, n, :] += np.diag(U_list[n])
    Hm = H.reshape(nR * nch, nR * nch)
    w, v = sla.eigh(Hm)
    if energy_max is not None:
        keep = w <= energy_max
        w, v = w[keep], v[:, keep]
    if n_states is not None:
        w, v = w[:n_states], v[:, :n_states]
    coeffs = [v[:, i].reshape(nR, nch) for i in range(v.shape[1])]
    return w, coeffs


def solve_block(block: HyperangularBlock, grid: DvrGrid,
                pot: PotentialSurface, n_chan: int = 10,
                n_states=None, energy_max=None) -> BlockSolution:
    """Adiabatic channels at every DVR node + SVD coupling for one block."""
    U_list, A_list = [], []
    for R in grid.Rn:
        U, A = block.solve_channels(R, pot, n_chan)
        U_list.append(U)
        A_list.append(A)
    A_list = align_channel_phases(block, A_list)
    w, coeffs = svd_solve(grid, U_list, A_list, block.gram(),
                          n_states=n_states, energy_max=energy_max)
    sol = BlockSolution(block, grid, np.array(U_list), A_list)
    sol.states = [RovibState(float(e), c, sol) for e, c in zip(w, coeffs)]
    return sol


def brute_force_product_solve(block: HyperangularBlock, grid: DvrGrid,
                              pot: PotentialSurface, n_states: int):
    """Direct diagonalization over the full (DVR x hyperangular-basis)
    product grid; oracle for the SVD recoupling."""
    S = block.gram()
    nR = grid.Rn.size
    dim = block.dim
    H = np.zeros((nR, dim, nR, dim))
    for n in range(nR):
        for m in range(n, nR):
            H[n, :, m, :] = grid.T[n, m] * S
            if m != n:
                H[m, :, n, :] = H[n, :, m, :].T
        H[n, :, n, :] += block.hyperangular_matrix(grid.Rn[n], pot)
    Hm = H.reshape(nR * dim, nR * dim)
    Sm = np.kron(np.eye(nR), S)
    w = sla.eigh(Hm, Sm, eigvals_only=True,
                 subset_by_index=(0, n_states - 1))
    return w


# ---------------------------------------------------------------------------
# spectroscopic labels (heuristic layer, separate from the physics)
# ---------------------------------------------------------------------------

def _dominant_channel_and_component(state: RovibState):
    c = state.coeffs
    nu = int(np.argmax((c ** 2).sum(axis=0)))
    block = state.block.block
    n_mid = c.shape[0] // 2
    a_mid = state.block.A[n_mid][:, nu]
    weights = []
    for a in range(len(block.channels)):
        sl = block._slice(a)
        seg = a_mid[sl]
        Ssub = block.gram()[sl, sl]
        weights.append(float(seg @ Ssub @ seg))
    ach = int(np.argmax(weights))
    return nu, ach


def assign_labels(solution: BlockSolution, degeneracy_tol_cm: float = 5.0):
    """Heuristic (N+, G){v1, v2^l2}(u/l) assignment.

    G and l2 follow from the dominant angular channel through
    l2 = -(s*m2 + K+/2); v1 counts radial nodes of the dominant-channel
    amplitude; v2 = 2*(theta nodes) + |l2|.  Upper/lower tags are attached
    to pairs sharing (G, v-band) within ``degeneracy_tol_cm`` grouping.
    Assignments that fail basic sanity checks are flagged ambiguous rather
    than silently forced.
    """
    block = solution.block
    s = block.s
    for st in solution.states:
        nu, ach = _dominant_channel_and_component(st)
        ch = block.channels[ach]
        l2 = -(s * ch.m2 + ch.Kp / 2.0)
        if abs(l2 - round(l2)) > 1e-9:
            st.labels["ambiguous"] = True
            continue
        l2 = int(round(l2))
        G = abs(ch.Kp - l2)
        radial = st.coeffs[:, nu]
        sig = radial[np.abs(radial) > 0.05 * np.abs(radial).max()]
        v1 = int(np.count_nonzero(np.diff(np.sign(sig)) != 0))
        # theta-node count of the dominant channel function at mid-R
        n_mid = st.coeffs.shape[0] // 2
        a_mid = solution.A[n_mid][:, nu]
        sl = block._slice(ach)
        theta = np.linspace(0.02, math.pi / 2 - 0.02, 200)
        prof = block.spline.evaluate(
            {j: a_mid[sl][i] for i, j in enumerate(block.jsets[ach])}, theta)
        psig = prof[np.abs(prof) > 0.08 * np.abs(prof).max()]
        v_rho = int(np.count_nonzero(np.diff(np.sign(psig)) != 0))
        st.labels.update({
            "Np": block.Np, "G": G, "l2": l2, "v1": v1,
            "v2": 2 * v_rho + abs(l2), "g_class": block.spin_class,
            "Pi": block.Pi, "ambiguous": False,
        })
    # upper/lower tags within (G, v1, v2, |l2|) groups of two
    groups: dict = {}
    for st in solution.states:
        if st.labels.get("ambiguous", True):
            continue
        key = (st.labels["G"], st.labels["v1"], st.labels["v2"],
               abs(st.labels["l2"]))
        groups.setdefault(key, []).append(st)
    for key, members in groups.items():
        if len(members) == 2 and key[0] >= 1 and key[3] >= 1:
            members.sort(key=lambda s_: s_.energy_h)
            members[0].labels["tag"] = "l"
            members[1].labels["tag"] = "u"
        else:
            for m in members:
                m.labels["tag"] = "-"
    return solution.states
