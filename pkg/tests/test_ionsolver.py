import math

import numpy as np
import pytest
import scipy.linalg as sla

from trimqdt.geom import H3_CONSTANTS
from trimqdt.ionbasis import SplineBasis
from trimqdt.ionsolver import (DvrGrid, HyperangularBlock, RovibState,
                               assign_labels, brute_force_product_solve,
                               ladder_squared, solve_block, svd_solve)
from trimqdt.pes import PairMorsePES
from trimqdt.units import HARTREE_TO_INVCM


@pytest.fixture(scope="module")
def spline():
    return SplineBasis(count=24)


@pytest.fixture(scope="module")
def morse():
    return PairMorsePES(D=0.17, a=1.3, r0=1.6504)


def free_lambdas(block, n=6):
    G = block.scaled_kinematic()
    S = block.gram()
    n = min(n, block.dim)
    ev = sla.eigh(G, S, eigvals_only=True, subset_by_index=(0, n - 1))
    return -2.0 + np.sqrt(4.0 + ev - 15.0 / 4.0)


def test_free_space_integer_grand_angular_spectrum(spline):
    for (Np, spin, Pi) in [(0, "ortho", 1), (1, "ortho", 1),
                           (2, "ortho", 1), (1, "para", -1),
                           (2, "para", -1), (2, "para", 1)]:
        blk = HyperangularBlock(Np, 0, spin, Pi, spline, m2_max=6.5)
        if blk.dim == 0:
            continue
        lam = free_lambdas(blk, n=5)
        # resolution-limited at this spline count; the acceptance suite
        # re-runs this with a production basis at 1e-9
        assert np.max(np.abs(lam - np.round(lam))) < 2e-6, (Np, spin, Pi)


def test_free_space_lowest_block_matches_enumeration(spline):
    # N+ = 0 ortho even: allowed lambdas are 4v + 2|m2| with |m2| in 3,6,...
    blk = HyperangularBlock(0, 0, "ortho", 1, spline, m2_max=9.5)
    lam = np.round(free_lambdas(blk, n=6)).astype(int)
    enum = sorted(4 * v + 2 * m for m in (3, 6, 9) for v in range(6))[:6]
    assert list(lam) == enum


def test_scaled_eigenvalues_are_r_independent(spline, morse):
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    mu = H3_CONSTANTS.mu3b
    vals = []
    for R in (1.7, 2.9):
        H = blk.hyperangular_matrix(R, None)
        ev = sla.eigh(H, blk.gram(), eigvals_only=True,
                      subset_by_index=(0, 4))
        vals.append(ev * 2.0 * mu * R * R)
    assert np.max(np.abs(vals[0] - vals[1]) / np.abs(vals[0])) < 1e-11


def test_channel_functions_r_independent_without_potential(spline):
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    _, A1 = blk.solve_channels(1.8, None, 4)
    _, A2 = blk.solve_channels(3.1, None, 4)
    assert np.max(np.abs(A1 - A2)) < 1e-9


def test_channel_functions_r_independent_isotropic_potential(spline):
    class RadialOnly(PairMorsePES):
        def evaluate_hyper(self, R, theta, phi):
            shape = np.broadcast(np.asarray(theta), np.asarray(phi)).shape
            return np.full(shape, -0.1 * float(np.min(R)) ** -1)

        def evaluate(self, r12, r23, r31):  # pragma: no cover
            raise NotImplementedError

    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    _, A1 = blk.solve_channels(1.8, RadialOnly(1, 1, 1), 4)
    _, A2 = blk.solve_channels(3.1, RadialOnly(1, 1, 1), 4)
    assert np.max(np.abs(A1 - A2)) < 1e-9


def test_channel_orthonormality(spline, morse):
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    U, A = blk.solve_channels(2.1, morse, 6)
    gram = A.T @ blk.gram() @ A
    assert np.max(np.abs(gram - np.eye(6))) < 1e-10
    assert np.all(np.diff(U) >= -1e-14)


def test_mp_degeneracy_exact(spline):
    blk0 = HyperangularBlock(2, 0, "para", 1, spline, m2_max=3.5)
    blk2 = HyperangularBlock(2, 2, "para", 1, spline, m2_max=3.5)
    assert np.array_equal(blk0.scaled_kinematic(), blk2.scaled_kinematic())


def test_dvr_orthonormality_and_potential_diagonality():
    grid = DvrGrid(1.0, 5.0, 16, H3_CONSTANTS.mu3b)
    # exact at the quadrature level (the defining DVR property):
    # sum_q w_q pi_n(R_q) U(R_q) pi_m(R_q) = U(R_n) delta_nm
    vals_q = grid.basis_values(grid._R_all)

    def U(r):
        return 0.3 * (r - 2.5) ** 2 - 0.1 * r

    proj = (vals_q * grid._w_all * U(grid._R_all)) @ vals_q.T
    assert np.abs(np.diag(proj) - U(grid.Rn)).max() < 1e-11
    assert np.abs(proj - np.diag(np.diag(proj))).max() < 1e-11
    # against the true integral the property holds to quadrature accuracy
    x = np.linspace(1.0, 5.0, 8001)
    vals = grid.basis_values(x)
    w = np.trapezoid(vals[:, None, :] * vals[None, :, :], x, axis=2)
    assert np.max(np.abs(w - np.eye(grid.Rn.size))) < 0.05


def test_dvr_harmonic_oscillator_spacing():
    mu = H3_CONSTANTS.mu3b
    omega = 0.02
    grid = DvrGrid(0.5, 4.5, 60, mu)
    H = grid.T + np.diag(0.5 * mu * omega ** 2 * (grid.Rn - 2.5) ** 2)
    w = np.linalg.eigvalsh(H)[:5]
    assert np.allclose(np.diff(w), omega, rtol=1e-7)
    assert w[0] == pytest.approx(0.5 * omega, rel=1e-7)


def test_svd_single_channel_reduces_to_radial_dvr():
    mu = H3_CONSTANTS.mu3b
    grid = DvrGrid(0.8, 4.8, 40, mu)

    def U(r):
        return 0.1 * (r - 2.2) ** 2 - 0.4

    U_list = [np.array([U(R)]) for R in grid.Rn]
    A_list = [np.array([[1.0]]) for _ in grid.Rn]
    w, coeffs = svd_solve(grid, U_list, A_list, np.eye(1), n_states=4)
    direct = np.linalg.eigvalsh(grid.T + np.diag(U(grid.Rn)))[:4]
    assert np.allclose(w, direct, rtol=0, atol=1e-13)
    assert np.linalg.norm(coeffs[0]) == pytest.approx(1.0, abs=1e-12)


def two_channel_model(n_points=20):
    """Abstract 2-level internal space with R-dependent mixing; the SVD
    treatment at full channel count is algebraically exact for it."""
    mu = 1000.0
    grid = DvrGrid(1.0, 6.0, n_points, mu)

    def h(R):
        v1 = 0.08 * (R - 2.5) ** 2 - 0.30
        v2 = 0.05 * (R - 3.2) ** 2 - 0.18
        w = 0.04 * math.exp(-((R - 2.8) ** 2))
        return np.array([[v1, w], [w, v2]])

    return grid, h


def test_svd_two_channel_model_matches_brute_force():
    grid, h = two_channel_model(20)
    U_list, A_list = [], []
    for R in grid.Rn:
        w, v = np.linalg.eigh(h(R))
        for k in range(2):
            if v[np.argmax(np.abs(v[:, k])), k] < 0:
                v[:, k] = -v[:, k]
        U_list.append(w)
        A_list.append(v)
    w_svd, _ = svd_solve(grid, U_list, A_list, np.eye(2), n_states=5)
    nR = grid.Rn.size
    H = np.kron(grid.T, np.eye(2))
    for n, R in enumerate(grid.Rn):
        H[2 * n:2 * n + 2, 2 * n:2 * n + 2] += h(R)
    w_bf = np.linalg.eigvalsh(H)[:5]
    assert np.max(np.abs(w_svd - w_bf) / np.abs(w_bf)) < 1e-12


def test_svd_full_dimension_equals_product_brute_force(morse):
    spline = SplineBasis(count=12)
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    grid = DvrGrid(1.4, 4.5, 18, H3_CONSTANTS.mu3b)
    sol = solve_block(blk, grid, morse, n_chan=blk.dim, n_states=5)
    e_svd = np.array([s.energy_h for s in sol.states])
    e_bf = brute_force_product_solve(blk, grid, morse, 5)
    assert np.max(np.abs(e_svd - e_bf) / np.abs(e_bf)) < 1e-10


def test_svd_truncation_converges(morse):
    spline = SplineBasis(count=12)
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    grid = DvrGrid(1.4, 4.5, 16, H3_CONSTANTS.mu3b)
    e_bf = brute_force_product_solve(blk, grid, morse, 3)
    errs = []
    for n_chan in (4, 8):
        sol = solve_block(blk, grid, morse, n_chan=n_chan, n_states=3)
        e = np.array([s.energy_h for s in sol.states])
        errs.append(np.abs(e - e_bf).max())
    assert errs[1] < errs[0]
    assert errs[1] < 1e-6


def test_variational_monotonicity(morse):
    grid = DvrGrid(1.4, 4.2, 14, H3_CONSTANTS.mu3b)
    prev = None
    for count, n_chan in ((12, 4), (16, 6)):
        spline = SplineBasis(count=count)
        blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
        sol = solve_block(blk, grid, morse, n_chan=n_chan, n_states=3)
        e = np.array([s.energy_h for s in sol.states])
        if prev is not None:
            assert np.all(e <= prev + 1e-9)
        prev = e


def test_adiabatic_curve_approaches_dissociation_plateau(morse):
    spline = SplineBasis(count=20)
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    R_large = 9.0
    U, _ = blk.solve_channels(R_large, morse, 1)
    # min of the surface on the R_large hypersphere (one close pair)
    th = np.linspace(0, math.pi / 2, 200)
    ph = np.linspace(0, 2 * math.pi, 120, endpoint=False)
    vmin = float(morse.evaluate_hyper(R_large,
                                      th[:, None], ph[None, :]).min())
    assert U[0] > vmin
    assert U[0] - vmin < 0.05


def test_ladder_coefficients():
    assert ladder_squared(2, 2, 0) == pytest.approx(2 * math.sqrt(6.0))
    assert ladder_squared(2, 0, 2) == pytest.approx(2 * math.sqrt(6.0))
    assert ladder_squared(1, -1, 1) == pytest.approx(2.0)
    assert ladder_squared(1, 1, 3) == 0.0


def test_singular_overlap_flagged():
    grid = DvrGrid(1.0, 4.0, 6, 1000.0)
    U_list = [np.zeros(2) for _ in grid.Rn]
    A = np.array([[1.0, 1.0], [0.0, 1e-12]])  # rank-deficient channel set
    with pytest.raises(ValueError, match="singular"):
        svd_solve(grid, U_list, [A] * grid.Rn.size, np.eye(2))


def test_ground_band_labels_on_model(morse):
    spline = SplineBasis(count=16)
    grid = DvrGrid(1.4, 4.2, 16, H3_CONSTANTS.mu3b)
    # ortho K+=0 band: lowest states of N+=1 have G = 0, l2 = 0
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    sol = solve_block(blk, grid, morse, n_chan=6, n_states=2)
    assign_labels(sol)
    st = sol.states[0]
    assert st.labels["G"] == 0
    assert st.labels["l2"] == 0
    assert st.labels["v1"] == 0
    assert st.labels["v2"] == 0
    assert not st.labels["ambiguous"]
    # para K+=1 ground rotational state: G = 1
    blkp = HyperangularBlock(1, 0, "para", -1, spline, m2_max=3.5)
    solp = solve_block(blkp, grid, morse, n_chan=6, n_states=1)
    assign_labels(solp)
    assert solp.states[0].labels["G"] == 1
    assert solp.states[0].labels["l2"] == 0


def test_coriolis_sign_switch_leaves_spectrum(morse):
    spline = SplineBasis(count=14)
    grid = DvrGrid(1.4, 4.2, 12, H3_CONSTANTS.mu3b)
    es = []
    for s in (1, -1):
        blk = HyperangularBlock(2, 0, "para", -1, spline, m2_max=3.5,
                                coriolis_sign=s)
        sol = solve_block(blk, grid, morse, n_chan=4, n_states=3)
        es.append([st.energy_h for st in sol.states])
    assert np.allclose(es[0], es[1], rtol=0, atol=1e-10)


def test_rovib_state_energy_mirror(morse):
    spline = SplineBasis(count=12)
    grid = DvrGrid(1.4, 4.2, 10, H3_CONSTANTS.mu3b)
    blk = HyperangularBlock(1, 0, "ortho", 1, spline, m2_max=3.5)
    sol = solve_block(blk, grid, morse, n_chan=3, n_states=1)
    st = sol.states[0]
    assert st.energy_cm == pytest.approx(st.energy_h * HARTREE_TO_INVCM)
    assert np.linalg.norm(st.coeffs) == pytest.approx(1.0, abs=1e-12)
