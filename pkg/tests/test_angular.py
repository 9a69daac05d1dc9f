import math

import numpy as np
import pytest

from trimqdt.angular import (clebsch_gordan, euler_rotation_matrix,
                             product_expand, rot_harmonic, wigner_D,
                             wigner_d)


def cg_recursion_oracle(j1, j2, J):
    """Independent Clebsch-Gordan column via the three-term m-recursion.

    Builds <j1 m1; j2 m2 | J M> for all (m1, m2) at every M by downward
    recursion from the stretched state, normalizing each column.
    """
    # start from M = J and recurse on J- applied to |J J>
    table = {}
    # top: coefficients for M = J from Racah's closed single-sum... instead
    # seed with the stretched state and build the M = J column by
    # Gram-Schmidt within the J-ladder; simplest exact approach: build the
    # full coupling matrix by diagonalizing J^2 in the product basis.
    dim1 = int(2 * j1 + 1)
    dim2 = int(2 * j2 + 1)
    m1s = [j1 - i for i in range(dim1)]
    m2s = [j2 - i for i in range(dim2)]

    def jmat(j):
        d = int(2 * j + 1)
        jz = np.diag([j - i for i in range(d)])
        jp = np.zeros((d, d))
        for i in range(1, d):
            m = j - i
            jp[i - 1, i] = math.sqrt(j * (j + 1) - m * (m + 1))
        return jz, jp

    jz1, jp1 = jmat(j1)
    jz2, jp2 = jmat(j2)
    I1, I2 = np.eye(dim1), np.eye(dim2)
    Jz = np.kron(jz1, I2) + np.kron(I1, jz2)
    Jp = np.kron(jp1, I2) + np.kron(I1, jp2)
    J2 = Jp @ Jp.T + Jz @ Jz + Jz  # J-J+ + Jz^2 + Jz acting on ... (J+ here lowers row index)
    # J2 via ladders: J^2 = J-J+ + Jz^2 + Jz with J+ = Jp.T in this layout
    J2 = Jp.T @ Jp + Jz @ Jz + Jz
    w, v = np.linalg.eigh(J2)
    # select the J subspace and the M sector by projecting
    for Mi in np.round(np.diag(Jz), 6):
        pass
    out = {}
    mask = np.abs(w - J * (J + 1)) < 1e-8
    sub = v[:, mask]
    # within the subspace diagonalize Jz
    JzS = sub.T @ Jz @ sub
    wz, vz = np.linalg.eigh(JzS)
    vecs = sub @ vz
    for col in range(vecs.shape[1]):
        M = wz[col]
        vec = vecs[:, col]
        # fix the Condon-Shortley sign: <j1 j1; j2 M-j1|J M> > 0 convention
        # use the highest-m1 nonzero component
        for idx in range(vec.size):
            if abs(vec[idx]) > 1e-9:
                first = idx
                break
        if vec[first] < 0:
            vec = -vec
        for idx, val in enumerate(vec):
            m1 = m1s[idx // dim2]
            m2 = m2s[idx % dim2]
            out[(m1, m2, round(M, 6))] = val
    return out


def test_cg_trivial_zero_coupling():
    assert clebsch_gordan(2, 1, 0, 0, 2, 1) == pytest.approx(1.0, abs=1e-15)
    assert clebsch_gordan(1.5, 0.5, 0, 0, 1.5, 0.5) == pytest.approx(1.0)


def test_cg_value_against_recursion_oracle():
    oracle = cg_recursion_oracle(1, 1, 2)
    assert clebsch_gordan(1, 0, 1, 0, 2, 0) == pytest.approx(
        oracle[(0, 0, 0.0)], abs=1e-12)
    assert clebsch_gordan(1, 0, 1, 0, 2, 0) == pytest.approx(
        math.sqrt(2.0 / 3.0), abs=1e-13)


def test_cg_full_table_against_oracle():
    for (j1, j2, J) in [(1, 1, 1), (2, 1, 2), (1.5, 0.5, 2), (2, 2, 3)]:
        oracle = cg_recursion_oracle(j1, j2, J)
        for (m1, m2, M), val in oracle.items():
            got = clebsch_gordan(j1, m1, j2, m2, J, M)
            assert got == pytest.approx(val, abs=1e-11), (j1, m1, j2, m2, J, M)


def test_cg_orthogonality_j2():
    for J in (0, 1, 2, 3, 4):
        for Jp in (0, 1, 2, 3, 4):
            for M in range(-min(J, Jp), min(J, Jp) + 1):
                s = sum(
                    clebsch_gordan(2, m1, 2, M - m1, J, M)
                    * clebsch_gordan(2, m1, 2, M - m1, Jp, M)
                    for m1 in range(-2, 3))
                expect = 1.0 if J == Jp else 0.0
                assert s == pytest.approx(expect, abs=1e-13)


def test_cg_exchange_symmetry():
    js = [0, 0.5, 1, 1.5, 2, 2.5, 3]
    rng = np.random.default_rng(5)
    for _ in range(200):
        j1, j2 = rng.choice(js, 2)
        Js = np.arange(abs(j1 - j2), j1 + j2 + 0.1)
        J = rng.choice(Js)
        m1 = rng.integers(0, int(2 * j1) + 1) - j1
        m2 = rng.integers(0, int(2 * j2) + 1) - j2
        M = m1 + m2
        if abs(M) > J:
            continue
        a = clebsch_gordan(j1, m1, j2, m2, J, M)
        b = clebsch_gordan(j2, m2, j1, m1, J, M)
        assert a == pytest.approx((-1.0) ** (j1 + j2 - J) * b, abs=1e-13)


def test_cg_invalid_couplings_return_zero():
    assert clebsch_gordan(1, 0, 1, 0, 5, 0) == 0.0
    assert clebsch_gordan(1, 1, 1, 1, 2, 0) == 0.0  # M mismatch
    assert clebsch_gordan(1, 0, 0.5, 0.5, 1, 0.5) == 0.0  # parity of sum


def test_scalar_rot_harmonic():
    v = rot_harmonic(0, 0, 0, (0.3, 1.1, 2.0))
    assert v == pytest.approx(1.0 / math.sqrt(8 * math.pi ** 2), abs=1e-14)


def _euler_quadrature(nb=24, na=12, ng=12):
    xb, wb = np.polynomial.legendre.leggauss(nb)
    betas = np.arccos(xb)
    alphas = 2 * math.pi * np.arange(na) / na
    gammas = 2 * math.pi * np.arange(ng) / ng
    return betas, wb, alphas, gammas


def test_rot_harmonic_normalization_by_quadrature():
    betas, wb, alphas, gammas = _euler_quadrature()
    wa = 2 * math.pi / alphas.size
    wg = 2 * math.pi / gammas.size
    for (N, K, m) in [(2, 1, -1), (1, 0, 0), (3, 2, 1)]:
        total = 0.0
        for b, w in zip(betas, wb):
            d = wigner_d(N, m, K, b)
            total += w * d * d
        total *= (2 * N + 1) / (8 * math.pi ** 2) * wa * alphas.size \
            * wg * gammas.size / (2 * math.pi) ** 2 * (2 * math.pi) ** 2
        # alpha/gamma integrals are trivially 2pi each for the diagonal case
        assert total * (2 * math.pi) ** 2 / (wa * alphas.size
                                             * wg * gammas.size) \
            == pytest.approx(1.0, abs=1e-10)


def test_rot_harmonic_orthogonality_sample():
    betas, wb, alphas, gammas = _euler_quadrature()
    cases = [((2, 1, -1), (2, 1, -1), 1.0),
             ((2, 1, -1), (2, -1, -1), 0.0),
             ((1, 0, 0), (2, 0, 0), 0.0),
             ((3, 2, 1), (3, 2, 1), 1.0),
             ((2, 2, 0), (2, 0, 0), 0.0)]
    for (qa, qb, expect) in cases:
        (N1, K1, m1), (N2, K2, m2) = qa, qb
        acc = 0.0j
        for b, w in zip(betas, wb):
            for a in alphas:
                for g in gammas:
                    acc += (w * np.conj(rot_harmonic(N1, K1, m1, (a, b, g)))
                            * rot_harmonic(N2, K2, m2, (a, b, g)))
        acc *= (2 * math.pi / alphas.size) * (2 * math.pi / gammas.size)
        assert abs(acc - expect) < 1e-10


def test_product_expand_l0_identity():
    terms = product_expand(2, 1, -1, 0, 0, 0)
    assert len(terms) == 1
    N, cK, cm = terms[0]
    assert N == 2 and cK == pytest.approx(1.0) and cm == pytest.approx(1.0)


def test_product_expand_numeric_identity():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a, b, g = rng.uniform(0, 2 * math.pi, 3)
        b = b / 2.0
        Np, mp, Kp = 1, rng.integers(-1, 2), rng.integers(-1, 2)
        l, lam, Lam = 1, rng.integers(-1, 2), rng.integers(-1, 2)
        lhs = wigner_D(Np, mp, Kp, a, b, g) * wigner_D(l, lam, Lam, a, b, g)
        rhs = sum(cK * cm * wigner_D(N, mp + lam, Kp + Lam, a, b, g)
                  for N, cK, cm in product_expand(Np, mp, Kp, l, lam, Lam))
        assert abs(lhs - rhs) < 1e-12


def test_body_frame_rearrangement_full_sum():
    """Numeric check of the lab->body rearrangement with normalized
    rotational harmonics: sum_lambda C R^{N+} Y_l^lambda(lab) =
    sum_Lambda (-1)^(l-Lambda) <l,-Lambda; N,K|N+ K+> R^N Y_l^Lambda(body),
    K = K+ + Lambda."""
    from scipy.special import sph_harm_y

    rng = np.random.default_rng(29)

    def ylm(l, m, nvec):
        theta = math.acos(np.clip(nvec[2], -1, 1))
        phi = math.atan2(nvec[1], nvec[0])
        return sph_harm_y(l, m, theta, phi)

    for (Np, Kp, l, N, m_tot) in [(1, 1, 1, 1, 0), (2, 1, 1, 2, 1),
                                  (2, 2, 2, 1, 0), (3, 2, 1, 3, -1),
                                  (1, 0, 1, 1, 0), (4, 3, 2, 4, 2)]:
        for _ in range(5):
            a, g = rng.uniform(0, 2 * math.pi, 2)
            b = rng.uniform(0, math.pi)
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            nbody = euler_rotation_matrix(a, b, g).T @ n
            lhs = 0.0j
            for lam in range(-l, l + 1):
                mp = m_tot - lam
                if abs(mp) > Np:
                    continue
                c = clebsch_gordan(Np, mp, l, lam, N, m_tot)
                if c == 0.0:
                    continue
                lhs += c * rot_harmonic(Np, Kp, mp, (a, b, g)) \
                    * ylm(l, lam, n)
            rhs = 0.0j
            for Lam in range(-l, l + 1):
                K = Kp + Lam
                if abs(K) > N:
                    continue
                c = clebsch_gordan(l, -Lam, N, K, Np, Kp)
                if c == 0.0:
                    continue
                rhs += ((-1.0) ** (l - Lam) * c
                        * rot_harmonic(N, K, m_tot, (a, b, g))
                        * ylm(l, Lam, nbody))
            assert abs(lhs - rhs) < 1e-12, (Np, Kp, l, N, m_tot)


def test_wigner_d_against_sympy_sample():
    sympy = pytest.importorskip("sympy")
    from sympy.physics.quantum.spin import Rotation

    rng = np.random.default_rng(31)
    for _ in range(25):
        j = rng.integers(0, 9) * 0.5
        m = rng.integers(0, int(2 * j) + 1) - j
        k = rng.integers(0, int(2 * j) + 1) - j
        beta = rng.uniform(0, math.pi)
        ref = complex(Rotation.d(sympy.Rational(int(2 * j), 2),
                                 sympy.Rational(int(2 * m), 2),
                                 sympy.Rational(int(2 * k), 2),
                                 beta).doit()).real
        assert wigner_d(j, m, k, beta) == pytest.approx(ref, abs=1e-13)
