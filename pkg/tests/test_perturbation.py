import gmpy2
import mpmath
import numpy as np
import pytest
from mpmath import mp

from conftest import matrices
from h2plus_exchange.exchange import sapt_corrections, volume_J
from h2plus_exchange.mpkernel import PrecisionContext, mpf, zeros
from h2plus_exchange.perturbation import E0, Resolvent, detect_ncrit, hs_expand, rs_expand


def lowest_eigenvalue(H, S):
    """Lowest root of det(H - E S) = 0 with mpmath (Cholesky + symmetric eigensolver)."""
    Hm = mpmath.matrix([[mpmath.mpf(str(v)) for v in row] for row in H])
    Sm = mpmath.matrix([[mpmath.mpf(str(v)) for v in row] for row in S])
    L = mpmath.cholesky(Sm)
    Li = L ** -1
    A = Li * Hm * Li.T
    A = (A + A.T) / 2
    return min(mpmath.eigsy(A, eigvals_only=True))


def symmetry_blocks(m, sign):
    """H + V and S over the combinations chi_a + sign * chi_b."""
    h = m.basis.half
    n = len(m.S)
    C = zeros(n, h)
    for i in range(h):
        C[i, i] = gmpy2.mpfr(1)
        C[m.perm[i], i] = gmpy2.mpfr(sign)
    H = m.H0 + m.V
    return C.T.dot(H).dot(C), C.T.dot(m.S).dot(C)


def test_resolvent_annihilates_phi0():
    m = matrices(10, 3, 50)
    with PrecisionContext(50).activate():
        x = Resolvent(m).apply(m.S[:, 0].copy())
        assert max(abs(v) for v in x) < mpf("1e-45")


def test_resolvent_defining_identity():
    m = matrices(12, 3, 50)
    rng = np.random.default_rng(1)
    with PrecisionContext(50).activate():
        y = np.array([mpf(float(v)) for v in rng.uniform(-1, 1, len(m.S))], dtype=object)
        x = Resolvent(m).apply(y)
        s0 = m.S[:, 0]
        assert abs(m.S[0, :].dot(x)) < mpf("1e-45")
        # (H0 - E0 S) x = (1 - S e0 e0^T) y + lambda S e0 for some multiplier lambda
        r = (m.H0 - mpf(E0) * m.S).dot(x) - (y - s0 * y[0])
        lam = r[0] / s0[0]
        assert max(abs(v) for v in r - lam * s0) < mpf(10) ** (-50 + 10)


def test_resolvent_2x2_closed_form():
    m = matrices(7, 0, 50)
    with PrecisionContext(50).activate():
        y = np.array([mpf("0.3"), mpf("-1.1")], dtype=object)
        x = Resolvent(m).apply(y)
        # x is along z = (-s, 1), the direction S-orthogonal to 1s_a
        s = m.S[0, 1]
        z = np.array([-s, mpf(1)], dtype=object)
        rhs = y - m.S[:, 0] * y[0]
        K = m.H0 - mpf(E0) * m.S
        t = z.dot(rhs) / z.dot(K.dot(z))
        assert max(abs(a - t * b) for a, b in zip(x, z)) < mpf("1e-46")


@pytest.mark.parametrize("R", [5, 10, 20])
def test_hs_omega0_matches_lcao(R):
    m = matrices(R, 0, 50)
    with PrecisionContext(50).activate():
        H = m.H0 + m.V
        s = m.S[0, 1]
        eg = (H[0, 0] + H[0, 1]) / (1 + s)
        eu = (H[0, 0] - H[0, 1]) / (1 - s)
        hs = hs_expand(m, 150)
        assert abs(sum(hs.Eg, mpf(0)) / eg - 1) < mpf("1e-30")
        assert abs(sum(hs.Eu, mpf(0)) / eu - 1) < mpf("1e-30")


def test_hs_first_order_closed_form():
    R = 9
    m = matrices(R, 2, 50)
    with PrecisionContext(50).activate():
        Rm = mpf(R)
        eR = gmpy2.exp(-Rm)
        S = eR * (1 + Rm + Rm ** 2 / 3)
        v00 = gmpy2.exp(-2 * Rm) * (1 + 1 / Rm)
        v0b = -eR * (1 + Rm) + S / Rm
        hs = hs_expand(m, 3)
        assert abs(hs.Eg[1] - (v00 + v0b) / (1 + S)) < mpf("1e-48")
        assert abs(hs.Eu[1] - (v00 - v0b) / (1 - S)) < mpf("1e-48")
        assert hs.Eg[0] == hs.Eu[0] == mpf(E0)


@pytest.mark.parametrize("R", [3, 6, 15])
def test_first_order_splitting_sign(R):
    m = matrices(R, 1, 40)
    with PrecisionContext(40).activate():
        hs = hs_expand(m, 1)
        assert hs.Eu[1] - hs.Eg[1] > 0


@pytest.mark.parametrize("R,Omega", [(8, 3), (12, 4)])
def test_hs_converges_to_variational(R, Omega):
    m = matrices(R, Omega, 50)
    with PrecisionContext(50).activate(), mp.workdps(60):
        hs = hs_expand(m, 150)
        eg = lowest_eigenvalue(*symmetry_blocks(m, 1))
        eu = lowest_eigenvalue(*symmetry_blocks(m, -1))
        tol = mpmath.mpf(10) ** (-50 + 15)
        assert abs(mpmath.mpf(str(sum(hs.Eg, mpf(0)))) - eg) < tol
        assert abs(mpmath.mpf(str(sum(hs.Eu, mpf(0)))) - eu) < tol


def test_hs_energy_splitting_equals_volume_J():
    m = matrices(14, 5, 50)
    with PrecisionContext(50).activate():
        hs = hs_expand(m, 150, tol=mpf(10) ** (-30))
        split = (sum(hs.Eg, mpf(0)) - sum(hs.Eu, mpf(0))) / 2
        J = volume_J(m, hs.phi_sum())
        assert abs(split / J - 1) < mpf("1e-10")


def test_intermediate_normalization():
    m = matrices(15, 4, 50)
    with PrecisionContext(50).activate():
        for series in (rs_expand(m, 12), hs_expand(m, 12)):
            assert series.phi[0][0] == 1 and all(v == 0 for v in series.phi[0][1:])
            for c in series.phi[1:]:
                assert abs(m.S[0, :].dot(c)) < mpf("1e-46")


def test_rs_first_order_closed_form():
    for R in (5, 10, 30):
        m = matrices(R, 2, 50)
        with PrecisionContext(50).activate():
            rs = rs_expand(m, 2)
            Rm = mpf(R)
            want = gmpy2.exp(-2 * Rm) * (1 + 1 / Rm)
            # 1/R - <1/r_b> cancels down to exp(-2R): the error is absolute
            assert abs(rs.E[1] - want) < mpf("1e-45")
            assert rs.E[0] == mpf(E0)


def test_rs_second_order_polarization():
    # E2 = -9/(4 R^4) - 15/(2 R^6) - ...; fit a + b/R^2 through R^4 E2
    vals = {}
    for R in (40, 60, 80):
        m = matrices(R, 6, 64)
        with PrecisionContext(64).activate():
            vals[R] = rs_expand(m, 3).E[2] * mpf(R) ** 4
    with PrecisionContext(64).activate():
        x = {R: 1 / mpf(R) ** 2 for R in vals}
        b = (vals[40] - vals[80]) / (x[40] - x[80])
        a = vals[80] - b * x[80]
        assert abs(a + mpf(9) / 4) < mpf("1e-4")
        assert abs(vals[60] - (a + b * x[60])) < mpf("1e-5")


def test_rs_symmetrized_rayleigh_quotient():
    # variational bound always; fast early gain, then a plateau above the
    # exact value because the polarization function is not the eigenfunction
    m = matrices(16, 4, 50)
    with PrecisionContext(50).activate(), mp.workdps(60):
        rs = rs_expand(m, 20)
        eg = mpf(str(lowest_eigenvalue(*symmetry_blocks(m, 1))))
        H = m.H0 + m.V
        gap = {}
        for n in (0, 2, 4, 8, 12, 20):
            c = rs.phi_sum(n)
            g = c + m.permute(c)
            gap[n] = H.dot(g).dot(g) / m.S.dot(g).dot(g) - eg
            assert gap[n] >= -mpf(10) ** (-50 + 20)
        assert gap[4] < gap[0] * mpf("1e-6")
        assert abs(gap[20] / gap[12] - 1) < mpf("0.01") and gap[20] > 0


def test_detect_ncrit_synthetic():
    J = [0.5 ** (n - 1) for n in range(1, 31)] + [0.5 ** 29] * 20
    assert detect_ncrit(J) == 30
    assert detect_ncrit([0.5 ** n for n in range(40)]) is None
    with pytest.raises(ValueError):
        detect_ncrit([1.0] * 14)


def test_ncrit_grows_with_R():
    found = {}
    for R in (40, 60):
        m = matrices(R, 6, 64 if R == 40 else 70)
        with PrecisionContext(m.digits).activate():
            rs = rs_expand(m, 170)
            found[R] = detect_ncrit(sapt_corrections(rs, m))
    assert found[40] is not None and found[60] is not None
    assert found[60] > found[40]
