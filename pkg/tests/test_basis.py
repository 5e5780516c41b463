import mpmath
import pytest

from h2plus_exchange.basis import (
    BasisFunction,
    center_pairs,
    enumerate_basis,
    exact_kinetic_terms,
    normalization_constant,
    to_monomials,
)
from h2plus_exchange.mpkernel import PrecisionContext, mpf

mp = mpmath.mp


def reference_chi(N, M, r, c):
    """Normalized function from mpmath's own Laguerre and Legendre polynomials (unnormalized)."""
    return mpmath.exp(-r) * mpmath.laguerre(N, 2 * M + 2, 2 * r) * r ** M * mpmath.legendre(M, c)


@pytest.mark.parametrize("Omega,size", [(0, 2), (3, 20), (20, 462)])
def test_basis_sizes(Omega, size):
    assert len(enumerate_basis(Omega, 10)) == size


def test_ordering_and_mirror():
    b = enumerate_basis(3, 10)
    assert b.functions[0] == BasisFunction("a", 0, 0)
    h = b.half
    assert [(f.N, f.M) for f in b.functions[:h]] == [(f.N, f.M) for f in b.functions[h:]]
    assert [(f.N, f.M) for f in b.functions[:h]] == sorted(center_pairs(3), key=lambda p: (p[1], p[0]))
    perm = b.permutation()
    for i, f in enumerate(b.functions):
        g = b.functions[perm[i]]
        assert (g.N, g.M) == (f.N, f.M) and g.center != f.center
    assert all(perm[perm[i]] == i for i in range(len(b)))


def test_subset_is_nested():
    b = enumerate_basis(5, 10)
    idx = b.subset(2)
    small = enumerate_basis(2, 10)
    assert [b.functions[i] for i in idx] == list(small.functions)
    with pytest.raises(ValueError):
        b.subset(6)


def test_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_basis(-1, 10)
    with pytest.raises(ValueError):
        enumerate_basis(2, 0)
    with pytest.raises(ValueError):
        normalization_constant(-1, 0)


def test_1s_norm(ctx50):
    assert abs(normalization_constant(0, 0) - 1 / mpmath_sqrt_pi()) < mpf("1e-48")


def mpmath_sqrt_pi():
    with mp.workdps(60):
        return mpf(str(mpmath.sqrt(mpmath.pi)))


@pytest.mark.parametrize("N,M", [(1, 0), (0, 1), (2, 1), (1, 3), (3, 2)])
def test_unit_norm_by_quadrature(N, M):
    with mp.workdps(40), PrecisionContext(40).activate():
        norm = mpmath.mpf(str(normalization_constant(N, M)))
        radial = mpmath.quad(lambda r: r ** 2 * (mpmath.exp(-r) * mpmath.laguerre(N, 2 * M + 2, 2 * r) * r ** M) ** 2,
                             [0, 10, 40, mpmath.inf])
        angular = mpmath.quad(lambda c: mpmath.legendre(M, c) ** 2, [-1, 1])
        assert abs(norm ** 2 * 2 * mpmath.pi * radial * angular - 1) < mpmath.mpf("1e-30")


@pytest.mark.parametrize("N,M", [(0, 0), (0, 1), (1, 0), (2, 2), (4, 3)])
def test_monomial_reconstruction(N, M):
    f = BasisFunction("a", N, M)
    with mp.workdps(40), PrecisionContext(40).activate():
        expansion = to_monomials(f)
        assert len(expansion.terms) == (N + 1) * (M // 2 + 1)
        norm = mpmath.mpf(str(f.norm))
        for r, c in [("0.3", "0.9"), ("2.5", "-0.4"), ("7", "0.1")]:
            got = mpmath.mpf(str(expansion(mpf(r), mpf(c))))
            want = norm * reference_chi(N, M, mpmath.mpf(r), mpmath.mpf(c))
            assert abs(got - want) < mpmath.mpf("1e-32") * (1 + abs(want))


def test_monomial_examples(ctx50):
    assert to_monomials(BasisFunction("a", 0, 0)).terms == ((0, 0, normalization_constant(0, 0)),)
    (term,) = to_monomials(BasisFunction("b", 0, 1)).terms
    assert term[:2] == (1, 1)
    terms = to_monomials(BasisFunction("a", 1, 0)).terms
    n = normalization_constant(1, 0)
    assert [(k, m) for k, m, _ in terms] == [(0, 0), (1, 0)]
    assert terms[0][2] == 3 * n and terms[1][2] == -2 * n


@pytest.mark.parametrize("N,M", [(0, 0), (1, 1), (2, 3), (3, 0)])
def test_kinetic_terms_match_numerical_laplacian(N, M):
    # -1/2 laplacian of f(r) P_M(cos theta) = -1/2 [f'' + 2 f'/r - M(M+1) f / r^2] P_M
    with mp.workdps(40):
        f = lambda r: mpmath.exp(-r) * mpmath.laguerre(N, 2 * M + 2, 2 * r) * r ** M
        for r, c in [(mpmath.mpf("1.7"), mpmath.mpf("0.3")), (mpmath.mpf("4.2"), mpmath.mpf("-0.8"))]:
            lap = mpmath.diff(f, r, 2) + 2 * mpmath.diff(f, r) / r - M * (M + 1) * f(r) / r ** 2
            want = -lap / 2 * mpmath.legendre(M, c)
            got = mpmath.exp(-r) * sum(mpmath.mpf(coef.numerator) / coef.denominator * r ** k * c ** m
                                       for k, m, coef in exact_kinetic_terms(N, M))
            assert abs(got - want) < mpmath.mpf("1e-25") * (1 + abs(want))
