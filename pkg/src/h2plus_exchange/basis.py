"""Two-center Laguerre-Legendre basis.

A basis function on center ``c`` is

    chi_c^{N,M} = norm * exp(-r_c) * L_N^{2M+2}(2 r_c) * r_c^M * P_M(cos theta_c)

with ``theta_c`` the interior angle at ``c`` of the triangle (r_a, r_b, R).
Functions with ``N + M <= Omega`` are kept on both centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np

from .mpkernel import laguerre_coeffs, legendre_coeffs, mpf


@dataclass(frozen=True)
class BasisFunction:
    center: str
    N: int
    M: int

    @property
    def norm(self):
        return normalization_constant(self.N, self.M)


@dataclass(frozen=True)
class BasisSet:
    Omega: int
    R: object
    functions: tuple

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    @property
    def half(self) -> int:
        """Number of functions per center."""
        return len(self.functions) // 2

    def permutation(self) -> np.ndarray:
        """``perm[i]`` is the index of the mirror image of function ``i``."""
        h = self.half
        return np.concatenate([np.arange(h, 2 * h), np.arange(h)])

    def subset(self, Omega: int) -> np.ndarray:
        """Indices of the functions belonging to the smaller ``Omega`` basis."""
        if Omega > self.Omega:
            raise ValueError(f"Omega={Omega} exceeds basis Omega={self.Omega}")
        return np.array([i for i, f in enumerate(self.functions) if f.N + f.M <= Omega])


def center_pairs(Omega: int) -> list[tuple[int, int]]:
    """(N, M) pairs of one center, sorted by (M, N)."""
    return [(N, M) for M in range(Omega + 1) for N in range(Omega + 1 - M)]


def enumerate_basis(Omega: int, R) -> BasisSet:
    if Omega < 0:
        raise ValueError("Omega must be nonnegative")
    if not R > 0:
        raise ValueError("R must be positive")
    pairs = center_pairs(Omega)
    funcs = tuple(BasisFunction(c, N, M) for c in "ab" for N, M in pairs)
    return BasisSet(Omega, R, funcs)


def norm_squared_times_pi(N: int, M: int) -> Fraction:
    """pi * norm**2, exact: (2M+1) N! 2^(2M+3) / (4 (N+2M+2)!)."""
    return Fraction((2 * M + 1) * math.factorial(N) * 2 ** (2 * M + 3),
                    4 * math.factorial(N + 2 * M + 2))


def normalization_constant(N: int, M: int):
    if N < 0 or M < 0:
        raise ValueError("N and M must be nonnegative")
    return gmpy2.sqrt(mpf(norm_squared_times_pi(N, M)) / gmpy2.const_pi())


@dataclass(frozen=True)
class MonomialExpansion:
    """``norm * exp(-r) * sum(coeff * r**k * cos(theta)**m)`` as (k, m, coeff) terms."""

    terms: tuple

    def __call__(self, r, cos_theta):
        return gmpy2.exp(-r) * sum(c * r ** k * cos_theta ** m for k, m, c in self.terms)


@lru_cache(maxsize=None)
def exact_terms(N: int, M: int) -> tuple:
    """Unnormalized (k, m, coeff) terms of exp(r) * chi^{N,M} / norm."""
    lag = laguerre_coeffs(N, 2 * M + 2).coeffs
    leg = legendre_coeffs(M).coeffs
    terms = []
    for i, li in enumerate(lag):
        for m in range(M % 2, M + 1, 2):
            terms.append((i + M, m, li * 2 ** i * leg[m]))
    return tuple(terms)


@lru_cache(maxsize=None)
def exact_kinetic_terms(N: int, M: int) -> tuple:
    """Unnormalized (k, m, coeff) terms of exp(r) * (-1/2 laplacian chi) / norm.

    The powers of r run down to r^(M-1); the r^(M-2) coefficient vanishes
    identically.
    """
    lag = laguerre_coeffs(N, 2 * M + 2).coeffs
    leg = legendre_coeffs(M).coeffs
    radial: dict[int, Fraction] = {}
    for i, li in enumerate(lag):
        j = i + M
        q = li * 2 ** i
        # laplacian of exp(-r) r^j P_M: (j(j+1)-M(M+1)) r^(j-2) - 2(j+1) r^(j-1) + r^j
        for power, c in ((j - 2, j * (j + 1) - M * (M + 1)), (j - 1, -2 * (j + 1)), (j, 1)):
            if c:
                radial[power] = radial.get(power, 0) + Fraction(-1, 2) * c * q
    terms = []
    for k in sorted(radial):
        if radial[k] == 0:
            continue
        for m in range(M % 2, M + 1, 2):
            terms.append((k, m, radial[k] * leg[m]))
    return tuple(terms)


def to_monomials(f: BasisFunction) -> MonomialExpansion:
    norm = f.norm
    return MonomialExpansion(tuple((k, m, norm * mpf(c)) for k, m, c in exact_terms(f.N, f.M)))
