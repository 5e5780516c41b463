"""Large-R asymptotic constants of J from fits in powers of 1/R.

J(R) = 2 R exp(-R-1) * sum_k j_k R^-k, so J * exp(R+1) / (2R) is fitted by
a polynomial in 1/R.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .mpkernel import active_digits, lstsq, mpf

# Known large-R constants j_0..j_7 (j_0..j_3 exact, the rest to the digits shown).
REFERENCE_JK = ("-1", "-0.5", "3.125", "2.7291667", "10.2161", "37.86", "113.26", "789.2")


def scale_J(R, J):
    """J * exp(R+1) / (2R); O(1) across the asymptotic region."""
    R = mpf(R)
    return mpf(J) * gmpy2.exp(R + 1) / (2 * R)


def unscale_J(R, y):
    R = mpf(R)
    return mpf(y) * 2 * R * gmpy2.exp(-R - 1)


def asymptotic_J(R, jk=REFERENCE_JK):
    """Truncated asymptotic series for J with constants ``jk``."""
    R = mpf(R)
    return unscale_J(R, sum((mpf(j) / R ** k for k, j in enumerate(jk)), mpf(0)))


@dataclass
class FitInput:
    R_train: list
    J_train: list
    R_test: list = field(default_factory=list)
    J_test: list = field(default_factory=list)
    L: int = 8

    def __post_init__(self):
        if len(self.R_train) != len(self.J_train) or len(self.R_test) != len(self.J_test):
            raise ValueError("R and J lists differ in length")
        train = {mpf(r) for r in self.R_train}
        if len(train) != len(self.R_train):
            raise ValueError("repeated training point")
        if train & {mpf(r) for r in self.R_test}:
            raise ValueError("training and test grids overlap")
        if any(mpf(r) < 5 for r in list(self.R_train) + list(self.R_test)):
            raise ValueError("fits are only meaningful for R >= 5")
        if self.L < 0:
            raise ValueError("L must be nonnegative")


@dataclass
class FitResult:
    L: int
    j: list
    train_residuals: list
    test_residuals: list
    condition: object

    def __call__(self, R):
        """Scaled model value sum_k j_k R^-k."""
        R = mpf(R)
        return sum((c / R ** k for k, c in enumerate(self.j)), mpf(0))

    @property
    def max_test_residual(self):
        return max((abs(r) for r in self.test_residuals), default=None)

    def J(self, R):
        return unscale_J(R, self(R))


def _fit_powers(R, y, powers):
    A = np.array([[1 / mpf(r) ** p for p in powers] for r in R], dtype=object)
    return lstsq(A, np.array(y, dtype=object))


def fit_jk(data: FitInput) -> FitResult:
    """Unweighted least-squares fit of the scaled J values through R^-L."""
    L = data.L
    if len(data.R_train) < L + 5:
        raise ValueError(f"need at least {L + 5} training points for L={L}")
    y = [scale_J(r, J) for r, J in zip(data.R_train, data.J_train)]
    res = _fit_powers(data.R_train, y, range(L + 1))
    fit = FitResult(L, list(res.x), [], [], res.condition)
    fit.train_residuals = [(fit(r) - v) / v for r, v in zip(data.R_train, y)]
    fit.test_residuals = [(fit(r) - scale_J(r, J)) / scale_J(r, J)
                          for r, J in zip(data.R_test, data.J_test)]
    return fit


def select_degree(candidates, R_train, J_train, R_test, J_test) -> int:
    """Degree with the smallest maximum relative residual on the test set.

    Residuals below a floor of 10^(-digits+15) count as equal, so among fits
    that are already exact to working precision the lowest degree wins.
    """
    candidates = list(candidates)
    if len(candidates) < 2:
        raise ValueError("need at least two candidate degrees")
    if not R_test:
        raise ValueError("degree selection needs test points")
    floor = mpf(10) ** (-active_digits() + 15)
    scored = []
    for L in candidates:
        fit = fit_jk(FitInput(R_train, J_train, R_test, J_test, L))
        scored.append((max(fit.max_test_residual, floor), L))
    return min(scored)[1]


def fit_wk(R, J_RS, J_HS, powers=(4, 5, 6, 7)) -> dict:
    """Coefficients w_k of J_RS/J_HS - 1 = sum_k w_k R^-k."""
    powers = tuple(powers)
    if not (len(R) == len(J_RS) == len(J_HS)):
        raise ValueError("R, J_RS and J_HS differ in length")
    if len(R) < len(powers):
        raise ValueError("fewer points than fitted powers")
    y = [mpf(a) / mpf(b) - 1 for a, b in zip(J_RS, J_HS)]
    res = _fit_powers(R, y, powers)
    return dict(zip(powers, res.x))
