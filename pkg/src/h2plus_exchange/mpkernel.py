"""Arbitrary-precision scalars, dense linear algebra and orthogonal polynomials.

All real arithmetic runs on ``gmpy2.mpfr`` values held in numpy ``object``
arrays.  The precision is fixed per run by a :class:`PrecisionContext`, which
is activated as a context manager around every computation::

    ctx = PrecisionContext(64)
    with ctx.activate():
        x = solve_dense(A, b)

Polynomial coefficients are generated exactly (``fractions.Fraction``) by the
three-term recurrences and converted to the working precision on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np

LOG2_10 = math.log2(10.0)


class SingularMatrixError(ArithmeticError):
    """A pivot vanished at working precision."""


class RankDeficientError(ArithmeticError):
    """A least-squares design matrix is numerically rank deficient."""


def default_digits(R) -> int:
    """Working precision used when a run does not pin ``digits`` explicitly."""
    return max(64, math.ceil(0.5 * float(R)) + 40)


@dataclass(frozen=True)
class PrecisionContext:
    """Number of significant decimal digits used for all real arithmetic."""

    digits: int

    def __post_init__(self):
        if int(self.digits) != self.digits or self.digits < 16:
            raise ValueError(f"digits must be an integer >= 16, got {self.digits!r}")

    @property
    def bits(self) -> int:
        return math.ceil(self.digits * LOG2_10) + 4

    def with_guard(self, extra: int) -> "PrecisionContext":
        return PrecisionContext(self.digits + extra)

    def activate(self):
        """Context manager setting the gmpy2 precision of the current thread."""
        return gmpy2.context(gmpy2.get_context(), precision=self.bits)

    def eps(self):
        """10**(-digits) as a working-precision number."""
        with self.activate():
            return gmpy2.mpfr(10) ** (-self.digits)


def active_digits() -> int:
    """Decimal digits implied by the currently active gmpy2 precision."""
    return int((gmpy2.get_context().precision - 4) / LOG2_10)


def mpf(x):
    """Convert ``x`` (int, Fraction, str, float, mpfr) to the active precision."""
    if isinstance(x, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
    return gmpy2.mpfr(x)


def mpf_array(values) -> np.ndarray:
    """Object array of working-precision reals with the shape of ``values``."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in, flat_out = arr.reshape(-1), out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = mpf(v)
    return out


def zeros(*shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(gmpy2.mpfr(0))
    return out


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    one = gmpy2.mpfr(1)
    for i in range(n):
        out[i, i] = one
    return out


def rounded(arr: np.ndarray) -> np.ndarray:
    """Re-round every entry to the active precision (e.g. after guard digits)."""
    return mpf_array(arr)


def to_str(x, digits: int | None = None) -> str:
    """Decimal scientific notation.

    With ``digits=None`` enough digits are emitted for the value to round-trip
    exactly at its own precision.
    """
    if not isinstance(x, type(gmpy2.mpfr(0))):
        x = gmpy2.mpfr(x)
    if not gmpy2.is_finite(x):
        return str(x)
    if digits is None:
        digits = math.ceil(x.precision / LOG2_10) + 1
    mant, exp, _ = x.digits(10, max(2, digits))
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    if x == 0:
        return f"{sign}0.{'0' * (len(mant) - 1)}e+00"
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+03d}"


# --------------------------------------------------------------------------
# dense linear algebra


@dataclass(frozen=True)
class LUFactor:
    lu: np.ndarray
    perm: np.ndarray


def lu_factor(a: np.ndarray) -> LUFactor:
    """Doolittle LU with partial pivoting; ``P A = L U`` stored in place."""
    lu = np.array(a, dtype=object, copy=True)
    n, m = lu.shape
    if n != m:
        raise ValueError("lu_factor needs a square matrix")
    digits = active_digits()
    tol = gmpy2.mpfr(10) ** (-digits + 5)
    scale = [max((abs(v) for v in row), default=gmpy2.mpfr(0)) for row in lu]
    perm = np.arange(n)
    for k in range(n):
        col = np.abs(lu[k:, k])
        p = k + int(np.argmax(col))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        pivot = lu[k, k]
        row_scale = scale[perm[k]]
        if row_scale == 0 or abs(pivot) <= tol * row_scale:
            raise SingularMatrixError(
                f"pivot {to_str(pivot, 6)} at step {k} below 1e-{digits - 5} of row scale"
            )
        if k + 1 < n:
            lcol = lu[k + 1:, k] / pivot
            lu[k + 1:, k] = lcol
            lu[k + 1:, k + 1:] -= np.multiply.outer(lcol, lu[k, k + 1:])
    return LUFactor(lu, perm)


def lu_solve(factor: LUFactor, b) -> np.ndarray:
    lu, perm = factor.lu, factor.perm
    n = lu.shape[0]
    y = np.array(b, dtype=object)[perm]
    for i in range(1, n):
        y[i] = y[i] - np.dot(lu[i, :i], y[:i])
    x = np.empty(n, dtype=object)
    for i in range(n - 1, -1, -1):
        s = y[i]
        if i + 1 < n:
            s = s - np.dot(lu[i, i + 1:], x[i + 1:])
        x[i] = s / lu[i, i]
    return x


def solve_dense(a, b) -> np.ndarray:
    """Solve ``a x = b`` at the active precision."""
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
        raise ValueError(f"shape mismatch: A {a.shape}, b {b.shape}")
    return lu_solve(lu_factor(a), b)


@dataclass(frozen=True)
class LstsqResult:
    x: np.ndarray
    residual: np.ndarray
    condition: object


def lstsq(a, b, rcond_digits: int | None = None) -> LstsqResult:
    """Least squares by Householder QR after scaling columns to unit norm."""
    a = np.array(a, dtype=object, copy=True)
    b = np.array(b, dtype=object, copy=True)
    m, n = a.shape
    if m < n:
        raise ValueError("lstsq needs at least as many rows as columns")
    colnorm = np.array([gmpy2.sqrt(sum(v * v for v in a[:, j])) for j in range(n)], dtype=object)
    if any(c == 0 for c in colnorm):
        raise RankDeficientError("zero column in design matrix")
    a = a / colnorm
    r = a.copy()
    qtb = b.copy()
    for k in range(n):
        x = r[k:, k]
        alpha = gmpy2.sqrt(np.dot(x, x))
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] = v[0] - alpha
        vv = np.dot(v, v)
        if vv == 0:
            continue
        r[k:, k:] -= np.multiply.outer(v, (2 * np.dot(v, r[k:, k:])) / vv)
        qtb[k:] -= v * (2 * np.dot(v, qtb[k:]) / vv)
    diag = [abs(r[k, k]) for k in range(n)]
    digits = active_digits() if rcond_digits is None else rcond_digits
    if min(diag) <= max(diag) * gmpy2.mpfr(10) ** (-digits + 5):
        raise RankDeficientError("design matrix rank deficient at working precision")
    y = np.empty(n, dtype=object)
    for i in range(n - 1, -1, -1):
        s = qtb[i]
        if i + 1 < n:
            s = s - np.dot(r[i, i + 1:n], y[i + 1:])
        y[i] = s / r[i, i]
    coeffs = y / colnorm
    residual = np.asarray(b, dtype=object) - np.dot(np.asarray(a * colnorm, dtype=object), coeffs)
    return LstsqResult(coeffs, residual, max(diag) / min(diag))


# --------------------------------------------------------------------------
# orthogonal polynomials


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Exact coefficients indexed by power: ``coeffs[k]`` multiplies ``x**k``."""

    coeffs: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + (mpf(c) if not isinstance(x, (int, Fraction)) else c)
        return acc

    def to_context(self) -> list:
        return [mpf(c) for c in self.coeffs]


def _trim(c: list) -> tuple:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


def _axpy(p: list, q: list, a=1, b=1) -> list:
    n = max(len(p), len(q))
    p = p + [0] * (n - len(p))
    q = q + [0] * (n - len(q))
    return [a * x + b * y for x, y in zip(p, q)]


@lru_cache(maxsize=None)
def laguerre_coeffs(N: int, alpha: int) -> PolynomialCoeffs:
    """Generalized Laguerre polynomial L_N^alpha(x), Abramowitz-Stegun convention."""
    if N < 0 or alpha < 0:
        raise ValueError("N and alpha must be nonnegative")
    prev, cur = [Fraction(1)], [Fraction(1 + alpha), Fraction(-1)]
    if N == 0:
        return PolynomialCoeffs(tuple(prev))
    for k in range(1, N):
        # (k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}
        shifted = [Fraction(0)] + cur
        nxt = _axpy(_axpy(cur, shifted, 2 * k + 1 + alpha, -1), prev, 1, -(k + alpha))
        prev, cur = cur, [c / (k + 1) for c in nxt]
    return PolynomialCoeffs(_trim(cur))


@lru_cache(maxsize=None)
def legendre_coeffs(M: int) -> PolynomialCoeffs:
    """Legendre polynomial P_M(x) with P_M(1) = 1 (Bonnet recurrence)."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    prev, cur = [Fraction(1)], [Fraction(0), Fraction(1)]
    if M == 0:
        return PolynomialCoeffs(tuple(prev))
    for n in range(1, M):
        shifted = [Fraction(0)] + cur
        nxt = _axpy(shifted, prev, 2 * n + 1, -n)
        prev, cur = cur, [c / (n + 1) for c in nxt]
    return PolynomialCoeffs(_trim(cur))
