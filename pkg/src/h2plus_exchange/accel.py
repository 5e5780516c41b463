"""Levin u-transformation and its use for basis-set extrapolation of J."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .exchange import ExchangeRecord
from .mpkernel import active_digits, mpf

BETA = 1


class LevinError(ArithmeticError):
    """The transform is undefined for the given input."""


@dataclass(frozen=True)
class LevinInput:
    """Partial sums Z_0..Z_n with increments A_0 = Z_0, A_i = Z_i - Z_{i-1}."""

    Z: tuple
    A: tuple

    @classmethod
    def from_partial_sums(cls, Z) -> "LevinInput":
        Z = tuple(mpf(z) for z in Z)
        if not Z:
            raise ValueError("need at least one partial sum")
        A = (Z[0],) + tuple(Z[i] - Z[i - 1] for i in range(1, len(Z)))
        return cls(Z, A)

    @property
    def order(self) -> int:
        return len(self.Z) - 1


def _weights(n: int) -> list:
    """Remainder estimates omega_i = (beta + i) A_i with beta = 1."""
    return [BETA + i for i in range(n + 1)]


def levin_u(data: LevinInput | list | tuple) -> object:
    """U_n from n+1 partial sums, by the two coupled recursions.

    Both numerator and denominator start from Z_i/omega_i and 1/omega_i and
    are combined with the factors (beta+i)(beta+i+k)^(k-1)/(beta+i+k+1)^k,
    which keeps every intermediate of order one.
    """
    if not isinstance(data, LevinInput):
        data = LevinInput.from_partial_sums(data)
    Z, A = data.Z, data.A
    n = data.order
    if n == 0:
        return Z[0]
    if all(a == 0 for a in A[1:]):
        return Z[0]     # already converged: constant sequences are fixed points
    if any(a == 0 for a in A[1:]):
        raise LevinError("zero increment: the u-transform is undefined")
    if A[0] == 0:
        raise LevinError("Z_0 = 0 gives a zero first increment")
    w = _weights(n)
    num = [Z[i] / (w[i] * A[i]) for i in range(n + 1)]
    den = [1 / (w[i] * A[i]) for i in range(n + 1)]
    for k in range(n):
        for i in range(n - k):
            b = BETA + i
            f = mpf(b) * mpf(b + k) ** (k - 1) / mpf(b + k + 1) ** k
            num[i] = num[i + 1] - f * num[i]
            den[i] = den[i + 1] - f * den[i]
    # magnitude the denominator would have without cancellation
    scale = sum(comb(n, i) * mpf(BETA + i) ** (n - 1) / abs(w[i] * A[i]) for i in range(n + 1))
    scale /= mpf(BETA + n) ** (n - 1)
    if abs(den[0]) < mpf(10) ** (-active_digits() + 5) * scale:
        raise LevinError("denominator vanishes at working precision")
    return num[0] / den[0]


def extrapolate_J(records: list) -> ExchangeRecord:
    """Levin-extrapolate J over a run of consecutive Omega values."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    recs = sorted(records, key=lambda r: r.Omega)
    first = recs[0]
    for r in recs[1:]:
        if (r.method, r.formula, str(r.order), r.digits) != (first.method, first.formula, str(first.order), first.digits) \
                or mpf(r.R) != mpf(first.R):
            raise ValueError("records must share R, method, formula, order and digits")
    ladder = [r.Omega for r in recs]
    if ladder != list(range(ladder[0], ladder[0] + len(ladder))):
        raise ValueError(f"Omega values must be consecutive, got {ladder}")
    J = levin_u([r.J for r in recs])
    return ExchangeRecord(first.R, "extrapolated", first.method, first.formula, first.order, J,
                          first.digits, {"ladder": ladder, "transform": f"levin_u n={len(recs) - 1}"})
