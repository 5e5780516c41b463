"""Rayleigh-Schroedinger and Hirschfelder-Silbey expansions of the primitive function.

Vectors are coefficient vectors over the basis; "dual" vectors hold the
matrix elements <chi_i|f>.  The zeroth-order function phi_0 = 1s_a is the
first basis function, so intermediate normalization reads ``S[0] @ c = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .integrals import OperatorMatrices
from .mpkernel import SingularMatrixError, lu_factor, lu_solve, mpf, zeros

E0 = -0.5


class Resolvent:
    """Reduced resolvent (H0 - E0 + P0)^-1 (1 - P0) in the basis representation.

    Realized as one bordered factorization

        [ H0 - E0 S   S e0 ] [x]   [(1 - S e0 e0^T) y]
        [ e0^T S       0   ] [l] = [        0        ]

    reused for every application.
    """

    def __init__(self, mats: OperatorMatrices):
        n = mats.S.shape[0]
        e0 = mpf(E0)
        K = zeros(n + 1, n + 1)
        K[:n, :n] = mats.H0 - e0 * mats.S
        K[:n, n] = mats.S[:, 0]
        K[n, :n] = mats.S[0, :]
        try:
            self._lu = lu_factor(K)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"bordered resolvent system singular at R={float(mats.R)}, "
                f"Omega={mats.basis.Omega}: {exc}") from exc
        self._s0 = mats.S[:, 0]
        self.n = n

    def apply(self, y: np.ndarray) -> np.ndarray:
        rhs = np.empty(self.n + 1, dtype=object)
        rhs[:self.n] = y - self._s0 * y[0]
        rhs[self.n] = gmpy2.mpfr(0)
        return lu_solve(self._lu, rhs)[:self.n]


@dataclass
class PerturbationSeries:
    method: str
    R: object
    Omega: int
    phi: list = field(default_factory=list)
    E: list = field(default_factory=list)      # RS corrections, E[0] = E0
    Eg: list = field(default_factory=list)     # HS corrections
    Eu: list = field(default_factory=list)
    converged_at: int | None = None

    @property
    def max_order(self) -> int:
        return len(self.phi) - 1

    def phi_sum(self, order: int | None = None) -> np.ndarray:
        order = self.max_order if order is None else order
        total = self.phi[0].copy()
        for c in self.phi[1:order + 1]:
            total = total + c
        return total


def _unit(n: int) -> np.ndarray:
    e = zeros(n)
    e[0] = gmpy2.mpfr(1)
    return e


def rs_expand(mats: OperatorMatrices, max_order: int, resolvent: Resolvent | None = None,
              until=None) -> PerturbationSeries:
    """Polarization (RS) expansion through ``max_order``.

    ``until(series)`` is called after every order; a true result stops the
    expansion early and sets ``converged_at``.
    """
    R0 = resolvent or Resolvent(mats)
    n = mats.S.shape[0]
    v0 = mats.V[0, :]
    series = PerturbationSeries("RS", mats.R, mats.basis.Omega, phi=[_unit(n)], E=[mpf(E0)])
    for order in range(1, max_order + 1):
        phi = series.phi
        series.E.append(np.dot(v0, phi[order - 1]))
        w = zeros(n)
        for k in range(1, order + 1):
            w = w + series.E[k] * phi[order - k]
        y = mats.S.dot(w) - mats.V.dot(phi[order - 1])
        phi.append(R0.apply(y))
        if until is not None and until(series):
            series.converged_at = order
            break
    return series


def hs_expand(mats: OperatorMatrices, max_order: int, resolvent: Resolvent | None = None,
              tol=None) -> PerturbationSeries:
    """Hirschfelder-Silbey expansion.

    Runs ``max_order`` orders, or stops early once
    ``|E_g^(n)| / |sum_k E_g^(k)| < tol`` when ``tol`` is given.
    """
    R0 = resolvent or Resolvent(mats)
    n = mats.S.shape[0]
    perm = mats.perm
    v0, s0 = mats.V[0, :], mats.S[0, :]
    v0p, s0p = v0[perm], s0[perm]  # row 0 of V P and S P
    e = mpf(E0)
    series = PerturbationSeries("HS", mats.R, mats.basis.Omega, phi=[_unit(n)], Eg=[e], Eu=[e])
    # <phi0|A_nu phi0>
    d = {"g": (s0[0] + s0p[0]) / 2, "u": (s0[0] - s0p[0]) / 2}
    sign = {"g": 1, "u": -1}
    # <phi0|A_nu phi^(j)> for j >= 1 and <phi0|V A_nu phi^(j)>
    ov = {"g": [], "u": []}
    vv = {"g": [], "u": []}
    for order in range(1, max_order + 1):
        phi = series.phi
        last = phi[order - 1]
        plain_v, perm_v = np.dot(v0, last), np.dot(v0p, last)
        plain_s, perm_s = np.dot(s0, last), np.dot(s0p, last)
        for nu in "gu":
            vv[nu].append((plain_v + sign[nu] * perm_v) / 2)
            ov[nu].append((plain_s + sign[nu] * perm_s) / 2)
        new = {}
        for nu, E in (("g", series.Eg), ("u", series.Eu)):
            acc = vv[nu][order - 1]
            for k in range(1, order):
                acc = acc - E[k] * ov[nu][order - k]
            new[nu] = acc / d[nu]
        series.Eg.append(new["g"])
        series.Eu.append(new["u"])
        # sum_k E_g^(k) A_g phi^(n-k) + E_u^(k) A_u phi^(n-k)
        w, wp = zeros(n), zeros(n)
        for k in range(1, order + 1):
            plus = (series.Eg[k] + series.Eu[k]) / 2
            minus = (series.Eg[k] - series.Eu[k]) / 2
            w = w + plus * phi[order - k]
            wp = wp + minus * phi[order - k]
        w = w + mats.permute(wp)
        y = mats.S.dot(w) - mats.V.dot(last)
        phi.append(R0.apply(y))
        if tol is not None:
            total = sum(series.Eg[1:], mpf(0))
            if total != 0 and abs(series.Eg[order]) < tol * abs(total):
                series.converged_at = order
                break
    return series


def detect_ncrit(corrections, threshold=0.75, run=3, start=10):
    """Order where successive exchange-correction ratios jump to about 1.

    ``corrections[n-1]`` holds J^(n).  Returns the smallest n > ``start``
    with J^(n+1)/J^(n) above ``threshold`` for ``run + 1`` consecutive n, or
    None if no such plateau exists in the data.
    """
    J = list(corrections)
    if len(J) < 15:
        raise ValueError("need at least 15 orders to look for the ratio plateau")
    ratios = {n: J[n] / J[n - 1] for n in range(1, len(J)) if J[n - 1] != 0}
    for n in range(start + 1, len(J)):
        window = [ratios.get(m) for m in range(n, n + run + 1)]
        if any(r is None for r in window):
            break
        if all(r > threshold for r in window):
            return n
    return None
