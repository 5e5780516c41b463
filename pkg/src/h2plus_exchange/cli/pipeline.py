"""Computation of one R point: matrices, converged series, J records."""

from __future__ import annotations

import time
from fractions import Fraction
from dataclasses import dataclass

from ..basis import enumerate_basis
from ..exchange import ExchangeRecord, sapt_corrections, surface_J, volume_J
from ..integrals import OperatorMatrices, build_matrices
from ..mpkernel import PrecisionContext, active_digits, default_digits, mpf
from ..perturbation import PerturbationSeries, Resolvent, detect_ncrit, hs_expand, rs_expand


@dataclass
class SeriesOptions:
    hs_max_order: int = 150
    rs_max_order: int = 600
    tol_digits: int = 20          # converged once a correction is 10^(-digits+tol_digits) of the sum
    plateau_margin: int = 5       # RS orders computed beyond n_crit


@dataclass
class RSResult:
    series: PerturbationSeries
    corrections: list
    n_crit: int | None
    n_sum: int                    # J corrections summed through this order


def context_for(R, digits: int | None = None) -> PrecisionContext:
    return PrecisionContext(digits if digits is not None else default_digits(R))


def converged_hs(mats: OperatorMatrices, opts: SeriesOptions = SeriesOptions(),
                 resolvent: Resolvent | None = None) -> PerturbationSeries:
    tol = mpf(10) ** (-active_digits() + opts.tol_digits)
    return hs_expand(mats, opts.hs_max_order, resolvent, tol=tol)


def converged_rs(mats: OperatorMatrices, opts: SeriesOptions = SeriesOptions(),
                 resolvent: Resolvent | None = None) -> RSResult:
    """RS expansion summed to n_crit, or to convergence when no plateau shows up."""
    tol = mpf(10) ** (-active_digits() + opts.tol_digits)
    state = {"ncrit": None}

    def until(series):
        n = series.max_order + 1          # J^(1..n) available
        if n < 15 or n % 5:
            return False
        J = sapt_corrections(series, mats)
        state["ncrit"] = detect_ncrit(J)
        if state["ncrit"] is not None:
            return n >= state["ncrit"] + opts.plateau_margin
        total = sum(J, mpf(0))
        return abs(J[-1]) < tol * abs(total)

    series = rs_expand(mats, opts.rs_max_order, resolvent, until=until)
    J = sapt_corrections(series, mats)
    ncrit = detect_ncrit(J) if len(J) >= 15 else None
    n_sum = ncrit if ncrit is not None else len(J)
    return RSResult(series, J, ncrit, n_sum)


def primitive_function(method: str, mats: OperatorMatrices, opts: SeriesOptions, resolvent=None):
    """Coefficient vector of the summed primitive function and the order summed."""
    if method == "HS":
        s = converged_hs(mats, opts, resolvent)
        return s.phi_sum(), s.converged_at or s.max_order
    if method == "RS":
        r = converged_rs(mats, opts, resolvent)
        return r.series.phi_sum(r.n_sum - 1), r.n_sum
    raise ValueError(f"unknown method {method!r}")


def compute_point(R: str, omegas, methods, formulas, digits: int | None,
                  opts: SeriesOptions) -> list:
    """All records for one R over the Omega ladder; matrices built once at max Omega."""
    ctx = context_for(mpf(R), digits)
    out = []
    with ctx.activate():
        t0 = time.perf_counter()
        big = build_matrices(enumerate_basis(max(omegas), Fraction(R)), ctx)
        t_build = time.perf_counter() - t0
        for omega in sorted(omegas):
            mats = big.subset(omega)
            res = Resolvent(mats)
            for method in methods:
                t1 = time.perf_counter()
                phi, n = primitive_function(method, mats, opts, res)
                for formula in formulas:
                    J = volume_J(mats, phi) if formula == "volume" else surface_J(mats, phi)
                    out.append(ExchangeRecord(R, omega, method, formula, "converged", J, ctx.digits,
                                              {"orders": n, "seconds": round(time.perf_counter() - t1, 3),
                                               "build_seconds": round(t_build, 3)}))
    return out
