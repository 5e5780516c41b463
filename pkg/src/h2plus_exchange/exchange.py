"""Exchange splitting J from a primitive-function approximation."""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .basis import exact_kinetic_terms, exact_terms, norm_squared_times_pi
from .integrals import OperatorMatrices
from .mpkernel import active_digits, mpf
from .perturbation import PerturbationSeries


class ExchangeSingularityError(ArithmeticError):
    """1 - <phi0|P phi>^2 is too close to zero (the removable 0/0 limit)."""


class LocalizationError(ArithmeticError):
    """The primitive function is not localized on nucleus a."""


@dataclass
class ExchangeRecord:
    R: object
    Omega: object          # int, or "extrapolated"
    method: str            # HS | RS
    formula: str           # volume | surface
    order: object          # int, or "converged"
    J: object
    digits: int
    provenance: dict = field(default_factory=dict)

    def key(self) -> tuple:
        return (str(self.R), str(self.Omega), self.method, self.formula, str(self.order), self.digits)


def _brackets(mats: OperatorMatrices, c: np.ndarray):
    """<phi0|V P phi>, <phi0|V phi>, <phi0|P phi>, <phi0|phi> (S metric)."""
    pc = mats.permute(c)
    v0, s0 = mats.V[0, :], mats.S[0, :]
    return np.dot(v0, pc), np.dot(v0, c), np.dot(s0, pc), np.dot(s0, c)


def volume_J(mats: OperatorMatrices, c: np.ndarray):
    """Volume-integral exchange energy of the primitive function with coefficients c."""
    vp, v, p, _ = _brackets(mats, c)
    denom = 1 - p * p
    if abs(denom) <= mpf(10) ** (-(active_digits() // 2)):
        raise ExchangeSingularityError(f"1 - <phi0|P phi>^2 = {float(denom):.3e}")
    return (vp - v * p) / denom


def sapt_corrections(series: PerturbationSeries, mats: OperatorMatrices, max_order: int | None = None) -> list:
    """Order-by-order exchange corrections J^(1..max_order), without the O(exp(-2R)) tail."""
    max_order = series.max_order + 1 if max_order is None else max_order
    if max_order > series.max_order + 1:
        raise ValueError(f"series has {series.max_order} orders, cannot give J^({max_order})")
    v0, s0 = mats.V[0, :], mats.S[0, :]
    v0p, s0p = v0[mats.perm], s0[mats.perm]
    a = [np.dot(v0, c) for c in series.phi[:max_order]]     # <phi0|V phi^(k)>
    b = [np.dot(s0p, c) for c in series.phi[:max_order]]    # <phi0|P phi^(k)>
    vp = [np.dot(v0p, c) for c in series.phi[:max_order]]   # <phi0|V P phi^(k)>
    out = []
    for n in range(1, max_order + 1):
        acc = vp[n - 1]
        for k in range(n):
            acc = acc - a[k] * b[n - 1 - k]
        out.append(acc)
    return out


def surface_J(mats: OperatorMatrices, c: np.ndarray):
    """Median-plane (surface integral) exchange energy of the primitive function c.

    The flux matrix differentiates along the normal pointing to nucleus b, so
    the plane integral of phi grad(phi) enters with a plus sign.
    """
    norm = mats.S.dot(c).dot(c)
    left = norm - half_space_overlap(mats, c, c)
    if left < norm / 4:
        raise LocalizationError("less than a quarter of the norm lies on the side of nucleus a")
    return median_plane_flux(mats, c, c) / left


def half_space_overlap(mats: OperatorMatrices, u: np.ndarray, v: np.ndarray):
    """Overlap of two basis expansions over the half-space nearer nucleus b."""
    return mats.half_right.dot(v).dot(u)


def median_plane_flux(mats: OperatorMatrices, u: np.ndarray, v: np.ndarray):
    """Integral over the median plane of u times the derivative of v toward b."""
    return mats.flux.dot(v).dot(u)


# --------------------------------------------------------------------------
# local energy


@dataclass
class LocalEnergyProfile:
    eta: list
    E_loc: list
    E_ref: object

    def errors(self) -> list:
        return [e - self.E_ref for e in self.E_loc]


def _radial_angular(terms, r, cos_theta):
    total = mpf(0)
    for k, m, coef in terms:
        total += mpf(coef) * r ** k * cos_theta ** m
    return total


def axis_values(mats: OperatorMatrices, c: np.ndarray, eta):
    """(psi, -1/2 laplacian psi) at the point (xi=1, eta) on the internuclear axis."""
    R = mats.R
    eta = mpf(eta)
    r = {"a": R * (1 + eta) / 2, "b": R * (1 - eta) / 2}
    psi = mpf(0)
    kin = mpf(0)
    one = mpf(1)   # interior angles vanish between the nuclei
    for coef, f in zip(c, mats.basis.functions):
        if coef == 0:
            continue
        rc = r[f.center]
        norm = gmpy2.sqrt(mpf(norm_squared_times_pi(f.N, f.M)) / gmpy2.const_pi())
        damp = norm * gmpy2.exp(-rc)
        psi += coef * damp * _radial_angular(exact_terms(f.N, f.M), rc, one)
        kin += coef * damp * _radial_angular(exact_kinetic_terms(f.N, f.M), rc, one)
    return psi, kin, r["a"], r["b"]


def local_energy(mats: OperatorMatrices, c: np.ndarray, symmetry: str, grid, E_ref=None,
                 hamiltonian: str = "full") -> LocalEnergyProfile:
    """(H psi)/psi along the internuclear axis for psi = A_sym phi.

    ``hamiltonian="H0"`` replaces H by -1/2 laplacian - 1/r_a.
    """
    if symmetry not in ("g", "u", "none"):
        raise ValueError("symmetry must be 'g', 'u' or 'none'")
    if symmetry == "none":
        psi_c = c
    else:
        sign = 1 if symmetry == "g" else -1
        psi_c = (c + sign * mats.permute(c)) / 2
    values = []
    floor = mpf(10) ** (-(active_digits() // 2))
    for eta in grid:
        if abs(mpf(eta)) >= 1:
            raise ValueError("grid points must lie strictly between the nuclei")
        psi, kin, ra, rb = axis_values(mats, psi_c, eta)
        if abs(psi) < floor:
            raise ZeroDivisionError(f"|psi| below 1e-{active_digits() // 2} at eta={eta}")
        pot = -1 / ra
        if hamiltonian == "full":
            pot += 1 / mats.R - 1 / rb
        values.append((kin + pot * psi) / psi)
    return LocalEnergyProfile(list(grid), values, E_ref)
