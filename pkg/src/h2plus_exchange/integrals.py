"""Matrix elements over the two-center basis in prolate spheroidal coordinates.

With nuclei a, b a distance R apart,

    xi  = (r_a + r_b) / R  in [1, inf)
    eta = (r_a - r_b) / R  in [-1, 1]
    dV  = (R^3 / 8) (xi^2 - eta^2) dxi deta dphi

and every basis-function product reduces to polynomials in (xi, eta) times
an exponential, so each integral is a finite sum of separable moments.  The
building blocks are

    r_a = (R/2) s_a,  s_a = xi + eta,   r_a cos(theta_a) = (R/2) u_a,  u_a = 1 + xi*eta
    r_b = (R/2) s_b,  s_b = xi - eta,   r_b cos(theta_b) = (R/2) u_b,  u_b = 1 - xi*eta

Polynomials are expanded exactly (integer coefficients) in shifted variables
so that no floating sum suffers the large cancellation the plain monomials
xi^p eta^q produce for functions concentrated near a nucleus:

* same-center blocks use x = xi - 1, y = eta + 1 with weight exp(-R(x+y)),
* cross-center blocks (and the half-space/median-plane pieces) use
  x = xi - 1 and plain eta with weight exp(-R) exp(-R x) exp(-beta eta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np

from .basis import BasisSet, enumerate_basis, exact_kinetic_terms, exact_terms, norm_squared_times_pi
from .mpkernel import PrecisionContext, active_digits, default_digits, mpf, mpf_array, zeros

# --------------------------------------------------------------------------
# one-dimensional auxiliary integrals


def aux_A(n: int, alpha):
    """Integral of xi^n exp(-alpha xi) over [1, inf)."""
    return aux_A_table(n, alpha)[n]


def aux_A_table(nmax: int, alpha) -> list:
    alpha = mpf(alpha)
    if not alpha > 0:
        raise ValueError(f"aux_A needs alpha > 0, got {alpha}")
    e = gmpy2.exp(-alpha)
    out = [e / alpha]
    for n in range(1, nmax + 1):
        out.append((e + n * out[-1]) / alpha)
    return out


def _taylor_terms_needed(beta) -> int:
    # terms until beta^k/k! < 10^-(digits+5) relative to the leading one
    digits = active_digits() + 5
    b = abs(float(beta))
    k, logterm = 0, 0.0
    limit = -digits * math.log(10)
    while True:
        k += 1
        logterm += math.log(b) - math.log(k) if b > 0 else -math.inf
        if k > b and logterm < limit + min(0.0, b):
            return k + 1


def aux_B(n: int, beta):
    """Integral of eta^n exp(-beta eta) over [-1, 1]."""
    return aux_B_table(n, beta)[n]


def aux_B_table(nmax: int, beta) -> list:
    beta = mpf(beta)
    if beta == 0:
        return [mpf(Fraction(2, n + 1)) if n % 2 == 0 else mpf(0) for n in range(nmax + 1)]
    if beta < 0:
        # eta -> -eta
        return [(-1) ** n * v for n, v in enumerate(aux_B_table(nmax, -beta))]
    if beta < Fraction(1, 4):
        return [_B_series(n, beta) for n in range(nmax + 1)]
    ep, em = gmpy2.exp(beta), gmpy2.exp(-beta)
    out = [None] * (nmax + 1)
    out[0] = (ep - em) / beta
    # upward recurrence is stable while n <= beta
    up = min(nmax, int(math.floor(float(beta))))
    for k in range(1, up + 1):
        out[k] = ((-1) ** k * ep - em + k * out[k - 1]) / beta
    if up < nmax:
        # downward recurrence from a series seed for n > beta
        top = nmax
        out[top] = _B_series(top, beta)
        for k in range(top, up + 1, -1):
            out[k - 1] = (beta * out[k] + em - (-1) ** k * ep) / k
    return out


def _B_series(n: int, beta):
    """sum_k (-beta)^k/k! * 2/(n+k+1) over n+k even; all terms share one sign."""
    total = mpf(0)
    term = mpf(1)  # (-beta)^k / k!
    for k in range(_taylor_terms_needed(beta) + n % 2 + 1):
        if (n + k) % 2 == 0:
            total += 2 * term / (n + k + 1)
        term = -term * beta / (k + 1)
    return total


def aux_Bhalf(n: int, beta):
    """Integral of eta^n exp(-beta eta) over [0, 1]."""
    return aux_Bhalf_table(n, beta)[n]


def aux_Bhalf_table(nmax: int, beta) -> list:
    beta = mpf(beta)
    if beta == 0:
        return [mpf(Fraction(1, n + 1)) for n in range(nmax + 1)]
    if beta < 0:
        return [_Bhalf_series_neg(n, -beta) for n in range(nmax + 1)]
    if beta < Fraction(1, 4):
        return [_Bhalf_taylor(n, beta) for n in range(nmax + 1)]
    em = gmpy2.exp(-beta)
    out = [None] * (nmax + 1)
    out[0] = (1 - em) / beta
    up = min(nmax, int(math.floor(float(beta))))
    for k in range(1, up + 1):
        out[k] = (k * out[k - 1] - em) / beta
    if up < nmax:
        out[nmax] = _Bhalf_series_pos(nmax, beta)
        for k in range(nmax, up + 1, -1):
            out[k - 1] = (beta * out[k] + em) / k
    return out


def _Bhalf_taylor(n: int, beta):
    total, term = mpf(0), mpf(1)
    for k in range(_taylor_terms_needed(beta) + 1):
        total += term / (n + k + 1)
        term = -term * beta / (k + 1)
    return total


def _Bhalf_series_pos(n: int, beta):
    """exp(-beta) * sum_k beta^k n!/(n+k+1)!  (positive terms)."""
    total = mpf(0)
    term = mpf(1) / (n + 1)  # beta^k n!/(n+k+1)!
    k = 0
    tiny = mpf(10) ** (-(active_digits() + 5))
    while True:
        total += term
        k += 1
        term = term * beta / (n + k + 1)
        if term < tiny * total:
            break
    return gmpy2.exp(-beta) * total


def _Bhalf_series_neg(n: int, b):
    """Integral of eta^n exp(+b eta) over [0,1] by its positive Taylor series."""
    total, term = mpf(0), mpf(1)
    tiny = mpf(10) ** (-(active_digits() + 5))
    k = 0
    while True:
        total += term / (n + k + 1)
        k += 1
        term = term * b / k
        if k > b and term < tiny * total:
            break
    return total


def monomial_integral(p: int, q: int, alpha, beta):
    """Integral of xi^p eta^q exp(-alpha xi - beta eta) over the prolate domain."""
    return aux_A(p, alpha) * aux_B(q, beta)


def shifted_A_table(nmax: int, alpha) -> list:
    """Integral of (xi - 1)^n exp(-alpha xi) over [1, inf): exp(-alpha) n!/alpha^(n+1)."""
    alpha = mpf(alpha)
    e = gmpy2.exp(-alpha)
    out, term = [], e / alpha
    for n in range(nmax + 1):
        out.append(term)
        term = term * (n + 1) / alpha
    return out


# --------------------------------------------------------------------------
# exact two-variable polynomials {(p, q): int}

_SYSTEMS = {
    # x = xi - 1, y = eta + 1
    "aa": {
        "s_a": {(1, 0): 1, (0, 1): 1},
        "u_a": {(1, 1): 1, (0, 1): 1, (1, 0): -1},
        "s_b": {(0, 0): 2, (1, 0): 1, (0, 1): -1},
        "u_b": {(0, 0): 2, (1, 0): 1, (0, 1): -1, (1, 1): -1},
    },
    # x = xi - 1, eta
    "ab": {
        "s_a": {(0, 0): 1, (1, 0): 1, (0, 1): 1},
        "u_a": {(0, 0): 1, (0, 1): 1, (1, 1): 1},
        "s_b": {(0, 0): 1, (1, 0): 1, (0, 1): -1},
        "u_b": {(0, 0): 1, (0, 1): -1, (1, 1): -1},
    },
}


def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (p1, q1), c1 in a.items():
        for (p2, q2), c2 in b.items():
            key = (p1 + p2, q1 + q2)
            out[key] = out.get(key, 0) + c1 * c2
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _ppow(system: str, name: str, e: int) -> tuple:
    base = _SYSTEMS[system][name]
    out = {(0, 0): 1}
    for _ in range(e):
        out = _pmul(out, base)
    return tuple(sorted(out.items()))


@lru_cache(maxsize=None)
def _su_poly(system: str, center: str, e: int, m: int) -> tuple:
    """s_c^e * u_c^m as sorted ((p, q), int) items."""
    a = dict(_ppow(system, "s_" + center, e))
    b = dict(_ppow(system, "u_" + center, m))
    return tuple(sorted(_pmul(a, b).items()))


class _PolyLayout:
    """Dense monomial layout p, q in [0, deg]."""

    def __init__(self, deg: int):
        self.deg = deg
        self.size = (deg + 1) ** 2
        idx = np.arange(self.size)
        self.p = idx // (deg + 1)
        self.q = idx % (deg + 1)

    def index(self, p, q):
        return p * (self.deg + 1) + q


def _expand(terms, system: str, center: str, layout: _PolyLayout, half_R):
    """Numeric (regular, inverse-r) coefficient vectors of sum c r^k cos^m theta.

    Terms with k - m = -1 go to the second vector, which multiplies 1/r_c.
    """
    reg = [0] * layout.size
    inv = [0] * layout.size
    for k, m, c in terms:
        e = k - m
        if e >= 0:
            scale = mpf(c) * half_R ** k
            target, poly = reg, _su_poly(system, center, e, m)
        elif e == -1:
            scale = mpf(c) * half_R ** (k + 1)
            target, poly = inv, _su_poly(system, center, 0, m)
        else:
            raise ValueError(f"unsupported term r^{k} cos^{m}")
        for (p, q), v in poly:
            target[layout.index(p, q)] += scale * v
    return reg, inv


def _gram(layout: _PolyLayout, weight: dict, X: list, Y: list) -> np.ndarray:
    """G[i, j] = sum_w w * X[p_i + p_j + dp] * Y[q_i + q_j + dq]."""
    Xa = np.array(X, dtype=object)
    Ya = np.array(Y, dtype=object)
    P = layout.p[:, None] + layout.p[None, :]
    Q = layout.q[:, None] + layout.q[None, :]
    G = None
    for (dp, dq), w in weight.items():
        part = Xa[P + dp] * Ya[Q + dq] * w
        G = part if G is None else G + part
    return G


# --------------------------------------------------------------------------
# operator matrices


@dataclass
class OperatorMatrices:
    """All one-electron matrices over one basis at one internuclear distance."""

    basis: BasisSet
    R: object
    S: np.ndarray
    T: np.ndarray
    Ua: np.ndarray
    Ub: np.ndarray
    half_right: np.ndarray
    flux: np.ndarray
    perm: np.ndarray
    digits: int
    H0: np.ndarray = field(init=False)
    V: np.ndarray = field(init=False)

    def __post_init__(self):
        self.H0 = self.T - self.Ua
        self.V = self.S / self.R - self.Ub

    @property
    def P(self) -> np.ndarray:
        """Exchange permutation matrix: column j is the unit vector of perm[j]."""
        n = len(self.perm)
        out = zeros(n, n)
        for j, i in enumerate(self.perm):
            out[i, j] = gmpy2.mpfr(1)
        return out

    def permute(self, c: np.ndarray) -> np.ndarray:
        """Coefficients of P_ab applied to the function with coefficients c."""
        out = np.empty_like(c)
        out[self.perm] = c
        return out

    def subset(self, Omega: int) -> "OperatorMatrices":
        """Restriction to the nested basis with parameter ``Omega``."""
        if Omega == self.basis.Omega:
            return self
        idx = self.basis.subset(Omega)
        sub = np.ix_(idx, idx)
        basis = enumerate_basis(Omega, self.basis.R)
        return OperatorMatrices(
            basis=basis, R=self.R, S=self.S[sub], T=self.T[sub], Ua=self.Ua[sub], Ub=self.Ub[sub],
            half_right=self.half_right[sub], flux=self.flux[sub], perm=basis.permutation(),
            digits=self.digits,
        )


def _sym_upper(M: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one."""
    out = M.copy()
    il = np.tril_indices(M.shape[0], -1)
    out[il] = M.T[il]
    return out


def exact_R(R) -> Fraction:
    if isinstance(R, Fraction):
        return R
    return Fraction(str(R))


def integral_guard_digits(Omega: int) -> int:
    return 20 + 2 * Omega


def build_matrices(basis: BasisSet, ctx: PrecisionContext | None = None) -> OperatorMatrices:
    """Assemble S, T, U_a, U_b and the surface-formula pieces for ``basis``.

    Integrals are evaluated with extra guard digits and rounded to ``ctx``.
    """
    R = exact_R(basis.R)
    if ctx is None:
        ctx = PrecisionContext(default_digits(R))
    guard = ctx.with_guard(integral_guard_digits(basis.Omega))
    h = basis.half
    pairs = [(f.N, f.M) for f in basis.functions[:h]]
    with guard.activate():
        blocks = _assemble(pairs, R, basis.Omega)
    with ctx.activate():
        blocks = {k: mpf_array(v) for k, v in blocks.items()}
        for name, M in blocks.items():
            if not all(gmpy2.is_finite(v) for v in M.flat):
                raise OverflowError(f"non-finite entry in {name} at R={R}")
        b = blocks
        S = np.block([[b["S_aa"], b["S_ab"]], [b["S_ab"].T, b["S_aa"]]])
        T = np.block([[b["T_aa"], b["T_ab"]], [b["T_ab"].T, b["T_aa"]]])
        Ua = np.block([[b["Ua_aa"], b["Ua_ab"]], [b["Ua_ab"].T, b["Ub_aa"]]])
        Ub = np.block([[b["Ub_aa"], b["Ua_ab"].T], [b["Ua_ab"], b["Ua_aa"]]])
        HR = np.block([[b["HR_aa"], b["HR_ab"]], [b["HR_ab"].T, b["S_aa"] - b["HR_aa"]]])
        FL = np.block([[b["FL"], -b["FL"]], [b["FL"], -b["FL"]]])
        return OperatorMatrices(basis=basis, R=mpf(R), S=S, T=T, Ua=Ua, Ub=Ub,
                                half_right=HR, flux=FL, perm=basis.permutation(), digits=ctx.digits)


def _assemble(pairs, R: Fraction, Omega: int) -> dict:
    Rm = mpf(R)
    half_R = Rm / 2
    deg = Omega + 1
    lay = _PolyLayout(deg)
    gdeg = 2 * deg + 3
    norms = np.array([gmpy2.sqrt(mpf(norm_squared_times_pi(N, M))) for N, M in pairs], dtype=object)
    nn = np.multiply.outer(norms, norms)

    def expand_all(system, center, kinetic=False):
        reg, inv = [], []
        for N, M in pairs:
            terms = exact_kinetic_terms(N, M) if kinetic else exact_terms(N, M)
            r, i = _expand(terms, system, center, lay, half_R)
            reg.append(r)
            inv.append(i)
        return np.array(reg, dtype=object), np.array(inv, dtype=object)

    c_vol = Rm ** 3 / 4   # 2 pi R^3/8 with pi absorbed in the norms
    c_inv = Rm ** 2 / 2   # 2 pi R^2/4
    out = {}

    # same-center block, x = xi-1, y = eta+1, weight exp(-R(x+y))
    sysw = _SYSTEMS["aa"]
    X = [mpf(math.factorial(p)) / Rm ** (p + 1) for p in range(gdeg + 1)]
    Y = [2 ** (q + 1) * v for q, v in enumerate(aux_Bhalf_table(gdeg, 2 * Rm))]
    G_vol = _gram(lay, _pmul(sysw["s_a"], sysw["s_b"]), X, Y)
    G_sa = _gram(lay, sysw["s_a"], X, Y)
    G_sb = _gram(lay, sysw["s_b"], X, Y)
    Fa, _ = expand_all("aa", "a")
    Ka, Ka_inv = expand_all("aa", "a", kinetic=True)
    FG_vol, FG_sb = Fa.dot(G_vol), Fa.dot(G_sb)
    out["S_aa"] = _sym_upper(c_vol * FG_vol.dot(Fa.T) * nn)
    out["T_aa"] = _sym_upper((c_vol * FG_vol.dot(Ka.T) + c_inv * FG_sb.dot(Ka_inv.T)) * nn)
    out["Ua_aa"] = _sym_upper(c_inv * FG_sb.dot(Fa.T) * nn)
    out["Ub_aa"] = _sym_upper(c_inv * Fa.dot(G_sa).dot(Fa.T) * nn)

    # cross-center block, x = xi-1, eta, weight exp(-R) exp(-R x)
    sysw = _SYSTEMS["ab"]
    X = shifted_A_table(gdeg, Rm)
    Y = aux_B_table(gdeg, 0)
    G_vol = _gram(lay, _pmul(sysw["s_a"], sysw["s_b"]), X, Y)
    G_sa = _gram(lay, sysw["s_a"], X, Y)
    G_sb = _gram(lay, sysw["s_b"], X, Y)
    Fa, _ = expand_all("ab", "a")
    # mirror eta -> -eta turns a-centered polynomials into b-centered ones
    qsign = np.array([(-1) ** int(q) for q in lay.q], dtype=object)
    Fb = Fa * qsign
    Ka, Ka_inv = expand_all("ab", "a", kinetic=True)
    Kb, Kb_inv = Ka * qsign, Ka_inv * qsign
    FG_vol = Fa.dot(G_vol)
    out["S_ab"] = _sym_upper(c_vol * FG_vol.dot(Fb.T) * nn)
    out["T_ab"] = _sym_upper((c_vol * FG_vol.dot(Kb.T) + c_inv * Fa.dot(G_sa).dot(Kb_inv.T)) * nn)
    out["Ua_ab"] = c_inv * Fa.dot(G_sb).dot(Fb.T) * nn

    # right half-space (eta > 0) pieces
    Yh = aux_Bhalf_table(gdeg, Rm)
    out["HR_aa"] = _sym_upper(c_vol * Fa.dot(_gram(lay, _pmul(sysw["s_a"], sysw["s_b"]),
                                                   X, Yh)).dot(Fa.T) * nn)
    Yh0 = aux_Bhalf_table(gdeg, 0)
    out["HR_ab"] = c_vol * Fa.dot(_gram(lay, _pmul(sysw["s_a"], sysw["s_b"]), X, Yh0)).dot(Fb.T) * nn

    # median plane eta = 0: value (q = 0 coefficients) and d/deta (q = 1 minus R/2 value)
    at0 = lay.q == 0
    at1 = lay.q == 1
    g = Fa[:, at0]
    dg = Fa[:, at1] - half_R * Fa[:, at0]
    p0 = lay.p[at0]
    Hx = np.array(X, dtype=object)[p0[:, None] + p0[None, :]]
    out["FL"] = Rm * g.dot(Hx).dot(dg.T) * nn
    return out
