"""Scalar special functions used by the closed-form covariances.

Everything here is a thin, numerically careful layer over ``scipy.special``:
the covariance kernels only ever need these functions through stable *scaled*
combinations (``exp(-z^2) erfi(z)``, ``exp(x) E_1(x) + exp(-x) Ei(x)``,
``I_nu(x) - L_{-nu}(x)``), and the raw functions overflow long before the
combinations do.  All functions accept scalars or ndarrays and are pure and
thread-safe.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sp

from .errors import DomainError

__all__ = [
    "SpecFunStatus",
    "SpecFunResult",
    "dawson",
    "erfi_scaled",
    "erf",
    "gauss_2f1",
    "hyp2f1",
    "bessel_k",
    "bessel_i",
    "struve_l",
    "bessel_i_minus_struve",
    "expint_e1",
    "expint_ei",
    "exp_scaled_e1_plus_ei",
]

_SQRT_PI = np.sqrt(np.pi)
_TWO_OVER_SQRT_PI = 2.0 / _SQRT_PI


class SpecFunStatus(Enum):
    OK = "ok"
    REDUCED_ACCURACY = "reduced-accuracy"
    DOMAIN_ERROR = "domain-error"


@dataclass(frozen=True)
class SpecFunResult:
    value: float
    status: SpecFunStatus = SpecFunStatus.OK

    def __post_init__(self):
        if self.status is not SpecFunStatus.DOMAIN_ERROR and not np.isfinite(self.value):
            object.__setattr__(self, "status", SpecFunStatus.REDUCED_ACCURACY)


def dawson(z):
    """Dawson's integral D(z) = exp(-z^2) int_0^z exp(t^2) dt.

    Odd, bounded (max ~0.5410 at z ~ 0.9241), asymptotically 1/(2z).
    """
    return sp.dawsn(z)


def erfi_scaled(z):
    """exp(-z^2) * erfi(z) = (2/sqrt(pi)) * D(z).

    The only form of erfi the kernels use; bounded for all real z while
    erfi itself overflows past |z| ~ 26.6.
    """
    return _TWO_OVER_SQRT_PI * sp.dawsn(z)


def erf(z):
    return sp.erf(z)


def hyp2f1(a, b, c, z):
    """Gauss hypergeometric 2F1, vectorized, no domain checks.

    Internal fast path for the kernels, which guarantee z < 1 and valid c
    by construction.
    """
    return sp.hyp2f1(a, b, c, z)


def gauss_2f1(a, b, c, z):
    """Gauss hypergeometric function with domain checking.

    Returns a SpecFunResult.  In-scope arguments for the covariance kernels
    always have z < 1 (z <= 0 for the space-time forms, 0 <= z < 1 for the
    spatial Cauchy form), and c = 3/2.

    status is domain-error for z >= 1 or c a nonpositive integer;
    reduced-accuracy when the evaluation does not produce a finite value
    (z extremely close to 1 with large b).
    """
    if z >= 1.0:
        return SpecFunResult(np.nan, SpecFunStatus.DOMAIN_ERROR)
    if c <= 0 and float(c).is_integer():
        return SpecFunResult(np.nan, SpecFunStatus.DOMAIN_ERROR)
    val = float(sp.hyp2f1(a, b, c, z))
    if not np.isfinite(val):
        return SpecFunResult(val, SpecFunStatus.REDUCED_ACCURACY)
    return SpecFunResult(val, SpecFunStatus.OK)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError("bessel_k requires x > 0")
    return sp.kv(nu, x)


def bessel_i(nu, x):
    """Modified Bessel function of the first kind I_nu(x)."""
    return sp.iv(nu, x)


def _struve_l_series(nu, x, max_terms=200):
    # ascending series L_nu(x) = sum_k (x/2)^{nu+2k+1} / [Gamma(k+3/2) Gamma(k+nu+3/2)]
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    out = np.zeros_like(x)
    term = half ** (nu + 1.0) / (sp.gamma(1.5) * sp.gamma(nu + 1.5))
    out += term
    h2 = half * half
    for k in range(1, max_terms):
        term = term * h2 / ((k + 0.5) * (k + nu + 0.5))
        out += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(out) + 1e-300):
            break
    return out


def _i_minus_struve_asymptotic(nu, x, max_terms=25):
    # I_nu(x) - L_{-nu}(x) ~ (cos(pi nu)/pi^2) sum_k G(k+1/2) G(nu+k+1/2) (x/2)^{-nu-2k-1},
    # all terms positive; truncated at the smallest term.
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    pref = np.cos(np.pi * nu) / np.pi**2
    term = sp.gamma(0.5) * sp.gamma(nu + 0.5) * half ** (-nu - 1.0)
    out = term.copy()
    for k in range(1, max_terms):
        ratio = (k - 0.5) * (nu + k - 0.5) / (half * half)
        if np.all(ratio >= 1.0):
            break
        term = term * np.where(ratio < 1.0, ratio, 0.0)
        out += term
    return pref * out


def bessel_i_minus_struve(nu, x, switch=18.0):
    """I_nu(x) - L_{-nu}(x), stable for all x >= 0.

    Direct subtraction suffers catastrophic cancellation past x ~ 18 (both
    terms grow like e^x while the difference decays like x^{-nu-1}); beyond
    the switch the asymptotic expansion of the difference is used instead.
    """
    x = np.asarray(x, dtype=float)
    small = x <= switch
    out = np.empty_like(x)
    if np.any(small):
        xs = x[small]
        out[small] = sp.iv(nu, xs) - _struve_l_series(-nu, xs)
    if np.any(~small):
        out[~small] = _i_minus_struve_asymptotic(nu, x[~small])
    return out if out.ndim else float(out)


def struve_l(nu, x, switch=30.0):
    """Modified Struve function L_nu(x).

    Ascending series (term cap 200) up to the switch point; for larger x,
    recovered from the stable Bessel-minus-Struve difference so the two
    exponentially large contributions never meet in floating point.

    Orders nu in {-3/2, -5/2, ...} hit a Gamma pole in the series (there
    L_nu degenerates to a Bessel function) and are rejected.
    """
    if nu < -1.0 and abs((nu + 0.5) - round(nu + 0.5)) < 1e-12:
        raise DomainError("struve_l: order in {-3/2, -5/2, ...} not supported")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= switch
    if np.any(small):
        out[small] = _struve_l_series(nu, x[small])
    if np.any(~small):
        xl = x[~small]
        out[~small] = sp.iv(-nu, xl) - _i_minus_struve_asymptotic(-nu, xl)
    return out if out.ndim else float(out)


def expint_e1(x):
    """Exponential integral E_1(x), x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError("expint_e1 requires x > 0")
    return sp.exp1(x)


def expint_ei(x):
    """Exponential integral Ei(x), x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError("expint_ei requires x > 0")
    return sp.expi(x)


def _asym_series(x, signs, max_terms=30):
    # sum_k s^k k! / x^{k+1}, truncated at the smallest term
    x = np.asarray(x, dtype=float)
    term = 1.0 / x
    out = term.copy()
    for k in range(1, max_terms):
        ratio = signs * k / x
        term = term * np.where(np.abs(ratio) < 1.0, ratio, 0.0)
        out += term
    return out


def exp_scaled_e1_plus_ei(x):
    """exp(x) E_1(x) + exp(-x) Ei(x) for x > 0, overflow-free.

    This is the combination appearing in the exponential-covariance
    asymmetric part.  Direct evaluation holds to x ~ 500 (past which
    exp1/expi run into the underflow/overflow margins); beyond that both
    scaled terms are summed from their asymptotic series
    sum_k (-+1)^k k!/x^{k+1}.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    zero = x == 0
    direct = (~zero) & (x <= 500.0)
    far = x > 500.0
    out[zero] = 0.0
    if np.any(direct):
        xd = x[direct]
        out[direct] = np.exp(xd) * sp.exp1(xd) + np.exp(-xd) * sp.expi(xd)
    if np.any(far):
        xf = x[far]
        out[far] = _asym_series(xf, -1.0) + _asym_series(xf, 1.0)
    return out if out.ndim else float(out)
