"""Closed-form spatial cross-covariances with reflective asymmetric parts.

A cross-covariance pair (C_re, C_im) is indexed by a kernel class and a
parameter set for the two processes.  C_re is the usual symmetric part;
C_im is the odd component obtained by multiplying the (geometric-mean)
cross spectral density by -i*sign(<x, x_tilde>).  The full cross-covariance
between processes j and k is then

    C_jk(h) = Re(sigma_jk) * C_re(h) + Im(sigma_jk) * C_im(h).

Closed forms: squared-exponential and Cauchy for any dimension; Matern,
exponential and triangular for d = 1 (an FFT fallback covers Matern at
d <= 2).  Unequal process parameters contribute a normalizing prefactor so
that the pair stays a valid coherence-bounded cross-covariance.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sp

from . import specfun
from .errors import DomainError, ValidationError

__all__ = [
    "SpatialClass",
    "CrossCovParams",
    "SigmaMatrix",
    "SigmaReport",
    "cc_re",
    "cc_im",
    "cc_im_fft",
    "cc_re_fft",
    "FFTGrid",
    "FFTInterpolant",
    "spectral_density",
    "cross_spectral_density",
    "matern_im_interpolant",
    "validate_sigma",
    "assemble_multivariate_cov",
]

_CLASSES = ("sq_exp", "cauchy", "matern", "exponential", "triangular")
_HALF_INT_TOL = 1e-6


@dataclass(frozen=True)
class SpatialClass:
    """Kernel family tag plus spatial dimension."""

    kind: str
    dim: int = 1

    def __post_init__(self):
        if self.kind not in _CLASSES:
            raise ValidationError(f"unknown spatial class {self.kind!r}")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.kind in ("exponential", "triangular") and self.dim != 1:
            raise ValidationError(f"{self.kind} closed form requires dim=1")
        if self.kind == "matern" and self.dim > 2:
            raise ValidationError("matern supported for dim <= 2 (FFT fallback at dim 2)")


@dataclass(frozen=True)
class CrossCovParams:
    """Per-process parameters of a cross-covariance pair.

    a_j, a_k are inverse ranges; alpha_* Cauchy exponents; nu_* Matern
    smoothness.  x_tilde is the unit asymmetry direction (length = dim).
    Equal parameters reduce every derived prefactor to 1.
    """

    a_j: float
    a_k: float = None
    alpha_j: float = 1.0
    alpha_k: float = None
    nu_j: float = 1.0
    nu_k: float = None
    x_tilde: tuple = (1.0,)

    def __post_init__(self):
        if self.a_k is None:
            object.__setattr__(self, "a_k", self.a_j)
        if self.alpha_k is None:
            object.__setattr__(self, "alpha_k", self.alpha_j)
        if self.nu_k is None:
            object.__setattr__(self, "nu_k", self.nu_j)
        xt = np.atleast_1d(np.asarray(self.x_tilde, dtype=float))
        object.__setattr__(self, "x_tilde", tuple(xt.tolist()))
        if min(self.a_j, self.a_k) <= 0:
            raise ValidationError("inverse ranges must be positive")
        if min(self.alpha_j, self.alpha_k) <= 0 or min(self.nu_j, self.nu_k) <= 0:
            raise ValidationError("exponents must be positive")
        if abs(np.linalg.norm(xt) - 1.0) > 1e-12:
            raise ValidationError("x_tilde must be a unit vector")

    @property
    def alpha_jk(self):
        return 0.5 * (self.alpha_j + self.alpha_k)

    @property
    def nu_jk(self):
        return 0.5 * (self.nu_j + self.nu_k)

    def a_jk(self, kind):
        # geometric/harmonic combination for densities of exp(-|x|^2/(4a^2))
        # shape, root-mean-square for the Matern-type densities
        if kind in ("sq_exp", "cauchy"):
            return self.a_j * self.a_k / np.sqrt(0.5 * (self.a_j**2 + self.a_k**2))
        return np.sqrt(0.5 * (self.a_j**2 + self.a_k**2))

    def xt_array(self):
        return np.asarray(self.x_tilde, dtype=float)


def _as_lags(h, dim):
    """Normalize lag input to an array; report whether input was a single lag."""
    h = np.asarray(h, dtype=float)
    if dim == 1:
        return np.atleast_1d(h), h.ndim == 0
    if h.ndim == 1:
        if h.size != dim:
            raise ValidationError(f"lag vector must have length {dim}")
        return h[None, :], True
    if h.shape[-1] != dim:
        raise ValidationError(f"lag vectors must have trailing dim {dim}")
    return h, False


def _split_lag(params, h, dim):
    """(|h|^2, <h, x_tilde>, scalar_flag) with h broadcast over leading axes."""
    h, scalar = _as_lags(h, dim)
    xt = params.xt_array()
    if xt.size != dim:
        raise ValidationError("x_tilde dimension mismatch")
    if dim == 1:
        hh = h * h
        hx = h * xt[0]
    else:
        hh = np.sum(h * h, axis=-1)
        hx = h @ xt
    return hh, hx, scalar


def _prefactor(kind, params, d):
    a_jk = params.a_jk(kind)
    if kind == "sq_exp":
        return (a_jk / np.sqrt(params.a_j * params.a_k)) ** d
    if kind == "cauchy":
        ajk = params.alpha_jk
        return (
            a_jk ** (2 * ajk)
            / (params.a_j ** params.alpha_j * params.a_k ** params.alpha_k)
            * sp.gamma(ajk)
            / np.sqrt(sp.gamma(params.alpha_j) * sp.gamma(params.alpha_k))
        )
    if kind == "matern":
        njk = params.nu_jk
        return (
            params.a_j ** params.nu_j
            * params.a_k ** params.nu_k
            / a_jk ** (2 * njk)
            * sp.gamma(njk)
            / np.sqrt(sp.gamma(params.nu_j) * sp.gamma(params.nu_k))
        )
    if kind == "exponential":
        return np.sqrt(params.a_j * params.a_k) / a_jk
    if kind == "triangular":
        if params.a_j != params.a_k:
            raise DomainError("triangular class requires equal inverse ranges")
        return 1.0
    raise DomainError(f"unsupported class {kind}")


def _matern_check_nu(nu):
    if nu > 0.5 + _HALF_INT_TOL:
        frac = (nu - 0.5) - round(nu - 0.5)
        if abs(frac) < _HALF_INT_TOL:
            raise DomainError(
                f"matern asymmetric closed form undefined at half-integer nu={nu}; "
                "use the FFT fallback"
            )


def cc_re(cls: SpatialClass, params: CrossCovParams, h):
    """Symmetric cross-covariance part, unequal-parameter prefactor included."""
    kind, d = cls.kind, cls.dim
    hh, hx, scalar = _split_lag(params, h, d)
    pref = _prefactor(kind, params, d)
    a_jk = params.a_jk(kind)
    if kind == "sq_exp":
        out = pref * np.exp(-a_jk**2 * hh)
    elif kind == "cauchy":
        out = pref * (a_jk**2 * hh + 1.0) ** (-params.alpha_jk)
    elif kind == "matern":
        nu = params.nu_jk
        if abs(nu - 0.5) < _HALF_INT_TOL:
            out = pref * np.exp(-a_jk * np.sqrt(hh))
        else:
            x = a_jk * np.sqrt(hh)
            out = np.full(x.shape, pref)
            nz = x > 0
            out[nz] = pref * 2.0 ** (1 - nu) / sp.gamma(nu) * x[nz] ** nu * sp.kv(nu, x[nz])
    elif kind == "exponential":
        out = pref * np.exp(-a_jk * np.sqrt(hh))
    elif kind == "triangular":
        t = params.a_j * np.sqrt(hh)
        out = np.where(t < 1.0, 1.0 - t, 0.0)
    else:
        raise DomainError(f"unsupported class {kind}")
    return float(out[0]) if scalar else out


def _triangular_im(t):
    # Hilbert transform of the unit triangle; log-singular at |t| = 1
    out = np.zeros_like(t)
    nz = t != 0.0
    tv = t[nz]
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log(np.abs((1 + tv) / (1 - tv))) + tv * np.log(
            np.abs((tv * tv - 1) / (tv * tv))
        )
    out[nz] = val / np.pi
    return out


def _exponential_im(a, hx):
    x = a * np.abs(hx)
    return np.sign(hx) / np.pi * specfun.exp_scaled_e1_plus_ei(x)


def cc_im(cls: SpatialClass, params: CrossCovParams, h):
    """Reflective asymmetric cross-covariance part (odd in <h, x_tilde>).

    Overflow-safe evaluation: the squared-exponential form is computed as
    exp(-a^2(|h|^2 - <h,x>^2)) * [exp(-a^2 <h,x>^2) erfi(a <h,x>)], and the
    Cauchy form dispatches to special-function-free fast paths at
    alpha_jk in {1/2, 1}.
    """
    kind, d = cls.kind, cls.dim
    hh, hx, scalar = _split_lag(params, h, d)
    pref = _prefactor(kind, params, d)
    a_jk = params.a_jk(kind)
    if kind == "sq_exp":
        perp = np.maximum(hh - hx * hx, 0.0)
        out = pref * np.exp(-a_jk**2 * perp) * specfun.erfi_scaled(a_jk * hx)
    elif kind == "cauchy":
        alpha = params.alpha_jk
        q = a_jk**2 * hh + 1.0
        if abs(alpha - 1.0) < 1e-12:
            perp = np.maximum(hh - hx * hx, 0.0)
            out = pref * (a_jk * hx / q) / np.sqrt(a_jk**2 * perp + 1.0)
        elif abs(alpha - 0.5) < 1e-12:
            out = pref / np.sqrt(q) * (2.0 / np.pi) * np.arctanh(a_jk * hx / np.sqrt(q))
        else:
            z = a_jk**2 * hx * hx / q
            gam = sp.gamma(alpha + 0.5) / sp.gamma(alpha)
            out = (
                pref
                * q ** (-alpha)
                * (2.0 / np.sqrt(np.pi))
                * gam
                * (a_jk * hx / np.sqrt(q))
                * specfun.hyp2f1(0.5, alpha + 0.5, 1.5, z)
            )
    elif kind == "matern":
        if d != 1:
            raise DomainError("matern asymmetric closed form requires dim=1; use cc_im_fft")
        nu = params.nu_jk
        if abs(nu - 0.5) < _HALF_INT_TOL:
            out = pref * _exponential_im(a_jk, hx)
        else:
            _matern_check_nu(nu)
            x = a_jk * np.abs(hx)
            out = np.zeros_like(x)
            nz = x > 0
            coef = np.pi / (2.0**nu * sp.gamma(nu) * np.cos(np.pi * nu))
            out[nz] = coef * x[nz] ** nu * specfun.bessel_i_minus_struve(nu, x[nz])
            out = pref * np.sign(hx) * out
    elif kind == "exponential":
        out = pref * _exponential_im(a_jk, hx)
    elif kind == "triangular":
        out = _triangular_im(params.a_j * hx)
    else:
        raise DomainError(f"unsupported class {kind}")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# spectral densities (normalized so that int f = 1 for equal unit-sill pairs)
# ---------------------------------------------------------------------------


def spectral_density(kind, d, x_norm, a=1.0, alpha=1.0, nu=1.0):
    """Isotropic spectral density f(|x|) of the unit-variance kernel class."""
    r = np.asarray(x_norm, dtype=float)
    if kind == "sq_exp":
        return (2 * a * np.sqrt(np.pi)) ** (-d) * np.exp(-(r * r) / (4 * a * a))
    if kind == "cauchy":
        order = alpha - d / 2.0
        rr = np.maximum(r, 1e-300)
        return (
            (2 * np.sqrt(np.pi)) ** (-d)
            * a ** (-2 * alpha)
            / sp.gamma(alpha)
            * 2.0
            * (a * rr / 2.0) ** order
            * sp.kv(order, rr / a)
        )
    if kind in ("matern", "exponential"):
        nu_eff = 0.5 if kind == "exponential" else nu
        c = sp.gamma(nu_eff + d / 2.0) / (sp.gamma(nu_eff) * np.pi ** (d / 2.0))
        return c * a ** (2 * nu_eff) / (a * a + r * r) ** (nu_eff + d / 2.0)
    if kind == "triangular":
        if d != 1:
            raise DomainError("triangular density is 1-D")
        t = r / (2.0 * a)
        return np.sinc(t / np.pi) ** 2 / (2 * np.pi * a)
    raise DomainError(f"no spectral density for {kind}")


def cross_spectral_density(cls, params, x_norm):
    """Cross spectral density of the pair: the combined-parameter kernel
    density scaled by the unequal-parameter prefactor.

    For the squared-exponential class this equals sqrt(f_j f_k) exactly
    (geometric means of Gaussians are Gaussian); for the other classes it
    is the density the closed forms are built from, with coherence
    sqrt(f_j f_k) bounding it pointwise."""
    kind, d = cls.kind, cls.dim
    pref = _prefactor(kind, params, d)
    return pref * spectral_density(
        kind, d, x_norm, params.a_jk(kind), params.alpha_jk, params.nu_jk
    )


# ---------------------------------------------------------------------------
# FFT fallback / oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FFTGrid:
    """Regular midpoint frequency grid, symmetric about the origin.

    n points per axis covering [-extent, extent]; the midpoint offset keeps
    integrable spectral singularities at x = 0 off the grid.
    """

    n: int = 4096
    extent: float = 40.0

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValidationError("grid size must be a power of two >= 8")
        if self.extent <= 0:
            raise ValidationError("extent must be positive")


def default_fft_grid(cls, params):
    a_min = min(params.a_jk(cls.kind), params.a_j, params.a_k)
    if cls.dim == 1:
        return FFTGrid(n=4096, extent=40.0 / a_min)
    return FFTGrid(n=1024, extent=40.0 / a_min)


def _midpoint_ift(g, dx, axis=-1):
    """sum_k exp(i h_m x_k) g(x_k) dx on midpoint nodes x_k = (k - n/2 + 1/2) dx.

    Returns complex values at lags h_m = (m - n/2) * 2 pi / (n dx), m = 0..n-1,
    transformed along the requested axis.
    """
    n = g.shape[axis]
    k = np.arange(n)
    shape = [1] * np.ndim(g)
    shape[axis] = n
    alt = ((-1.0) ** k).reshape(shape)
    base = np.fft.ifft(alt * g, axis=axis) * n * dx
    m = np.arange(n)
    phase = (np.exp(-2j * np.pi * m * (n / 2 - 0.5) / n) * np.exp(1j * np.pi * (n / 2 - 0.5))).reshape(shape)
    return base * phase


def _lag_axis(n, dx):
    return (np.arange(n) - n / 2) * 2.0 * np.pi / (n * dx)


def cc_im_fft(cls: SpatialClass, params: CrossCovParams, grid: FFTGrid = None):
    """Gridded asymmetric part by discrete Fourier inversion of
    -i sign(<x, x_tilde>) sqrt(f_j f_k): the production fallback for the
    Matern class at d = 2 and the numerical oracle for every closed form.

    Returns (lag_axes, values); d <= 2.
    """
    d = cls.dim
    if d > 2:
        raise DomainError("cc_im_fft supports d <= 2")
    if grid is None:
        grid = default_fft_grid(cls, params)
    n, extent = grid.n, grid.extent
    dx = 2.0 * extent / n
    x1 = (np.arange(n) - n / 2 + 0.5) * dx
    xt = params.xt_array()
    if d == 1:
        f = cross_spectral_density(cls, params, np.abs(x1))
        vals = np.imag(_midpoint_ift(np.sign(x1 * xt[0]) * f, dx))
        return (_lag_axis(n, dx),), vals
    X1, X2 = np.meshgrid(x1, x1, indexing="ij")
    f = cross_spectral_density(cls, params, np.sqrt(X1**2 + X2**2))
    g = np.sign(X1 * xt[0] + X2 * xt[1]) * f
    outer = _midpoint_ift(_midpoint_ift(g.astype(complex), dx, axis=1), dx, axis=0)
    ax = _lag_axis(n, dx)
    return (ax, ax), np.imag(outer)


def cc_re_fft(cls: SpatialClass, params: CrossCovParams, grid: FFTGrid = None):
    """Gridded symmetric part from the same discrete inversion (oracle use)."""
    d = cls.dim
    if d > 2:
        raise DomainError("cc_re_fft supports d <= 2")
    if grid is None:
        grid = default_fft_grid(cls, params)
    n, extent = grid.n, grid.extent
    dx = 2.0 * extent / n
    x1 = (np.arange(n) - n / 2 + 0.5) * dx
    if d == 1:
        f = cross_spectral_density(cls, params, np.abs(x1))
        return (_lag_axis(n, dx),), np.real(_midpoint_ift(f, dx))
    X1, X2 = np.meshgrid(x1, x1, indexing="ij")
    f = cross_spectral_density(cls, params, np.sqrt(X1**2 + X2**2)).astype(complex)
    outer = _midpoint_ift(_midpoint_ift(f, dx, axis=1), dx, axis=0)
    ax = _lag_axis(n, dx)
    return (ax, ax), np.real(outer)


class FFTInterpolant:
    """Bilinear interpolant over a cc_im_fft / cc_re_fft output grid."""

    def __init__(self, axes, values):
        self.axes = axes
        self.values = values
        self._lo = [float(ax[0]) for ax in axes]
        self._step = [float(ax[1] - ax[0]) for ax in axes]

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        if len(self.axes) == 1:
            idx = np.clip((h - self._lo[0]) / self._step[0], 0, len(self.axes[0]) - 2)
            i0 = np.floor(idx).astype(int)
            w = idx - i0
            return (1 - w) * self.values[i0] + w * self.values[i0 + 1]
        fx = np.clip((h[..., 0] - self._lo[0]) / self._step[0], 0, len(self.axes[0]) - 2)
        fy = np.clip((h[..., 1] - self._lo[1]) / self._step[1], 0, len(self.axes[1]) - 2)
        i0 = np.floor(fx).astype(int)
        j0 = np.floor(fy).astype(int)
        wx = fx - i0
        wy = fy - j0
        v = self.values
        return (
            (1 - wx) * (1 - wy) * v[i0, j0]
            + wx * (1 - wy) * v[i0 + 1, j0]
            + (1 - wx) * wy * v[i0, j0 + 1]
            + wx * wy * v[i0 + 1, j0 + 1]
        )


@lru_cache(maxsize=32)
def _cached_matern_im_interp(dim, a_j, a_k, nu_j, nu_k, x_tilde, n, extent):
    cls = SpatialClass("matern", dim)
    params = CrossCovParams(a_j=a_j, a_k=a_k, nu_j=nu_j, nu_k=nu_k, x_tilde=x_tilde)
    axes, vals = cc_im_fft(cls, params, FFTGrid(n=n, extent=extent))
    return FFTInterpolant(axes, vals)


def matern_im_interpolant(cls, params, grid=None):
    """Cached FFT interpolant for the Matern asymmetric part (d <= 2)."""
    if grid is None:
        grid = default_fft_grid(cls, params)
    return _cached_matern_im_interp(
        cls.dim, params.a_j, params.a_k, params.nu_j, params.nu_k,
        params.x_tilde, grid.n, grid.extent,
    )


# ---------------------------------------------------------------------------
# sigma validity and matrix assembly
# ---------------------------------------------------------------------------


@dataclass
class SigmaMatrix:
    """Hermitian coefficient matrix of the multivariate model.

    entries[j, k] = sigma_jk (complex off the diagonal); directions, when
    given, maps frozenset({j, k}) to the per-pair unit asymmetry vector.
    """

    entries: np.ndarray
    directions: dict = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)


@dataclass
class SigmaReport:
    valid: bool
    reason: str = ""
    min_eigenvalue: float = np.nan


def _sign_patterns(directions, dim):
    """Realizable sign vectors of (sign<x, d_i>)_i over x in R^dim minus the
    hyperplane arrangement."""
    dirs = np.asarray(directions, dtype=float)
    if dim == 1:
        s = np.sign(dirs[:, 0])
        return [s, -s]
    if dim == 2:
        # hyperplane {<x, d> = 0} has angle angle(d) + pi/2 (mod pi); the
        # chambers are the sectors between consecutive hyperplane angles
        phis = np.unique(np.mod([np.arctan2(v[1], v[0]) + np.pi / 2 for v in dirs], np.pi))
        bounds = np.concatenate([phis, [phis[0] + np.pi]])
        pats = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            theta = 0.5 * (lo + hi)
            x = np.array([np.cos(theta), np.sin(theta)])
            s = np.sign(dirs @ x)
            if np.all(s != 0):
                pats.append(s)
                pats.append(-s)
        return pats
    # d >= 3: dense random sampling of chambers (sufficient in practice)
    rng = np.random.default_rng(0)
    xs = rng.normal(size=(4096, dim))
    pats = np.unique(np.sign(xs @ dirs.T), axis=0)
    return [p for p in pats if np.all(p != 0)]


def validate_sigma(sigma: SigmaMatrix, dim: int = 2, tol: float = 1e-10) -> SigmaReport:
    """Check Hermitian positive-definiteness of sigma and, with differing
    per-pair asymmetry directions at p >= 3, positive-definiteness of
    [Re(sigma_jk) - i sign(<x, xt_jk>) Im(sigma_jk)] over every realizable
    sign pattern of the direction arrangement."""
    S = sigma.entries
    p = S.shape[0]
    if S.ndim != 2 or S.shape != (p, p):
        raise ValidationError("sigma must be square")
    if not np.allclose(S, S.conj().T, atol=1e-12):
        return SigmaReport(False, "not Hermitian")
    if np.any(np.abs(np.imag(np.diag(S))) > 1e-14) or np.any(np.real(np.diag(S)) <= 0):
        return SigmaReport(False, "diagonal must be real positive")
    ev = np.linalg.eigvalsh(S)
    if ev[0] <= tol * max(abs(ev[-1]), 1.0):
        return SigmaReport(False, "sigma not positive definite", float(ev[0]))
    min_ev = float(ev[0])

    dirs = sigma.directions
    if dirs and p >= 3:
        keyed = {fs: tuple(np.round(np.asarray(v, float), 14)) for fs, v in dirs.items()}
        uniq = sorted(set(keyed.values()))
        if len(uniq) > 1:
            for pattern in _sign_patterns([np.asarray(v) for v in uniq], dim):
                signs = dict(zip(uniq, pattern))
                M = np.array(S, dtype=complex)
                for fs, key in keyed.items():
                    j, k = sorted(fs)
                    M[j, k] = S[j, k].real - 1j * signs[key] * S[j, k].imag
                    M[k, j] = np.conj(M[j, k])
                evp = np.linalg.eigvalsh(M)
                if evp[0] <= -tol:
                    return SigmaReport(
                        False,
                        "direction sign pattern yields non-PD coefficient matrix",
                        float(evp[0]),
                    )
                min_ev = min(min_ev, float(evp[0]))
    return SigmaReport(True, "", min_ev)


def _pair_params(proc_params, j, k, x_tilde):
    pj, pk = proc_params[j], proc_params[k]
    return CrossCovParams(
        a_j=pj.get("a", 1.0), a_k=pk.get("a", 1.0),
        alpha_j=pj.get("alpha", 1.0), alpha_k=pk.get("alpha", 1.0),
        nu_j=pj.get("nu", 1.0), nu_k=pk.get("nu", 1.0),
        x_tilde=tuple(np.atleast_1d(x_tilde)),
    )


def assemble_multivariate_cov(
    locations,
    process_ids,
    cls: SpatialClass,
    proc_params,
    sigma: SigmaMatrix,
    nugget=0.0,
    default_x_tilde=None,
):
    """Dense covariance matrix of a multivariate spatial dataset.

    Entry for observations (s1, j), (s2, k) is
    Re(sigma_jk) C_re(h) + Im(sigma_jk) C_im(h) with h = s2 - s1, plus a
    per-process nugget on the diagonal.  proc_params is a sequence of dicts
    ({'a': .., 'alpha': .., 'nu': ..}) indexed by integer process id.
    """
    locs = np.asarray(locations, dtype=float)
    if locs.ndim == 1:
        locs = locs[:, None]
    if locs.shape[1] != cls.dim:
        raise ValidationError("locations dimension mismatch")
    ids = np.asarray(process_ids)
    n = locs.shape[0]
    p = sigma.entries.shape[0]
    report = validate_sigma(sigma, dim=cls.dim)
    if not report.valid:
        raise ValidationError(f"invalid sigma: {report.reason}")
    nug = np.broadcast_to(np.asarray(nugget, dtype=float), (p,))
    if default_x_tilde is None:
        default_x_tilde = np.zeros(cls.dim)
        default_x_tilde[0] = 1.0

    lag = locs[None, :, :] - locs[:, None, :]  # h = s2 - s1 at [i1, i2]
    if cls.dim == 1:
        lag = lag[..., 0]
    K = np.zeros((n, n))
    for j in range(p):
        for k in range(p):
            mask_j = ids == j
            mask_k = ids == k
            if not mask_j.any() or not mask_k.any():
                continue
            block = lag[np.ix_(mask_j, mask_k)]
            sjk = sigma.entries[j, k]
            xt = default_x_tilde
            if sigma.directions:
                xt = sigma.directions.get(frozenset({j, k}), default_x_tilde)
            params = _pair_params(proc_params, j, k, xt)
            val = np.real(sjk) * cc_re(cls, params, block)
            if j != k and abs(np.imag(sjk)) > 0:
                if cls.kind == "matern" and cls.dim == 2:
                    cim = matern_im_interpolant(cls, params)(block)
                else:
                    cim = cc_im(cls, params, block)
                val = val + np.imag(sjk) * cim
            K[np.ix_(mask_j, mask_k)] += val
    K[np.diag_indices(n)] += nug[ids]
    return K
