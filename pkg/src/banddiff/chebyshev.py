"""Bessel functions, Chebyshev coefficients of exp(-it xi) and their limit laws.

``alpha_k(t)`` are the coefficients of ``exp(-i t xi)`` in the Chebyshev
polynomials of the second kind ``U_k(xi)``; ``a_m(t)`` re-expand the same
function in nonbacktracking powers. The limit laws ``f`` and ``F`` describe
the distribution of ``k / t`` under the weights ``|alpha_k(t)|^2``.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from ._accel import njit
from .constants import (BESSEL_K_MAX, BESSEL_T_MAX, DEFAULT_TOL, K_CUBE,
                        K_OFFSET)
from .errors import DegenerateBandError, DomainError, OverflowGuardError

_RESCALE_AT = 1.0e250


def truncation_index(t):
    """K(t) = ceil(t + 12 t^(1/3) + 30)."""
    t = abs(float(t))
    return int(math.ceil(t + K_CUBE * t ** (1.0 / 3.0) + K_OFFSET))


def _check_range(kmax, t):
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"Bessel argument must be finite and >= 0, got t={t}")
    if kmax < 0:
        raise DomainError(f"Bessel order must be >= 0, got {kmax}")
    if kmax > BESSEL_K_MAX or t > BESSEL_T_MAX:
        raise OverflowGuardError(
            f"Bessel J_k(t) outside supported range (k <= {BESSEL_K_MAX}, t <= {BESSEL_T_MAX}); "
            f"got k={kmax}, t={t}")


@njit
def _miller(kmax, t, start, out):
    # backward recurrence J_{k-1} = (2k/t) J_k - J_{k+1}, seeded far past kmax
    jp = 0.0
    j = 1.0
    norm = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / t) * j - jp
        jp = j
        j = jm
        km = k - 1
        if km <= kmax:
            out[km] = j
        if km % 2 == 0 and km > 0:
            norm += 2.0 * j
        if abs(j) > _RESCALE_AT:
            j /= _RESCALE_AT
            jp /= _RESCALE_AT
            norm /= _RESCALE_AT
            for i in range(km, kmax + 1):
                out[i] /= _RESCALE_AT
    norm += j
    for i in range(kmax + 1):
        out[i] /= norm
    return out


@lru_cache(maxsize=256)
def _bessel_table(kmax, t):
    out = np.zeros(kmax + 1)
    if t == 0.0:
        out[0] = 1.0
    else:
        extra = int(math.ceil(2.0 * K_CUBE * t ** (1.0 / 3.0) + 2.0 * K_OFFSET))
        start = max(kmax, int(math.ceil(t))) + extra
        start += start % 2
        _miller(kmax, t, start, out)
    out.setflags(write=False)
    return out


def bessel_sequence(kmax, t):
    """J_0(t), ..., J_kmax(t) for t >= 0 (read-only array)."""
    kmax = int(kmax)
    t = float(t)
    _check_range(kmax, t)
    return _bessel_table(kmax, t)


def bessel_j(k, t):
    """J_k(t), integer k >= 0 and t >= 0."""
    return float(bessel_sequence(int(k), t)[int(k)])


def _phase(k):
    """(-i)^k for an integer array k."""
    return np.array([1.0, -1j, -1.0, 1j])[np.asarray(k) % 4]


def alpha_sequence(kmax, t):
    """alpha_0(t), ..., alpha_kmax(t)."""
    t = float(t)
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    k = np.arange(kmax + 1)
    if t == 0.0:
        out = np.zeros(kmax + 1, dtype=np.complex128)
        out[0] = 1.0
        return out
    J = bessel_sequence(kmax + 1, t)
    return 2.0 * _phase(k) * (k + 1) / t * J[1:]


def alpha(k, t):
    """alpha_k(t) = 2 (-i)^k (k+1)/t J_{k+1}(t); alpha_k(0) = delta_{k0}."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    return complex(alpha_sequence(int(k), t)[int(k)])


@dataclass(frozen=True)
class ChebCoefficients:
    """alpha_0..alpha_K with tail bounds.

    ``tail_bound`` bounds sum_{k > K} |alpha_k|^2 and ``tail_abs`` bounds
    sum_{k > K} |alpha_k|.
    """

    t: float
    alphas: np.ndarray
    K: int
    tail_bound: float
    tail_abs: float

    @property
    def weights(self):
        return np.abs(self.alphas) ** 2


def _tail(values):
    """Bound sum of a decaying tail from its first computed stretch."""
    mags = np.abs(values)
    total = float(mags.sum())
    a, b = mags[-2], mags[-1]
    if b == 0.0:
        return total
    r = b / a if a > 0 else 1.0
    if r >= 1.0:
        return float("inf")
    return total + b * r / (1.0 - r)


def alphas(t, K=None, tol=DEFAULT_TOL):
    """Coefficient table truncated at K (default: the K(t) rule, extended until the
    absolute tail drops below ``tol``)."""
    t = float(t)
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if K is None:
        K = truncation_index(t)
        fixed = False
    else:
        K = int(K)
        fixed = True
    while True:
        ext = K + 64
        seq = alpha_sequence(ext, t)
        tail_abs = _tail(seq[K + 1:])
        tail_sq = _tail(np.abs(seq[K + 1:]) ** 2)
        if fixed or tail_abs < tol or K > BESSEL_K_MAX // 2:
            break
        K += 32
    out = np.array(seq[:K + 1])
    out.setflags(write=False)
    return ChebCoefficients(t=t, alphas=out, K=K, tail_bound=tail_sq, tail_abs=tail_abs)


@dataclass(frozen=True)
class ACoefficients:
    """a_0..a_K for band size M; ``tail_bound`` bounds the truncation error of each a_m."""

    t: float
    M: int
    a: np.ndarray
    K: int
    tail_bound: float


def a_coeffs(t, M, tol=DEFAULT_TOL, K=None):
    """a_m(t) = sum_k alpha_{m+2k}(t) / (M-1)^k for m = 0..K.

    The alpha series is cut where its absolute tail drops below ``tol``; since
    (M-1)^(-k) <= 1 that same number bounds the error of every a_m, including
    the M = 2 case where the geometric factor gives no decay.
    """
    M = int(M)
    if M < 2:
        raise DegenerateBandError("a_m(t) needs M >= 2 (entry variance 1/(M-1))")
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    cc = alphas(t, tol=tol)
    kk = cc.K if K is None else max(int(K), cc.K)
    al = alpha_sequence(kk, t) if kk > cc.K else cc.alphas
    q = 1.0 / (M - 1)
    a = np.array(al, dtype=np.complex128)
    for m in range(kk - 2, -1, -1):
        a[m] = al[m] + q * a[m + 2]
    if K is not None:
        a = a[:int(K) + 1]
        kk = int(K)
    a.setflags(write=False)
    return ACoefficients(t=float(t), M=M, a=a, K=kk, tail_bound=cc.tail_abs)


def a_coeff(m, t, M, tol=DEFAULT_TOL):
    m = int(m)
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    return complex(a_coeffs(t, M, tol=tol, K=max(m, 0)).a[m])


# -- limit laws --------------------------------------------------------------

def limit_density(lam):
    """f(lambda) = (4/pi) lambda^2 / sqrt(1 - lambda^2) on [0, 1); +inf at 1; 0 beyond."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0):
        raise DomainError("limit density defined for lambda >= 0")
    out = np.zeros_like(lam)
    inside = lam < 1.0
    li = lam[inside]
    out[inside] = (4.0 / np.pi) * li ** 2 / np.sqrt(1.0 - li ** 2)
    out[lam == 1.0] = np.inf
    return out if out.ndim else float(out)


def limit_cdf(lam):
    """F(lambda) = (2/pi)(arcsin lambda - lambda sqrt(1 - lambda^2)) on [0, 1]; 1 beyond."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0):
        raise DomainError("limit law defined for lambda >= 0")
    c = np.minimum(lam, 1.0)
    out = (2.0 / np.pi) * (np.arcsin(c) - c * np.sqrt(1.0 - c ** 2))
    out = np.where(lam >= 1.0, 1.0, out)
    return out if out.ndim else float(out)


def empirical_cdf(t, lam):
    """F~_t(lambda) = sum_{n <= [lambda t]} |alpha_n(t)|^2."""
    t = float(t)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    lam = np.asarray(lam, dtype=np.float64)
    w = alphas(t).weights
    cum = np.cumsum(w)
    idx = np.floor(lam * t).astype(np.int64)
    out = np.where(idx < 0, 0.0, cum[np.clip(idx, 0, len(cum) - 1)])
    return out if out.ndim else float(out)


def empirical_density(t, lam):
    """f_t(lambda) = t |alpha_[t lambda](t)|^2."""
    t = float(t)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    lam = np.asarray(lam, dtype=np.float64)
    w = alphas(t).weights
    idx = np.floor(lam * t).astype(np.int64)
    inside = (idx >= 0) & (idx < len(w))
    out = np.where(inside, t * w[np.clip(idx, 0, len(w) - 1)], 0.0)
    return out if out.ndim else float(out)


def krasikov_bound(nu, t):
    """Upper bound on J_nu(t)^2, valid for nu > -1/2 and t > sqrt(mu + mu^(2/3))/2."""
    nu = np.asarray(nu, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    mu = (2 * nu + 1) * (2 * nu + 3)
    if np.any(nu <= -0.5) or np.any(t <= np.sqrt(mu + mu ** (2.0 / 3.0)) / 2):
        raise DomainError("Krasikov bound requires nu > -1/2 and t > sqrt(mu + mu^(2/3))/2")
    out = (4 / np.pi) * (4 * t ** 2 - (2 * nu + 1) * (2 * nu + 5)) / ((4 * t ** 2 - mu) ** 1.5 - mu)
    return out if out.ndim else float(out)


def limit_law_grid(lo=0.05, hi=0.95, step=0.005):
    """Audit grid of lambda values, endpoints included."""
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def limit_law_sup_error(t, grid):
    """sup over the grid of |F~_t(lambda) - F(lambda)|."""
    grid = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.abs(empirical_cdf(t, grid) - limit_cdf(grid))))
