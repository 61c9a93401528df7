"""psi(t) = exp(-itH/2) delta_0 by three independent routes.

* ``chebyshev_evolve``: sum_n alpha_n(t) U_n(H/2) delta_0 with the vector
  recursion phi_n = H phi_{n-1} - phi_{n-2}.
* ``nonbacktracking_evolve``: sum_m a_m(t) H^(m) delta_0 with the
  nonbacktracking power recursion.
* ``dense_oracle_evolve``: full eigendecomposition (small lattices only).
"""
from dataclasses import dataclass
import enum
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .chebyshev import a_coeffs, alphas
from .constants import BLOWUP_FACTOR, DEFAULT_TOL, DENSE_CAP, SPECTRAL_SAFETY
from .errors import CapExceeded, DomainError, SpectralRangeError
from .lattice import origin_index, site_index

_ROUNDOFF = 1.0e-13


class Method(enum.Enum):
    ChebyshevRecursion = "chebyshev"
    NonbacktrackingSeries = "nonbacktracking"
    DenseOracle = "dense"


@dataclass(frozen=True)
class PropagatorResult:
    """Single-sample amplitude exp(-itH/2) delta_start.

    ``scale`` is the factor s by which the Chebyshev engine divided H/2 (and
    multiplied t); ``scale == 1`` means no rescaling was needed.
    """

    t: float
    psi: np.ndarray
    method: Method
    truncation: int
    residual_bound: float
    scale: float = 1.0

    @property
    def norm_defect(self):
        return abs(float(np.linalg.norm(self.psi)) - 1.0)


def _delta(H, start):
    cfg = H.cfg
    v = np.zeros(cfg.n_sites, dtype=np.complex128)
    idx = origin_index(cfg) if start is None else site_index(np.asarray(start), cfg)
    v[idx] = 1.0
    return v


def _check_t(t, tol=None):
    if not np.isfinite(t):
        raise DomainError(f"t must be finite, got {t}")
    if tol is not None and not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")


def spectral_norm(H, tol=1.0e-6):
    """Largest |eigenvalue| of H (ARPACK for large systems, dense below 64 sites)."""
    n = H.n_sites
    if n <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(H.to_dense()))))
    op = LinearOperator((n, n), matvec=H.apply, dtype=np.complex128)
    v0 = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    try:
        val = eigsh(op, k=1, which="LM", tol=tol, v0=v0, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        val = exc.eigenvalues
    return float(np.max(np.abs(val)))


def chebyshev_scale(H, safety=SPECTRAL_SAFETY):
    """s >= 1 such that the spectrum of H/(2s) lies in [-1/(1+safety), 1/(1+safety)].

    The norm estimate only needs to be good to well within the safety margin,
    hence the loose ARPACK tolerance.
    """
    return max(1.0, (1.0 + safety) * spectral_norm(H, tol=1.0e-3) / 2.0)


def chebyshev_evolve(H, t, tol=DEFAULT_TOL, start=None, scale=None):
    """Chebyshev series for exp(-itH/2) delta_start.

    Since sum_k alpha_k(t) U_k(xi) = exp(-it xi) is an identity of entire
    functions, exp(-itH/2) = sum_k alpha_k(ts) U_k(H/(2s)) holds for any s > 0.
    The engine picks s so that H/(2s) has spectrum safely inside [-1, 1]
    (``scale`` overrides); the result is the same evolution, not an
    approximation to it.
    """
    t = float(t)
    _check_t(t, tol)
    phi0 = _delta(H, start)
    if t == 0.0:
        return PropagatorResult(t, phi0, Method.ChebyshevRecursion, 0, 0.0, 1.0)
    s = chebyshev_scale(H) if scale is None else float(scale)
    if not s > 0:
        raise DomainError(f"scale must be > 0, got {s}")
    # exp(-itH/2) = exp(-i|t|H/2) conjugated termwise for t < 0: use alpha(|t|) on -H
    sign = 1.0 if t > 0 else -1.0
    cc = alphas(abs(t) * s, tol=tol)
    al = cc.alphas
    inv = sign / s

    psi = al[0] * phi0
    prev = phi0
    cur = inv * H.apply(phi0)
    if cc.K >= 1:
        psi = psi + al[1] * cur
    limit = BLOWUP_FACTOR
    for n in range(2, cc.K + 1):
        nxt = inv * H.apply(cur) - prev
        prev, cur = cur, nxt
        psi += al[n] * cur
        if not np.all(np.isfinite(cur)) or np.linalg.norm(cur) > limit * (n + 1):
            raise SpectralRangeError(
                f"Chebyshev recursion diverged at n={n} (scale {s:.6g}): spectrum of H/(2s) outside [-1, 1]")
    bound = cc.tail_abs * (cc.K + 65) + _ROUNDOFF * (cc.K + 1)
    return PropagatorResult(t, psi, Method.ChebyshevRecursion, cc.K, bound, s)


def nonbacktracking_power_apply(H, n, v):
    """H^(n) v from H^(0) = 1, H^(1) = H, H^(2) = H^2 - M/(M-1), H^(n) = H H^(n-1) - H^(n-2)."""
    n = int(n)
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    v = np.asarray(v, dtype=np.complex128)
    for _, cur in _nb_powers(H, v, n):
        pass
    return cur


def _nb_powers(H, v, n_max):
    """Yield (n, H^(n) v) for n = 0..n_max."""
    c = H.cfg.M / (H.cfg.M - 1)
    yield 0, v
    if n_max < 1:
        return
    p1 = H.apply(v)
    yield 1, p1
    if n_max < 2:
        return
    p2 = H.apply(p1) - c * v
    yield 2, p2
    prev, cur = p1, p2
    for n in range(3, n_max + 1):
        prev, cur = cur, H.apply(cur) - prev
        yield n, cur


def nonbacktracking_evolve(H, t, tol=DEFAULT_TOL, start=None):
    """sum_m a_m(t) H^(m) delta_start; H is used unscaled."""
    t = float(t)
    _check_t(t, tol)
    phi0 = _delta(H, start)
    if t == 0.0:
        return PropagatorResult(t, phi0, Method.NonbacktrackingSeries, 0, 0.0)
    ac = a_coeffs(abs(t), H.cfg.M, tol=tol)
    a = ac.a if t > 0 else np.conj(ac.a)
    psi = np.zeros_like(phi0)
    peak = biggest = 1.0
    for m, vec in _nb_powers(H, phi0, ac.K):
        psi += a[m] * vec
        # H^(m) may grow geometrically when ||H|| > 2; only the weighted term matters
        nrm = np.linalg.norm(vec)
        term = abs(a[m]) * nrm
        peak, biggest = max(peak, nrm), max(biggest, term)
        if not np.isfinite(term) or term > BLOWUP_FACTOR:
            raise SpectralRangeError(f"nonbacktracking series diverged at m={m}")
    bound = ac.tail_bound * peak * (ac.K + 65) + _ROUNDOFF * biggest * (ac.K + 1)
    return PropagatorResult(t, psi, Method.NonbacktrackingSeries, ac.K, bound)


@dataclass(frozen=True)
class DenseEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@lru_cache(maxsize=4)
def dense_eigen(H):
    """Full eigendecomposition of H (ascending eigenvalues, orthonormal columns)."""
    n = H.n_sites
    if n > DENSE_CAP:
        raise CapExceeded(f"dense eigendecomposition refused: N^d = {n} > {DENSE_CAP}", estimate=n)
    vals, vecs = np.linalg.eigh(H.to_dense())
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return DenseEigen(vals, vecs)


def dense_oracle_evolve(H, t, start=None):
    t = float(t)
    _check_t(t)
    eig = dense_eigen(H)
    phi0 = _delta(H, start)
    coef = eig.eigenvectors.conj().T @ phi0
    psi = eig.eigenvectors @ (np.exp(-0.5j * t * eig.eigenvalues) * coef)
    return PropagatorResult(t, psi, Method.DenseOracle, H.n_sites, _ROUNDOFF * H.n_sites)
