"""Transition profiles rho(t, x): Monte Carlo estimates, the ladder (classical walk)
prediction, and the macroscopic heat-kernel superposition L(T, X)."""
from dataclasses import dataclass, field
import hashlib
import math
import warnings

import numpy as np

from . import kernels
from .chebyshev import alphas, limit_density
from .constants import DEFAULT_TOL, LIMIT_PROFILE_NODES, TEST_FUNCTIONS
from .ensemble import EnsembleKind, sample
from .errors import BandDiffError, ConfigError, DomainError, SampleFailure
from .lattice import all_sites, band_shell, origin_index, shell_neighbors, site_index, canonical
from .propagator import chebyshev_evolve, chebyshev_scale, nonbacktracking_evolve

MASS_TOL = 1.0e-8


def derive_seed(master, module, index):
    """Stable 64-bit stream key for (master seed, module name, sample index)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{int(master)}:{module}:{int(index)}".encode())
    return int.from_bytes(h.digest(), "little")


class _Neumaier:
    """Compensated elementwise summation of equally shaped arrays."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, x):
        t = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.c += np.where(big, (self.s - t) + x, (x - t) + self.s)
        self.s = t

    @property
    def total(self):
        return self.s + self.c


@dataclass(frozen=True)
class DiffusionProfile:
    cfg: object
    t: float
    rho: np.ndarray
    n_samples: int
    stderr: np.ndarray
    seed: int = 0
    kind: str = ""

    @property
    def mass(self):
        return float(self.rho.sum())


def _evolve(H, t, method, tol):
    if method == "chebyshev":
        return chebyshev_evolve(H, t, tol=tol, scale=chebyshev_scale(H) if t else 1.0)
    if method == "nonbacktracking":
        return nonbacktracking_evolve(H, t, tol=tol)
    raise ConfigError(f"unknown propagation method {method!r}")


def sample_amplitudes(cfg, kind, t, n_samples, seed, method="chebyshev", tol=DEFAULT_TOL):
    """Yield (i, |psi_i|^2) for independent samples; failures carry the sample index."""
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    kind = EnsembleKind.parse(kind)
    for i in range(n_samples):
        try:
            H = sample(cfg, kind, derive_seed(seed, "diffusion", i))
            res = _evolve(H, t, method, tol)
            p = np.abs(res.psi) ** 2
            defect = abs(p.sum() - 1.0)
            if not defect <= MASS_TOL:
                raise BandDiffError(f"unitarity defect {defect:.3e} exceeds {MASS_TOL:g}")
        except BandDiffError as exc:
            raise SampleFailure(i, exc) from exc
        yield i, p


def estimate_rho(cfg, kind, t, n_samples, seed, method="chebyshev", tol=DEFAULT_TOL):
    """Monte Carlo mean of |<delta_x, exp(-itH/2) delta_0>|^2 with per-site standard errors."""
    n = cfg.n_sites
    s1, s2 = _Neumaier(n), _Neumaier(n)
    for _, p in sample_amplitudes(cfg, kind, t, n_samples, seed, method, tol):
        s1.add(p)
        s2.add(p * p)
    mean = s1.total / n_samples
    if n_samples > 1:
        var = np.maximum(s2.total / n_samples - mean ** 2, 0.0) * n_samples / (n_samples - 1)
        err = np.sqrt(var / n_samples)
    else:
        err = np.zeros(n)
    return DiffusionProfile(cfg, float(t), mean, n_samples, err, seed, EnsembleKind.parse(kind).value)


# -- classical walks ---------------------------------------------------------

def _delta0(cfg, dtype):
    v = np.zeros(cfg.n_sites, dtype=dtype)
    v[origin_index(cfg)] = 1
    return v


def path_count(cfg, n):
    """P_x(n): fraction of the M^n shell walks of length n that end at x."""
    n = int(n)
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    nb = shell_neighbors(cfg)
    p = _delta0(cfg, np.float64)
    for _ in range(n):
        p = kernels.shell_convolve(p, nb) / cfg.M
    return p


def path_counts(cfg, n_max):
    """Yield (n, P(n)) for n = 0..n_max."""
    nb = shell_neighbors(cfg)
    p = _delta0(cfg, np.float64)
    yield 0, p
    for n in range(1, n_max + 1):
        p = kernels.shell_convolve(p, nb) / cfg.M
        yield n, p


def d_ell_table(cfg, ell):
    """D_l(0, x) for every site x, as exact integers (object dtype once M^l overflows int64)."""
    ell = int(ell)
    if ell < 0:
        raise DomainError(f"l must be >= 0, got {ell}")
    dtype = np.int64 if ell * math.log2(cfg.M) < 62 else object
    nb = shell_neighbors(cfg)
    p = _delta0(cfg, dtype)
    if dtype is object:
        p = np.array([int(v) for v in p], dtype=object)
    for _ in range(ell):
        p = kernels.shell_convolve(p, nb)
    return p


def d_ell(cfg, ell, y, z):
    """D_l(y, z): number of l-step shell walks from y to z."""
    diff = canonical(np.asarray(z) - np.asarray(y), cfg)
    return int(d_ell_table(cfg, ell)[site_index(diff, cfg)])


def ladder_prediction(cfg, t, tol=DEFAULT_TOL):
    """sum_n |alpha_n(t)|^2 P_x(n) over n <= K(t)."""
    t = float(t)
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    w = alphas(t, tol=tol).weights
    out = np.zeros(cfg.n_sites)
    for n, p in path_counts(cfg, len(w) - 1):
        out += w[n] * p
    return out


def shell_second_moment(cfg):
    """E|A|^2 for A uniform on the band shell."""
    sh = band_shell(cfg).astype(np.float64)
    return float(np.mean(np.sum(sh ** 2, axis=1)))


# -- continuum objects -------------------------------------------------------

def _as_points(X, d):
    X = np.asarray(X, dtype=np.float64)
    if d == 1 and (X.ndim == 0 or X.shape[-1] != 1):
        X = X[..., None]
    if X.shape[-1] != d:
        raise DomainError(f"points must have trailing dimension {d}")
    return X


def heat_kernel(T, X, d):
    """G(T, X) = ((d+2)/(2 pi T))^(d/2) exp(-(d+2)|X|^2/(2T))."""
    T = np.asarray(T, dtype=np.float64)
    if np.any(T <= 0):
        raise DomainError("heat kernel needs T > 0")
    r2 = np.sum(_as_points(X, d) ** 2, axis=-1)
    out = ((d + 2) / (2 * np.pi * T)) ** (d / 2) * np.exp(-(d + 2) * r2 / (2 * T))
    return out if np.ndim(out) else float(out)


def _theta_rule(nodes):
    """Nodes/weights on v in [0, 1] for int_0^1 f(lam) g(lam) dlam.

    lam = sin(theta) removes the inverse square root at lam = 1 and
    theta = (pi/2) v^2 smooths the lam -> 0 end, where G(lam T, 0) ~ lam^(-d/2).
    Returns (lam, weight) with f(lam) dlam already folded into the weight.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    v = 0.5 * (x + 1.0)
    wv = 0.5 * w
    theta = 0.5 * np.pi * v ** 2
    dtheta = np.pi * v
    lam = np.sin(theta)
    # f(sin th) cos th = (4/pi) sin^2 th
    weight = wv * dtheta * (4.0 / np.pi) * lam ** 2
    return lam, weight


def limit_profile(T, X, d, nodes=LIMIT_PROFILE_NODES):
    """L(T, X) = int_0^1 f(lam) G(lam T, X) dlam by Gauss-Legendre quadrature."""
    if not T > 0:
        raise DomainError("limit profile needs T > 0")
    lam, weight = _theta_rule(nodes)
    pts = _as_points(X, d)
    r2 = np.sum(pts ** 2, axis=-1)[..., None]
    lt = lam * T
    g = ((d + 2) / (2 * np.pi * lt)) ** (d / 2) * np.exp(-(d + 2) * r2 / (2 * lt))
    out = g @ weight
    return out if np.ndim(out) else float(out)


# -- test functions ----------------------------------------------------------

FAR_WIDTH = 0.1


def test_function(name):
    """Named bounded continuous test functions phi(X) on R^d (X has trailing axis d)."""
    if name == "one":
        return lambda X: np.ones(X.shape[:-1])
    if name == "x":
        return lambda X: X[..., 0]
    if name == "gauss":
        return lambda X: np.exp(-np.sum(X ** 2, axis=-1))
    if name == "cos":
        return lambda X: np.cos(X[..., 0])
    if name == "far":
        return lambda X: 0.5 * (1.0 + np.tanh((np.sqrt(np.sum(X ** 2, axis=-1)) - 1.0) / FAR_WIDTH))
    raise ConfigError(f"unknown test function {name!r}; choose from {TEST_FUNCTIONS}")


def gaussian_expectation(phi, var, d, nodes=160):
    """E phi(X) for X ~ N(0, var 1_d), by tensor Gauss-Hermite (d <= 3)."""
    if d > 3:
        raise DomainError("Gaussian expectation implemented for d <= 3")
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(len(pts))
    for k in range(d):
        wts = wts * np.meshgrid(*([w] * d), indexing="ij")[k].ravel()
    var = np.atleast_1d(np.asarray(var, dtype=np.float64))
    vals = np.array([wts @ phi(np.sqrt(v) * pts) for v in var])
    return vals


def limit_functional(T, phi, d, nodes=LIMIT_PROFILE_NODES):
    """int L(T, X) phi(X) dX = int_0^1 f(lam) E[phi(X_lam)] dlam, X_lam ~ N(0, lam T/(d+2))."""
    if not T > 0:
        raise DomainError("T must be > 0")
    lam, weight = _theta_rule(nodes)
    g = gaussian_expectation(phi, lam * T / (d + 2), d)
    return float(weight @ g)


# -- scaling and the main comparison -----------------------------------------

@dataclass(frozen=True)
class ScalingParams:
    kappa: float
    T: float
    W: int
    d: int
    eta: float = field(init=False)
    t: float = field(init=False)
    s: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.kappa < 1.0 / 3.0:
            raise ConfigError(f"kappa must lie in (0, 1/3), got {self.kappa}")
        if self.T < 0:
            raise ConfigError(f"T must be >= 0, got {self.T}")
        eta = float(self.W) ** (self.d * self.kappa)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "t", eta * self.T)
        object.__setattr__(self, "s", float(self.W) ** (1.0 + self.d * self.kappa / 2.0))


def rescaled_sites(cfg, s):
    return all_sites(cfg).astype(np.float64) / s


@dataclass(frozen=True)
class Theorem1Result:
    name: str
    lhs: float
    rhs: float
    stderr: float
    n_samples: int

    @property
    def gap(self):
        return abs(self.lhs - self.rhs)


def theorem1_batch(cfg, kind, kappa, T, n_samples, seed, names=TEST_FUNCTIONS,
                   method="chebyshev", keep_profile=False):
    """Run the rescaled comparison for several test functions on one set of samples.

    Returns ({name: Theorem1Result}, profile or None).
    """
    sp = ScalingParams(kappa, T, cfg.W, cfg.d)
    if not cfg.meets_uniformity():
        warnings.warn(f"N = {cfg.N} < W^(1+d/6): outside the uniform regime", stacklevel=2)
    X = rescaled_sites(cfg, sp.s)
    phis = {name: test_function(name) for name in names}
    table = np.stack([phis[name](X) for name in names], axis=1)  # (sites, funcs)
    vals = np.empty((n_samples, len(names)))
    s1 = _Neumaier(cfg.n_sites) if keep_profile else None
    s2 = _Neumaier(cfg.n_sites) if keep_profile else None
    for i, p in sample_amplitudes(cfg, kind, sp.t, n_samples, seed, method):
        vals[i] = p @ table
        if keep_profile:
            s1.add(p)
            s2.add(p * p)
    out = {}
    for j, name in enumerate(names):
        mean = float(vals[:, j].mean())
        err = float(vals[:, j].std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
        rhs = limit_functional(T, phis[name], cfg.d) if T > 0 else float(phis[name](np.zeros((1, cfg.d)))[0])
        out[name] = Theorem1Result(name, mean, rhs, err, n_samples)
    profile = None
    if keep_profile:
        mean = s1.total / n_samples
        var = np.maximum(s2.total / n_samples - mean ** 2, 0.0) * n_samples / max(n_samples - 1, 1)
        profile = DiffusionProfile(cfg, sp.t, mean, n_samples, np.sqrt(var / n_samples), seed,
                                   EnsembleKind.parse(kind).value)
    return out, profile


def theorem1_experiment(cfg, kind, kappa, T, n_samples, test_fn="gauss", seed=0):
    """(lhs, rhs, stderr) for one named test function or a callable phi(X)."""
    if callable(test_fn):
        sp = ScalingParams(kappa, T, cfg.W, cfg.d)
        phi_x = test_fn(rescaled_sites(cfg, sp.s))
        vals = np.array([p @ phi_x for _, p in sample_amplitudes(cfg, kind, sp.t, n_samples, seed)])
        err = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
        return Theorem1Result("custom", float(vals.mean()), limit_functional(T, test_fn, cfg.d), err, n_samples)
    res, _ = theorem1_batch(cfg, kind, kappa, T, n_samples, seed, names=(test_fn,))
    return res[test_fn]


def tv_distance(p, q):
    """Total variation distance (1/2) sum |p - q|."""
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def clt_error(cfg, kappa, T):
    """sup_x |s^d P_x([eta T]) - G(T, x/s)| / sup G: rescaled walk vs heat kernel."""
    sp = ScalingParams(kappa, T, cfg.W, cfg.d)
    n = int(math.floor(sp.eta * T))
    p = path_count(cfg, n) * sp.s ** cfg.d
    g = heat_kernel(T, rescaled_sites(cfg, sp.s), cfg.d)
    return float(np.max(np.abs(p - g)) / np.max(g))


def scaled_limit_profile(cfg, kappa, T):
    """s^(-d) L(T, x/s) on the lattice sites: the macroscopic profile in lattice units."""
    sp = ScalingParams(kappa, T, cfg.W, cfg.d)
    return limit_profile(T, rescaled_sites(cfg, sp.s), cfg.d) / sp.s ** cfg.d
