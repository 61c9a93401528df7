"""Eigenvector localisation diagnostics.

``A(eps, l)`` collects eigenvectors with sum_x |psi(x)| ||P_{x,l} psi|| < eps,
where P_{x,l} masks the sites at distance >= l from x. ``B(l)`` collects
eigenvectors with a centre u such that sum_x |psi(x)|^2 exp((|x-u|/l)^gamma) <= K.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import kernels
from .constants import DELOC_DELTA_FRACTION, DELOC_GAMMA, DELOC_K
from .diffusion import derive_seed
from .ensemble import EnsembleKind, sample
from .errors import ConfigError, DomainError
from .lattice import all_sites, canonical, distances_from_origin, site_index
from .propagator import dense_eigen


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    cfg: object
    seed: int

    @classmethod
    def from_matrix(cls, H):
        eig = dense_eigen(H)
        return cls(eig.eigenvalues, eig.eigenvectors, H.cfg, H.seed)

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class LocalizationReport:
    eps: float
    ell: float
    members: frozenset
    fraction: float
    values: np.ndarray


def default_scale(W, d, kappa):
    """l = W^(1 + d kappa / 2)."""
    return float(W) ** (1.0 + d * kappa / 2.0)


@lru_cache(maxsize=32)
def _shift_tables(cfg, ell):
    """Index maps x -> x + k for the offsets k on the smaller side of |k| < l.

    Returns (tables, inside): if ``inside`` the offsets are the open ball,
    otherwise its complement.
    """
    dist = distances_from_origin(cfg)
    ball = dist < ell
    inside = int(ball.sum()) <= cfg.n_sites - int(ball.sum())
    chosen = np.flatnonzero(ball if inside else ~ball)
    sites = all_sites(cfg)
    offs = all_sites(cfg)[chosen]
    tables = site_index(canonical(sites[None, :, :] + offs[:, None, :], cfg), cfg)
    tables = np.asarray(tables, dtype=np.int64).reshape(len(chosen), cfg.n_sites)
    tables.setflags(write=False)
    return tables, inside


def outside_mass(weights, ell, cfg):
    """||P_{x,l} psi||^2 for every x; ``weights`` is |psi|^2 with sites on axis 0."""
    w = np.asarray(weights, dtype=np.float64)
    tables, inside = _shift_tables(cfg, float(ell))
    acc = np.zeros_like(w)
    for tab in tables:
        acc += w[tab]
    if inside:
        acc = np.maximum(w.sum(axis=0, keepdims=True) - acc, 0.0)
    return acc


def localization_functionals(vectors, ell, cfg):
    """sum_x |psi(x)| ||P_{x,l} psi|| for each column of ``vectors``."""
    if not ell > 0:
        raise DomainError(f"l must be > 0, got {ell}")
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[:, None]
    amp = np.abs(v)
    out = np.sqrt(outside_mass(amp ** 2, ell, cfg))
    return np.sum(amp * out, axis=0)


def localization_functional(psi, ell, cfg):
    return float(localization_functionals(np.asarray(psi)[:, None], ell, cfg)[0])


def localized_fraction(es, eps, ell=None, kappa=None):
    """Members of A(eps, l) (strict inequality) and their fraction.

    Default scale is l = W^(1 + d kappa / 2) when ``kappa`` is given.
    """
    if ell is None:
        if kappa is None:
            raise ConfigError("give either ell or kappa")
        ell = default_scale(es.cfg.W, es.cfg.d, kappa)
    vals = localization_functionals(es.eigenvectors, ell, es.cfg)
    members = frozenset(int(a) for a in np.flatnonzero(vals < eps))
    return LocalizationReport(float(eps), float(ell), members, len(members) / len(vals), vals)


@lru_cache(maxsize=8)
def _diff_index(cfg):
    """[x, u] -> index of x - u."""
    sites = all_sites(cfg)
    tab = site_index(canonical(sites[:, None, :] - sites[None, :, :], cfg), cfg)
    tab = np.ascontiguousarray(tab, dtype=np.int64)
    tab.setflags(write=False)
    return tab


def subexp_centres(vectors, ell, gamma, K, cfg):
    """For each column, an accepted centre index u or -1 (exhaustive search over u)."""
    if not gamma > 0 or not K > 0 or not ell > 0:
        raise DomainError("need gamma > 0, K > 0, l > 0")
    w = np.ascontiguousarray(np.abs(np.asarray(vectors)) ** 2)
    if w.ndim == 1:
        w = w[:, None]
    expo = (distances_from_origin(cfg) / ell) ** gamma
    order = np.ascontiguousarray(np.argsort(-w, axis=0, kind="stable"))
    return kernels.subexp_search(w, order, _diff_index(cfg), expo, math.log(K))


def subexponential_set(es, ell, gamma, K):
    found = subexp_centres(es.eigenvectors, ell, gamma, K, es.cfg)
    return frozenset(int(a) for a in np.flatnonzero(found >= 0))


def inclusion_epsilon(cfg, ell, ell_tilde, gamma, K, delta=None):
    """eps_W with B(l) contained in A(eps_W, l~).

    eps_W^2 = K^2 exp(-delta (l~/l)^gamma) sum_x exp(-(1 - delta 2^gamma)(|x|/l)^gamma),
    the explicit form of the constant C l^d, valid for any delta < 2^-gamma.
    """
    if delta is None:
        delta = DELOC_DELTA_FRACTION * 2.0 ** (-gamma)
    if not 0 < delta < 2.0 ** (-gamma):
        raise DomainError("delta must lie in (0, 2^-gamma)")
    r = distances_from_origin(cfg) / ell
    lattice_sum = float(np.sum(np.exp(-(1.0 - delta * 2.0 ** gamma) * r ** gamma)))
    return math.sqrt(K * K * math.exp(-delta * (ell_tilde / ell) ** gamma) * lattice_sum)


@dataclass(frozen=True)
class DelocSample:
    seed: int
    fraction: float
    n_b: int
    inclusion_ok: bool
    eps_w: float


def deloc_experiment(cfg, kind, kappa, eps, n_seeds, seed, kappa_tilde=None,
                     gamma=DELOC_GAMMA, K=DELOC_K):
    """Per-seed localized fraction at l = W^(1+d kappa/2), plus the B(l) inclusion check."""
    kind = EnsembleKind.parse(kind)
    if kappa_tilde is None:
        kappa_tilde = 0.5 * (kappa + 1.0 / 3.0)
    if not kappa < kappa_tilde < 1.0 / 3.0:
        raise ConfigError("need kappa < kappa_tilde < 1/3")
    ell = default_scale(cfg.W, cfg.d, kappa)
    ell_t = default_scale(cfg.W, cfg.d, kappa_tilde)
    eps_w = inclusion_epsilon(cfg, ell, ell_t, gamma, K)
    out = []
    for i in range(n_seeds):
        s = derive_seed(seed, "deloc", i)
        es = EigenSystem.from_matrix(sample(cfg, kind, s))
        rep = localized_fraction(es, eps, ell=ell)
        B = subexponential_set(es, ell, gamma, K)
        ok = True
        if B:
            # relative guard: the proof gives <= eps_W, membership is strict
            A = localized_fraction(es, eps_w * (1 + 1e-9), ell=ell_t).members
            ok = B <= A
        out.append(DelocSample(s, rep.fraction, len(B), ok, eps_w))
    return out


@dataclass(frozen=True)
class LocalizationRecords:
    """Per-eigenvector values for one sampled system."""

    eigenvalues: np.ndarray
    functional: np.ndarray
    in_A: np.ndarray
    in_B: np.ndarray
    in_A_tilde: np.ndarray


def localization_records(cfg, kind, kappa, eps, seed, kappa_tilde=None,
                         gamma=DELOC_GAMMA, K=DELOC_K):
    """Eigenvalue, functional at l = W^(1+d kappa/2) and membership in A, B(l), A(eps_W, l~)."""
    if kappa_tilde is None:
        kappa_tilde = 0.5 * (kappa + 1.0 / 3.0)
    ell = default_scale(cfg.W, cfg.d, kappa)
    ell_t = default_scale(cfg.W, cfg.d, kappa_tilde)
    eps_w = inclusion_epsilon(cfg, ell, ell_t, gamma, K)
    es = EigenSystem.from_matrix(sample(cfg, EnsembleKind.parse(kind), seed))
    rep = localized_fraction(es, eps, ell=ell)
    in_b = subexp_centres(es.eigenvectors, ell, gamma, K, cfg) >= 0
    tilde = localized_fraction(es, eps_w * (1 + 1e-9), ell=ell_t).values < eps_w * (1 + 1e-9)
    in_a = rep.values < eps
    return LocalizationRecords(es.eigenvalues, rep.values, in_a, in_b, tilde)
