"""Periodic cubic lattice with the Euclidean band shell.

Sites are integer vectors in the centred window ``{-[N/2], ..., N-1-[N/2]}^d``.
Flattening is row-major over ``coord + [N/2]``, so the smallest canonical
site maps to index 0.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import itertools

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class LatticeConfig:
    d: int
    N: int
    W: int
    M: int = field(init=False, compare=False)

    def __post_init__(self):
        d, N, W = self.d, self.N, self.W
        for name, v in (("d", d), ("N", N), ("W", W)):
            if int(v) != v:
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if d < 1:
            raise ConfigError(f"dimension d must be >= 1, got {d}")
        if N < 3:
            raise ConfigError(f"side length N must be >= 3, got {N}")
        if W < 1 or not 2 * W < N:
            raise ConfigError(f"band width must satisfy 1 <= W < N/2, got W={W}, N={N}")
        object.__setattr__(self, "M", shell_count(d, W))

    @property
    def n_sites(self):
        return self.N ** self.d

    @property
    def lo(self):
        return self.N // 2

    @property
    def diameter(self):
        """Largest periodic distance between two sites."""
        return float(np.sqrt(self.d) * (self.N // 2))

    def meets_uniformity(self):
        """Whether N >= W^(1 + d/6), the regime where the limit theorems are uniform."""
        return self.N >= self.W ** (1.0 + self.d / 6.0)


def shell_count(d, W):
    """M(W): number of x in Z^d with 1 <= |x| <= W, by direct enumeration."""
    r = np.arange(-W, W + 1)
    sq = r ** 2
    total = np.zeros((1,), dtype=np.int64)
    for _ in range(d):
        total = (total[:, None] + sq[None, :]).ravel()
    return int(np.count_nonzero((total >= 1) & (total <= W * W)))


def canonical(coords, cfg):
    """Reduce integer coordinates to the canonical window, componentwise mod N."""
    c = np.asarray(coords, dtype=np.int64)
    return (c + cfg.lo) % cfg.N - cfg.lo


def wrapped_abs(delta, N):
    w = np.abs(np.asarray(delta, dtype=np.int64)) % N
    return np.minimum(w, N - w)


def periodic_distance(a, b, cfg):
    """inf over nu in Z^d of |a - b + N nu|, for canonical sites (or arrays of them)."""
    w = wrapped_abs(np.asarray(a) - np.asarray(b), cfg.N)
    return np.sqrt(np.sum(w.astype(np.float64) ** 2, axis=-1))


@lru_cache(maxsize=64)
def _shell(cfg):
    W, d = cfg.W, cfg.d
    pts = [u for u in itertools.product(range(-W, W + 1), repeat=d)
           if 1 <= sum(x * x for x in u) <= W * W]
    out = np.array(pts, dtype=np.int64).reshape(-1, d)
    out.setflags(write=False)
    return out


def band_shell(cfg):
    """All offsets u with 1 <= |u| <= W, in lexicographic order; length M."""
    return _shell(cfg)


def positive_half(shell):
    """Mask of offsets whose first nonzero coordinate is positive.

    Exactly one of u, -u is selected, so the half-shell indexes unordered pairs.
    """
    s = np.asarray(shell)
    first = np.array([row[np.flatnonzero(row)[0]] for row in s])
    return first > 0


def site_index(a, cfg):
    """Row-major index of canonical site(s) ``a``."""
    c = np.asarray(a, dtype=np.int64) + cfg.lo
    idx = np.zeros(c.shape[:-1], dtype=np.int64)
    for k in range(cfg.d):
        idx = idx * cfg.N + c[..., k]
    return idx if idx.ndim else int(idx)


def index_site(i, cfg):
    """Inverse of :func:`site_index`."""
    i = np.asarray(i, dtype=np.int64)
    out = np.empty(i.shape + (cfg.d,), dtype=np.int64)
    rem = i.copy()
    for k in range(cfg.d - 1, -1, -1):
        out[..., k] = rem % cfg.N - cfg.lo
        rem = rem // cfg.N
    return out


@lru_cache(maxsize=64)
def _all_sites(cfg):
    s = index_site(np.arange(cfg.n_sites), cfg)
    s.setflags(write=False)
    return s


def all_sites(cfg):
    """(N^d, d) array of canonical sites in index order."""
    return _all_sites(cfg)


def origin_index(cfg):
    return site_index(np.zeros(cfg.d, dtype=np.int64), cfg)


@lru_cache(maxsize=64)
def _neighbors(cfg):
    sites = all_sites(cfg)
    shell = band_shell(cfg)
    nb = site_index(canonical(sites[:, None, :] + shell[None, :, :], cfg), cfg)
    nb = np.ascontiguousarray(nb, dtype=np.int64)
    nb.setflags(write=False)
    return nb


def shell_neighbors(cfg):
    """(N^d, M) table: entry [i, j] is the index of site_i + shell[j]."""
    return _neighbors(cfg)


@lru_cache(maxsize=64)
def _distances(cfg):
    dist = periodic_distance(all_sites(cfg), np.zeros(cfg.d, dtype=np.int64), cfg)
    dist.setflags(write=False)
    return dist


def distances_from_origin(cfg):
    return _distances(cfg)


def ball_offsets(cfg, radius):
    """Canonical offsets u with |u| < radius (periodic metric), as site indices shifts.

    Returned as an (K, d) coordinate array; used for P_{x, l} masks.
    """
    sites = all_sites(cfg)
    return sites[distances_from_origin(cfg) < radius]
