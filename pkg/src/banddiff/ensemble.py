"""Hermitian unit-circle and real symmetric Bernoulli band ensembles.

Every stored entry has modulus exactly ``1/sqrt(M - 1)``, so row norms and
the normalised trace of H^2 are deterministic.
"""
from dataclasses import dataclass
import enum
import struct

import numpy as np

from . import kernels
from .errors import ConfigError, DegenerateBandError, DimensionMismatch
from .lattice import LatticeConfig, band_shell, positive_half, shell_neighbors


class EnsembleKind(enum.Enum):
    HermitianUnitCircle = "hermitian"
    SymmetricBernoulli = "symmetric"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ConfigError(f"unknown ensemble kind {value!r}")


_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class BandMatrix:
    """One sample of H.

    ``pairs`` holds the entries H[x, x + u] for every site x and every offset
    u in the positive half-shell (pair-index order = row-major over (x, u)).
    ``table`` is the full (N^d, M) mirror used by :meth:`apply`.
    """

    cfg: LatticeConfig
    kind: EnsembleKind
    seed: int
    pairs: np.ndarray
    table: np.ndarray

    @property
    def n_sites(self):
        return self.cfg.n_sites

    def apply(self, v):
        """Return Hv for a vector of length N^d."""
        v = np.asarray(v)
        if v.shape != (self.n_sites,):
            raise DimensionMismatch(f"expected vector of length {self.n_sites}, got shape {v.shape}")
        return kernels.band_matvec(self.table, shell_neighbors(self.cfg), v)

    def to_dense(self):
        n = self.n_sites
        dense = np.zeros((n, n), dtype=np.complex128)
        nb = shell_neighbors(self.cfg)
        rows = np.repeat(np.arange(n), nb.shape[1])
        dense[rows, nb.ravel()] = self.table.ravel()
        return dense

    def second_moment_check(self):
        """(1/|A|) tr H^2 computed from the stored entries."""
        return float(np.sum(np.abs(self.table) ** 2)) / self.n_sites

    def row_norms_sq(self):
        return np.sum(np.abs(self.table) ** 2, axis=1)

    def dump(self, path):
        """Write a binary fixture: header then pair entries in pair-index order."""
        c = self.cfg
        header = struct.pack("<4sqqqqQ", b"BDH1", c.d, c.N, c.W,
                             0 if self.kind is EnsembleKind.HermitianUnitCircle else 1,
                             self.seed & _MASK64)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.pairs, dtype="<c16").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        size = struct.calcsize("<4sqqqqQ")
        magic, d, N, W, k, seed = struct.unpack("<4sqqqqQ", raw[:size])
        if magic != b"BDH1":
            raise ConfigError(f"{path}: not a band matrix dump")
        cfg = LatticeConfig(d=d, N=N, W=W)
        kind = EnsembleKind.HermitianUnitCircle if k == 0 else EnsembleKind.SymmetricBernoulli
        pairs = np.frombuffer(raw[size:], dtype="<c16").astype(np.complex128)
        half = int(np.count_nonzero(positive_half(band_shell(cfg))))
        pairs = pairs.reshape(cfg.n_sites, half)
        return cls(cfg, kind, seed, pairs, _mirror(cfg, pairs))


def _mirror(cfg, pairs):
    """Expand half-shell entries into the full (N^d, M) table."""
    shell = band_shell(cfg)
    nb = shell_neighbors(cfg)
    pos = positive_half(shell)
    pos_cols = np.flatnonzero(pos)
    table = np.empty((cfg.n_sites, shell.shape[0]), dtype=np.complex128)
    table[:, pos_cols] = pairs
    # H[x, x - u] = conj(H[x - u, x]) and x - u = nb[x, j'] with shell[j'] = -u
    lookup = {tuple(u): j for j, u in enumerate(shell)}
    for h, j in enumerate(pos_cols):
        jneg = lookup[tuple(-shell[j])]
        src = nb[:, jneg]
        table[:, jneg] = np.conj(pairs[src, h])
    return table


def sample(cfg, kind, seed):
    """Draw one band matrix; deterministic in (cfg, kind, seed).

    Uses a Philox counter-based stream keyed by the seed, so pair entries
    are a fixed function of (seed, pair index).
    """
    kind = EnsembleKind.parse(kind)
    M = cfg.M
    if M < 2:
        raise DegenerateBandError("entry variance 1/(M-1) undefined for M = 1")
    half = M // 2
    n_pairs = cfg.n_sites * half
    rng = np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
    scale = 1.0 / np.sqrt(M - 1)
    if kind is EnsembleKind.HermitianUnitCircle:
        theta = 2.0 * np.pi * rng.random(n_pairs)
        pairs = scale * np.exp(1j * theta)
    else:
        signs = rng.integers(0, 2, size=n_pairs, dtype=np.int8)
        pairs = (scale * (1 - 2 * signs.astype(np.float64))).astype(np.complex128)
    pairs = pairs.reshape(cfg.n_sites, half)
    pairs.setflags(write=False)
    table = _mirror(cfg, pairs)
    table.setflags(write=False)
    return BandMatrix(cfg, kind, int(seed), pairs, table)
