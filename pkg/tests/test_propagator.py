from hypothesis import given, strategies as st
import numpy as np
import pytest

from banddiff.ensemble import EnsembleKind, sample
from banddiff.errors import CapExceeded, DomainError, SpectralRangeError
from banddiff.lattice import LatticeConfig, all_sites, origin_index, site_index
from banddiff import propagator as pg

import oracles

KINDS = list(EnsembleKind)


def delta(cfg, idx=None):
    v = np.zeros(cfg.n_sites, complex)
    v[origin_index(cfg) if idx is None else idx] = 1
    return v


@pytest.mark.parametrize("method", [pg.chebyshev_evolve, pg.nonbacktracking_evolve, pg.dense_oracle_evolve])
def test_zero_time_is_identity(method):
    cfg = LatticeConfig(1, 16, 2)
    H = sample(cfg, "hermitian", 0)
    assert np.allclose(method(H, 0.0).psi, delta(cfg), rtol=0, atol=1e-13)


def test_chebyshev_vs_dense_t10():
    H = sample(LatticeConfig(1, 64, 4), "hermitian", 1)
    res = pg.chebyshev_evolve(H, 10.0)
    assert np.linalg.norm(res.psi - pg.dense_oracle_evolve(H, 10.0).psi) <= 1e-8
    assert res.norm_defect <= max(res.residual_bound, 1e-8)


def test_unitarity_up_to_t50():
    H = sample(LatticeConfig(1, 64, 4), "symmetric", 2)
    for t in (1.0, 17.0, 50.0):
        assert pg.chebyshev_evolve(H, t).norm_defect <= 1e-8


def test_nonbacktracking_vs_chebyshev_N128():
    H = sample(LatticeConfig(1, 128, 6), "hermitian", 4)
    a = pg.chebyshev_evolve(H, 20.0).psi
    b = pg.nonbacktracking_evolve(H, 20.0).psi
    assert np.linalg.norm(a - b) <= 1e-7


def test_small_time_transition_weight():
    cfg = LatticeConfig(1, 64, 4)
    H = sample(cfg, "hermitian", 9)
    t = 0.01
    # averaging t and -t cancels the odd-order cross terms, which vanish in expectation
    p = 0.5 * (np.abs(pg.chebyshev_evolve(H, t).psi) ** 2 + np.abs(pg.chebyshev_evolve(H, -t).psi) ** 2)
    shell = [site_index(np.array([u]), cfg) for u in (-4, -3, -2, -1, 1, 2, 3, 4)]
    expect = t * t / (4 * (cfg.M - 1))
    assert np.max(np.abs(p[shell] / expect - 1)) <= 1e-3


def test_negative_time_is_conjugate_evolution():
    H = sample(LatticeConfig(1, 48, 3), "symmetric", 3)
    for fn in (pg.chebyshev_evolve, pg.nonbacktracking_evolve):
        assert np.allclose(fn(H, -5.0).psi, pg.dense_oracle_evolve(H, -5.0).psi, atol=1e-9)


def test_start_site_translation():
    cfg = LatticeConfig(1, 32, 3)
    H = sample(cfg, "hermitian", 5)
    start = np.array([7])
    res = pg.chebyshev_evolve(H, 4.0, start=start)
    ref = pg.dense_oracle_evolve(H, 4.0, start=start)
    assert np.allclose(res.psi, ref.psi, atol=1e-10)


def test_dense_group_property_and_moments():
    H = sample(LatticeConfig(1, 40, 3), "hermitian", 6)
    eig = pg.dense_eigen(H)
    assert np.mean(eig.eigenvalues ** 2) == pytest.approx(6 / 5, abs=1e-12)
    psi1 = pg.dense_oracle_evolve(H, 1.3).psi
    E = eig.eigenvectors
    psi12 = E @ (np.exp(-0.5j * 2.1 * eig.eigenvalues) * (E.conj().T @ psi1))
    assert np.allclose(psi12, pg.dense_oracle_evolve(H, 3.4).psi, atol=1e-10)
    assert abs(np.linalg.norm(psi1) - 1) <= 1e-12


def test_dense_cap():
    H = sample(LatticeConfig(2, 65, 2), "hermitian", 0)
    with pytest.raises(CapExceeded):
        pg.dense_eigen(H)


def test_spectral_range_guard():
    H = sample(LatticeConfig(1, 64, 4), "hermitian", 0)
    with pytest.raises(SpectralRangeError):
        pg.chebyshev_evolve(H, 30.0, scale=0.3)


def test_bad_time_and_tolerance():
    H = sample(LatticeConfig(1, 16, 2), "hermitian", 0)
    with pytest.raises(DomainError):
        pg.chebyshev_evolve(H, float("inf"))
    with pytest.raises(DomainError):
        pg.chebyshev_evolve(H, 1.0, tol=0.0)
    with pytest.raises(DomainError):
        pg.nonbacktracking_power_apply(H, -1, delta(H.cfg))


def test_nb_power_low_orders():
    cfg = LatticeConfig(1, 16, 2)
    H = sample(cfg, "symmetric", 1)
    v = delta(cfg)
    assert np.array_equal(pg.nonbacktracking_power_apply(H, 0, v), v)
    D = H.to_dense()
    x = origin_index(cfg)
    h2 = pg.nonbacktracking_power_apply(H, 2, v)
    assert h2[x] == pytest.approx((D @ D)[x, x] - cfg.M / (cfg.M - 1), abs=1e-14)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("N,W", [(5, 1), (8, 2), (7, 2)])
def test_nb_powers_match_path_enumeration(kind, N, W):
    cfg = LatticeConfig(1, N, W)
    H = sample(cfg, kind, 17)
    Hd = H.to_dense()
    o = origin_index(cfg)
    for n in range(5):
        ref = oracles.nonbacktracking_path_sum(Hd, N, W, n, o)
        got = pg.nonbacktracking_power_apply(H, n, delta(cfg))
        assert np.max(np.abs(got - ref)) <= 1e-12


@given(st.integers(0, 12), st.integers(0, 2**31))
def test_nb_power_locality(n, seed):
    cfg = LatticeConfig(1, 101, 3)
    H = sample(cfg, "hermitian", seed)
    v = pg.nonbacktracking_power_apply(H, n, delta(cfg))
    far = np.abs(all_sites(cfg)[:, 0]) > n * cfg.W
    assert np.all(v[far] == 0)


@given(st.sampled_from(KINDS), st.sampled_from([(32, 2), (64, 4), (128, 8)]), st.sampled_from([1.0, 5.0, 20.0]),
       st.integers(0, 2**31))
def test_three_way_agreement(kind, NW, t, seed):
    cfg = LatticeConfig(1, *NW)
    H = sample(cfg, kind, seed)
    ref = pg.dense_oracle_evolve(H, t).psi
    assert np.linalg.norm(pg.chebyshev_evolve(H, t).psi - ref) <= 1e-8
    assert np.linalg.norm(pg.nonbacktracking_evolve(H, t).psi - ref) <= 1e-7


def test_nonbacktracking_series_tolerates_growing_powers():
    # this sample has ||H|| > 2, so ||H^(m) delta|| reaches ~1e17 while a_m decays faster
    H = sample(LatticeConfig(1, 64, 4), "symmetric", 1003)
    ref = pg.dense_oracle_evolve(H, 30.0).psi
    assert np.linalg.norm(pg.nonbacktracking_evolve(H, 30.0).psi - ref) <= 1e-7
