import itertools
import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from banddiff.errors import ConfigError
from banddiff.lattice import (LatticeConfig, all_sites, band_shell, canonical, index_site,
                              periodic_distance, shell_count, shell_neighbors, site_index)


def brute_shell_count(d, W):
    return sum(1 for u in itertools.product(range(-W, W + 1), repeat=d)
               if 1 <= sum(c * c for c in u) <= W * W)


def test_periodic_distance_examples():
    assert periodic_distance([4], [-5], LatticeConfig(1, 10, 2)) == 1.0
    assert periodic_distance([3], [3], LatticeConfig(1, 10, 2)) == 0.0
    assert periodic_distance([0, 0], [3, 4], LatticeConfig(2, 20, 2)) == 5.0


def test_band_shell_examples():
    sh = band_shell(LatticeConfig(1, 10, 3))
    assert sorted(sh[:, 0].tolist()) == [-3, -2, -1, 1, 2, 3]
    assert LatticeConfig(1, 10, 3).M == 6
    assert LatticeConfig(2, 20, 3).M == 28
    assert sorted(band_shell(LatticeConfig(1, 5, 1))[:, 0].tolist()) == [-1, 1]


@pytest.mark.parametrize("d,W", [(d, W) for d in (1, 2, 3) for W in range(1, 7)])
def test_shell_count_matches_enumeration(d, W):
    assert shell_count(d, W) == brute_shell_count(d, W)
    cfg = LatticeConfig(d, 2 * W + 1, W)
    sh = band_shell(cfg)
    assert len(sh) == cfg.M
    assert {tuple(u) for u in sh} == {tuple(-u) for u in sh}


def test_site_index_examples():
    cfg = LatticeConfig(1, 9, 2)
    assert site_index(np.array([0]), cfg) == 4
    cfg2 = LatticeConfig(2, 4, 1)
    assert site_index(np.array([-2, -2]), cfg2) == 0
    for i in range(cfg2.n_sites):
        assert site_index(index_site(i, cfg2), cfg2) == i


@pytest.mark.parametrize("d,N,W", [(0, 5, 1), (1, 2, 1), (1, 6, 3), (1, 6, 0), (1.5, 6, 1)])
def test_invalid_configs(d, N, W):
    with pytest.raises(ConfigError):
        LatticeConfig(d, N, W)


def test_neighbor_table_matches_distance():
    cfg = LatticeConfig(2, 9, 2)
    nb = shell_neighbors(cfg)
    sites = all_sites(cfg)
    for x in (0, 17, 40):
        expect = {y for y in range(cfg.n_sites) if 1 <= periodic_distance(sites[x], sites[y], cfg) <= cfg.W}
        assert set(nb[x].tolist()) == expect


@st.composite
def triples(draw):
    d = draw(st.integers(1, 3))
    N = draw(st.integers(5, 12))
    cfg = LatticeConfig(d, N, 1)
    pts = [np.array(draw(st.lists(st.integers(-50, 50), min_size=d, max_size=d))) for _ in range(3)]
    return cfg, [canonical(p, cfg) for p in pts]


@given(triples())
def test_periodic_distance_is_metric(data):
    cfg, (a, b, c) = data
    dab = periodic_distance(a, b, cfg)
    assert dab == periodic_distance(b, a, cfg)
    assert dab <= periodic_distance(a, c, cfg) + periodic_distance(c, b, cfg) + 1e-12
    assert (dab == 0) == bool(np.all(a == b))
    assert dab <= math.sqrt(cfg.d) * (cfg.N // 2)


@given(st.integers(1, 3), st.integers(3, 11), st.data())
def test_index_round_trip(d, N, data):
    cfg = LatticeConfig(d, N, 1)
    i = data.draw(st.integers(0, cfg.n_sites - 1))
    s = index_site(i, cfg)
    assert np.all(s >= -(N // 2)) and np.all(s <= N - 1 - N // 2)
    assert site_index(s, cfg) == i
