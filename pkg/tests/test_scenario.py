import json
import math

import numpy as np
import pytest

from irs_ofdma import scenario as sc


def test_unit_conversions():
    assert sc.dbm_to_watt(0) == pytest.approx(1e-3)
    assert sc.dbm_to_watt(35) == pytest.approx(3.1623, abs=1e-4)
    assert sc.db_to_linear(8.8) == pytest.approx(7.5858, abs=1e-4)


def test_defaults_and_derived_values():
    cfg = sc.ScenarioConfig()
    assert (cfg.K, cfg.N, cfg.Q, cfg.I) == (3, 16, 6, 5)
    assert cfg.P == pytest.approx(10 ** 0.5)
    assert cfg.sigma2 == pytest.approx(1e-14)
    assert cfg.gamma == pytest.approx(10 ** 0.88)


@pytest.mark.parametrize("changes", [
    dict(K=0), dict(N=2), dict(Q=1.5), dict(M=-1), dict(D_bs_irs=0),
    dict(gamma_db=-1), dict(seed=-1), dict(I=True), dict(P_dbm=math.inf),
])
def test_invalid_config(changes):
    with pytest.raises(ValueError):
        sc.ScenarioConfig(**changes)


def test_config_roundtrip(tmp_path):
    cfg = sc.ScenarioConfig(M=80, seed=7, P_dbm=30)
    assert sc.ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"M": 20.0, "P_dbm": 30, "num_realizations": 3}))
    loaded = sc.ScenarioConfig.from_json(path)
    assert loaded.M == 20 and isinstance(loaded.M, int)
    assert loaded.P_dbm == 30.0
    with pytest.raises(ValueError, match="unknown"):
        sc.ScenarioConfig.from_dict({"bogus": 1})
    path.write_text("[1, 2]")
    with pytest.raises(ValueError):
        sc.ScenarioConfig.from_json(path)


def test_path_loss():
    assert sc.path_loss(1.0, 3.5) == pytest.approx(1e-3, rel=1e-15)
    assert sc.path_loss(100.0, 2.2) == pytest.approx(10 ** -7.4, rel=1e-12)
    assert sc.path_loss(37.0, 0.0) == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        sc.path_loss(0.0, 2.0)


def test_pdp_weights():
    np.testing.assert_allclose(sc.pdp_weights(1), [1.0])
    np.testing.assert_allclose(sc.pdp_weights(2), [0.7311, 0.2689], atol=1e-4)
    for L in range(1, 9):
        w = sc.pdp_weights(L)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(np.diff(w) < 0) or L == 1


def test_sample_taps_statistics():
    rng = np.random.default_rng(0)
    assert np.all(sc.sample_taps(0.0, 3, rng) == 0)
    zeta = 2e-5
    draws = np.array([sc.sample_taps(zeta, 3, rng) for _ in range(10_000)])
    energy = np.mean(np.sum(np.abs(draws) ** 2, axis=1))
    assert energy == pytest.approx(zeta, rel=0.03)
    xi = draws / np.sqrt(zeta * sc.pdp_weights(3))
    assert np.var(xi.real) == pytest.approx(0.5, rel=0.05)
    assert np.var(xi.imag) == pytest.approx(0.5, rel=0.05)


def test_user_positions():
    bs, iu = sc.user_positions(sc.ScenarioConfig(d_irs_user=0.0))
    np.testing.assert_allclose(bs, 100.0)
    bs, iu = sc.user_positions(sc.ScenarioConfig(K=1))
    assert bs[0] == pytest.approx(math.hypot(100, 2))
    np.testing.assert_allclose(iu, 2.0)


def test_generate_realization_shapes_and_determinism():
    cfg = sc.ScenarioConfig(M=5)
    a = sc.generate_realization(cfg, 3)
    b = sc.generate_realization(cfg, 3)
    assert a.h_d.shape == (3, 16) and a.V.shape == (3, 16, 5)
    assert np.array_equal(a.h_d, b.h_d) and np.array_equal(a.V, b.V)
    c = sc.generate_realization(cfg, 4)
    assert not np.array_equal(a.h_d, c.h_d)
    # taps beyond the delay spread are zero
    assert np.all(a.h_d[:, cfg.L0:] == 0)
    assert np.all(a.V[:, cfg.L1 + cfg.L2 - 1:, :] == 0)


def test_smaller_surface_is_prefix():
    small = sc.generate_realization(sc.ScenarioConfig(M=4), 2)
    big = sc.generate_realization(sc.ScenarioConfig(M=9), 2)
    assert np.array_equal(small.h_d, big.h_d)
    assert np.array_equal(small.V, big.V[:, :, :4])


def test_without_irs():
    real = sc.generate_realization(sc.ScenarioConfig(M=3), 0)
    bare = real.without_irs()
    assert np.all(bare.V == 0) and bare.V.shape == real.V.shape
    assert np.array_equal(bare.h_d, real.h_d)
