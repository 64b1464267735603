import math

import numpy as np
import pytest

import vmerton


def test_presets_are_listed_and_load():
    names = vmerton.list_presets()
    assert "bpt10_wishart" in names
    cfg = vmerton.load_preset("bpt10_wishart", steps=100)
    assert cfg.is_wishart
    assert cfg.n_steps == 100
    assert cfg.kind == "strategy"


def test_mittag_leffler_special_cases():
    assert vmerton.mittag_leffler(1.0, 1.0, -2.0) == pytest.approx(math.exp(-2.0), rel=1e-13)
    # E_{1/2}(-x) = exp(x^2) erfc(x)
    assert vmerton.mittag_leffler(0.5, 1.0, -1.5) == pytest.approx(math.exp(2.25) * math.erfc(1.5), rel=1e-12)
    with pytest.raises(vmerton.DomainError):
        vmerton.mittag_leffler(2.0, 1.0, -4.0)


def test_kernel_and_resolvent():
    assert vmerton.kernel("fractional", alpha=0.5, t=1.0) == pytest.approx(1.0 / math.gamma(0.5))
    t, r = vmerton.resolvent("constant", c=2.0, n_steps=10)
    assert t.shape == (11,)
    np.testing.assert_allclose(r, 2.0 * np.exp(-2.0 * t), rtol=1e-13)


def test_strategy_has_non_positive_hedging_demand():
    s = vmerton.strategy(vmerton.load_preset("bpt10_wishart", steps=200))
    assert s["pi"].shape == (201, 2)
    assert np.all(s["hedge"] <= 0.0)
    np.testing.assert_allclose(s["pi"][-1], s["myopic"], rtol=0, atol=0)


def test_solve_and_value():
    cfg = vmerton.load_preset("rough_heston_mc", steps=100)
    sol = vmerton.solve(cfg)
    assert sol["complete"]
    assert sol["t_max"] is None
    v = vmerton.value(cfg)
    assert v["value"] > 0.0
    assert v["certainty_equivalent"] == pytest.approx((0.5 * v["value"]) ** 2, rel=1e-12)


def test_invalid_config_raises():
    with pytest.raises(vmerton.ConfigError):
        vmerton.load_config_text("name: x\nkind: strategy\nmodel:\n  gamma: 2\n")
    with pytest.raises(vmerton.ConfigError):
        vmerton.load_preset("no_such_preset")


def test_run_writes_files(tmp_path):
    cfg = vmerton.load_preset("bpt10_wishart", out=str(tmp_path), steps=50)
    report = vmerton.run(cfg)
    assert report["exit_code"] == 0
    assert (tmp_path / "bpt10_wishart_strategy.csv").exists()
    sweep = vmerton.run(vmerton.load_preset("sweep_alpha_gamma02", out=str(tmp_path), steps=50))
    assert sweep["exit_code"] == 0
    assert (tmp_path / "sweep_alpha_gamma02_sweep.csv").exists()
