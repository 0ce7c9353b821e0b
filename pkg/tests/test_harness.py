import csv
import hashlib
import json
import math

import numpy as np
import pytest

from tailcop import model_from_config, true_cov_matrix
from tailcop.harness import (
    ANGLE_PRESETS,
    CampaignConfig,
    ConfigError,
    load_config,
    resolve_angles,
    run_campaign,
)
from tailcop.inference import true_cov_Gtilde

CLAYTON_QUARTER = {"family": "clayton", "lambda": 0.25}


def _cfg(**raw):
    raw.setdefault("seed", 42)
    return CampaignConfig.from_dict(raw)


def _mse_cfg(**over):
    raw = {
        "campaign": "mse-sweep",
        "reps": 6,
        "n": 200,
        "k_list": [10, 20],
        "model": CLAYTON_QUARTER,
        "angles": "diag",
    }
    raw.update(over)
    return _cfg(**raw)


# ---------------------------------------------------------------------------
# angles and config


def test_angle_presets():
    np.testing.assert_allclose(
        resolve_angles("lpi8"),
        [math.pi / 8, 2 * math.pi / 8, 3 * math.pi / 8],
    )
    np.testing.assert_allclose(resolve_angles("diag"), [math.pi / 4])
    assert set(ANGLE_PRESETS) == {"lpi8", "diag"}
    np.testing.assert_allclose(resolve_angles([0.1, 0.2]), [0.1, 0.2])
    for bad in ("octants", [], [-0.1], [2.0]):
        with pytest.raises(ConfigError):
            resolve_angles(bad)


def test_config_rejects_unknown_key_and_missing_seed():
    with pytest.raises(ConfigError, match="unknown config keys"):
        _cfg(campaign="mse-sweep", reps=2, k_list=[10],
             model=CLAYTON_QUARTER, bandwidth=3)
    with pytest.raises(ConfigError, match="seed"):
        CampaignConfig.from_dict({
            "campaign": "mse-sweep", "reps": 2, "k_list": [10],
            "model": CLAYTON_QUARTER,
        })
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict(["not", "a", "mapping"])


@pytest.mark.parametrize("over", [
    {"campaign": "percolation"},
    {"reps": 0},
    {"reps": 2.5},
    {"scale": 0.0},
    {"n": 1},
    {"B": 0},
    {"alphas": [0.0]},
    {"alphas": [1.0]},
    {"kinds": ["jackknife"]},
    {"tail": "middle"},
    {"grid_size": 0},
    {"angles": "octants"},
    {"k_list": None},
    {"k_list": [0]},
    {"k_list": [500]},
    {"model": None},
    {"model": {"family": "clayton", "theta": -1.0}},
    {"model": {"family": "gumbel", "theta": 1.0}},
])
def test_config_field_validation(over):
    raw = {
        "campaign": "mse-sweep", "reps": 4, "n": 200,
        "k_list": [10, 20], "model": CLAYTON_QUARTER,
    }
    raw.update(over)
    with pytest.raises(ConfigError):
        _cfg(**raw)


def test_config_per_campaign_requirements():
    with pytest.raises(ConfigError, match="requires k"):
        _cfg(campaign="cov-table", reps=2, model=CLAYTON_QUARTER)
    with pytest.raises(ConfigError, match="model_x"):
        _cfg(campaign="equality-test", reps=2, k=20)
    with pytest.raises(ConfigError, match="'pdm' and 'dm'"):
        _cfg(campaign="equality-test", reps=2, k=20, kinds=["beta"],
             model_x=CLAYTON_QUARTER, model_y=CLAYTON_QUARTER)
    with pytest.raises(ConfigError, match="fit family"):
        _cfg(campaign="gof-test", reps=2, k=20, model=CLAYTON_QUARTER)
    with pytest.raises(ConfigError, match="fit family"):
        _cfg(campaign="ci-coverage", reps=2, k=20,
             model=CLAYTON_QUARTER, family="gumbel")


def test_effective_reps_scaling():
    cfg = _mse_cfg(reps=10, scale=0.25)
    assert cfg.effective_reps == 2
    assert _mse_cfg(reps=10, scale=0.01).effective_reps == 1
    assert _mse_cfg(reps=10, scale=3.0).effective_reps == 30
    cfg = _cfg(campaign="cov-table", reps=4, k=20, model=CLAYTON_QUARTER,
               alpha_reps=0, scale=5.0)
    assert cfg.effective_alpha_reps == 0
    cfg = _cfg(campaign="cov-table", reps=4, k=20, model=CLAYTON_QUARTER,
               alpha_reps=7, scale=0.5)
    assert cfg.effective_alpha_reps == 4


def test_load_config_json_and_yaml(tmp_path):
    raw = {
        "campaign": "mse-sweep", "reps": 3, "seed": 9, "n": 150,
        "k_list": [5, 10], "model": CLAYTON_QUARTER,
    }
    jpath = tmp_path / "c.json"
    jpath.write_text(json.dumps(raw))
    cfg = load_config(jpath)
    assert cfg.seed == 9 and cfg.k_list == (5, 10)

    ypath = tmp_path / "c.yaml"
    ypath.write_text(
        "campaign: mse-sweep\nreps: 3\nseed: 9\nn: 150\n"
        "k_list: [5, 10]\nmodel: {family: clayton, lambda: 0.25}\n"
    )
    assert load_config(ypath).to_dict() == cfg.to_dict()

    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---------------------------------------------------------------------------
# mse-sweep


def test_mse_hook_truth_injection_gives_zero():
    def hook(model, cfg_, angles, rep):
        return np.tile(model.angular(angles), (len(cfg_.k_list), 1))

    res = run_campaign(_mse_cfg(reps=1, k_list=[10, 25]),
                       estimator_hook=hook)
    assert res.columns == ["k", "mse", "var", "bias2"]
    for k, mse, var, bias2 in res.rows:
        assert mse == 0.0 and var == 0.0 and bias2 == 0.0
    assert res.extras["argmin_k"] == 10
    # averaging identical values leaves at most rounding noise
    res = run_campaign(_mse_cfg(reps=3, k_list=[10, 25]),
                       estimator_hook=hook)
    for k, mse, var, bias2 in res.rows:
        assert mse < 1e-30


def test_mse_decomposition_exact():
    res = run_campaign(_mse_cfg(reps=8, angles="lpi8"))
    assert len(res.rows) == 2
    for k, mse, var, bias2 in res.rows:
        assert mse == pytest.approx(var + bias2, abs=1e-12)
        assert mse > 0.0


def test_mse_hook_rejected_elsewhere():
    cfg = _cfg(campaign="gof-test", reps=2, k=20, B=20,
               model=CLAYTON_QUARTER, family="clayton", n=100)
    with pytest.raises(ConfigError, match="mse-sweep"):
        run_campaign(cfg, estimator_hook=lambda *a: None)


def test_mse_argmin_k_near_fifty():
    cfg = _cfg(
        campaign="mse-sweep", reps=200, n=1000, seed=77,
        k_list=[10, 20, 30, 40, 50, 65, 80, 110, 160, 240, 400],
        model=CLAYTON_QUARTER, angles="lpi8",
    )
    res = run_campaign(cfg)
    assert 30 <= res.extras["argmin_k"] <= 80


# ---------------------------------------------------------------------------
# determinism


def test_campaign_deterministic_across_workers():
    cfg = _mse_cfg(reps=6)
    a = run_campaign(cfg, workers=1)
    b = run_campaign(_mse_cfg(reps=6), workers=2)
    assert a.rows == b.rows
    assert a.extras == b.extras
    assert b.meta["workers"] == 2
    assert a.meta["effective_reps"] == 6
    assert isinstance(a.meta["wall_time_s"], float)
    assert a.meta["kernel_backend"] in ("numba", "numpy")


def test_equality_campaign_deterministic_across_workers():
    raw = dict(campaign="equality-test", reps=4, n=200, k=20, B=30,
               model_x=CLAYTON_QUARTER, model_y=CLAYTON_QUARTER,
               kinds=["pdm"], alphas=[0.1], grid_size=20)
    a = run_campaign(_cfg(**raw), workers=1)
    b = run_campaign(_cfg(**raw), workers=2)
    assert a.rows == b.rows


def test_campaign_seed_sensitivity():
    a = run_campaign(_mse_cfg(reps=4))
    b = run_campaign(_mse_cfg(reps=4, seed=43))
    assert a.rows != b.rows


# ---------------------------------------------------------------------------
# cov-table


def test_cov_table_shapes_and_truth_columns():
    cfg = _cfg(campaign="cov-table", reps=4, alpha_reps=6, n=300, k=30,
               B=40, kinds=["beta", "pdm"], model=CLAYTON_QUARTER)
    res = run_campaign(cfg)
    assert res.columns == ["section", "kind", "i", "j", "value", "truth",
                           "mse"]
    alpha_rows = [r for r in res.rows if r[0] == "alpha-cov"]
    boot_rows = [r for r in res.rows if r[0] == "boot-cov"]
    assert len(alpha_rows) == 6  # upper triangle of 3x3
    assert len(boot_rows) == 12

    # the harness solves theta from the configured lambda, so compare
    # against the same solved model rather than Clayton(0.5)
    model = model_from_config(CLAYTON_QUARTER)
    angles = resolve_angles("lpi8")
    pts = np.column_stack((np.cos(angles), np.sin(angles)))
    ghat = true_cov_matrix(model, pts)
    for _, kind, i, j, value, truth, mse in boot_rows:
        if kind == "pdm":
            assert truth == ghat[i, j]
        else:
            assert truth == true_cov_Gtilde(model, pts[i], pts[j])
        assert mse >= 0.0
    for _, _, i, j, value, truth, mse in alpha_rows:
        assert truth == ghat[i, j]
        assert mse == ""

    cov = np.asarray(res.extras["alpha_cov"])
    np.testing.assert_allclose(cov, cov.T, atol=1e-15)
    assert set(res.extras) >= {"alpha_cov", "avg_cov_beta", "avg_cov_pdm",
                               "mse_beta", "mse_pdm"}


def test_cov_table_skips_absent_sections():
    cfg = _cfg(campaign="cov-table", reps=3, alpha_reps=0, n=200, k=20,
               B=30, kinds=["dm"], model=CLAYTON_QUARTER)
    res = run_campaign(cfg)
    assert all(r[0] == "boot-cov" for r in res.rows)
    assert "alpha_cov" not in res.extras


# ---------------------------------------------------------------------------
# equality-test and gof-test rates


def test_equality_rates_alpha_monotone():
    cfg = _cfg(campaign="equality-test", reps=6, n=300, k=30, B=60,
               model_x=CLAYTON_QUARTER,
               model_y={"family": "clayton", "lambda": 0.75},
               kinds=["pdm", "dm"], alphas=[0.15, 0.1, 0.05], grid_size=30)
    res = run_campaign(cfg)
    assert res.columns == ["kind", "alpha", "reject_rate"]
    assert len(res.rows) == 6
    by_kind = {}
    for kind, alpha, rate in res.rows:
        assert 0.0 <= rate <= 1.0
        assert rate * cfg.effective_reps == pytest.approx(
            round(rate * cfg.effective_reps), abs=1e-9
        )
        by_kind.setdefault(kind, []).append((alpha, rate))
    for kind, cells in by_kind.items():
        cells.sort(reverse=True)  # alpha descending
        rates = [r for _, r in cells]
        assert rates == sorted(rates, reverse=True)


def test_gof_rates_alpha_monotone():
    cfg = _cfg(campaign="gof-test", reps=5, n=300, k=30, B=50,
               model=CLAYTON_QUARTER, family="clayton",
               alphas=[0.15, 0.05], grid_size=30)
    res = run_campaign(cfg)
    assert res.columns == ["alpha", "reject_rate"]
    rates = dict(res.rows)
    assert 0.0 <= rates[0.05] <= rates[0.15] <= 1.0
    assert res.extras["reps"] == 5


# ---------------------------------------------------------------------------
# ci-coverage


def test_ci_coverage_nesting_and_schema():
    cfg = _cfg(campaign="ci-coverage", reps=5, n=400, k=40, B=80,
               model=CLAYTON_QUARTER, alphas=[0.1, 0.05], grid_size=30)
    res = run_campaign(cfg)
    assert res.columns == ["alpha", "level", "coverage", "avg_length"]
    cells = {alpha: (level, cov, length)
             for alpha, level, cov, length in res.rows}
    assert cells[0.1][0] == 0.9 and cells[0.05][0] == 0.95
    assert cells[0.05][1] >= cells[0.1][1]  # nested intervals
    assert cells[0.05][2] >= cells[0.1][2]
    assert res.extras["theta0"] == pytest.approx(0.5)


def test_ci_coverage_dual_k_runs():
    cfg = _cfg(campaign="ci-coverage", reps=3, n=400, k=20, k_boot=40,
               B=60, model=CLAYTON_QUARTER, alphas=[0.1], grid_size=25)
    res = run_campaign(cfg)
    ((alpha, level, coverage, length),) = res.rows
    assert 0.0 <= coverage <= 1.0 and length > 0.0


# ---------------------------------------------------------------------------
# result emission


def test_result_write_and_manifest(tmp_path):
    res = run_campaign(_mse_cfg(reps=4))
    paths = res.write(tmp_path)
    with open(paths["results"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "mse", "var", "bias2"]
    assert len(rows) == 1 + len(res.rows)
    assert [float(c) for c in rows[1]] == list(map(float, res.rows[0]))

    with open(paths["manifest"]) as fh:
        manifest = json.load(fh)
    assert manifest["format_version"] == 1
    assert manifest["campaign"] == "mse-sweep"
    assert manifest["config"]["seed"] == 42
    assert manifest["extras"]["argmin_k"] in (10, 20)
    expected = hashlib.sha256(
        json.dumps(manifest["config"], sort_keys=True).encode()
    ).hexdigest()
    assert manifest["config_sha256"] == expected
    assert manifest["meta"]["effective_reps"] == 4
