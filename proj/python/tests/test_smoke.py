import math
import pathlib

import numpy as np
import pytest

import switchest as se

SCENARIOS = pathlib.Path(__file__).resolve().parents[2] / "scenarios"


def scalar_model(a=0.9):
    return se.DiscreteModeModel(
        A=[[a]], B=np.zeros((1, 0)), G=np.zeros((1, 0)), C=[[1.0]], D=np.zeros((1, 0)),
        H=np.zeros((1, 0)), Q=[[0.1]], R=[[1.0]],
    )


def test_log_likelihood_standard_normal():
    value, rank = se.log_likelihood(np.zeros(2), np.eye(2))
    assert rank == 2
    assert value == pytest.approx(-math.log(2 * math.pi), abs=1e-12)


def test_bayes_update_stays_on_simplex():
    mu = se.update_probabilities(np.array([0.5, 0.5]), np.array([math.log(0.2), math.log(0.8)]))
    assert mu == pytest.approx([0.2, 0.8], abs=1e-15)


def test_scalar_kl():
    d = se.kl_divergence(np.ones((1, 1)), 2 * np.ones((1, 1)), np.ones((1, 1)))
    assert d == pytest.approx(0.5 * math.log(2) - 0.25, abs=1e-14)


def test_filter_matches_kalman_without_inputs():
    model = scalar_model()
    dec = se.decompose(model)
    assert se.diagnose(dec).ok()
    rng = np.random.default_rng(3)
    ys = rng.normal(size=20)
    u = np.zeros(0)
    fs = se.filter_init(dec, np.zeros(1), np.eye(1), ys[:1], u)
    x, p = 0.0, 1.0
    for y in ys[1:]:
        fs = se.filter_step(fs, dec, u, u, np.array([y]))
        xp, pp = 0.9 * x, 0.81 * p + 0.1
        gain = pp / (pp + 1.0)
        x, p = xp + gain * (y - xp), (1 - gain) * pp
    assert fs.x_hat[0] == pytest.approx(x, rel=1e-10)
    assert fs.P_x[0, 0] == pytest.approx(p, rel=1e-10)


def test_steady_state_and_self_report():
    model = scalar_model()
    gains = se.steady_state_gains(se.decompose(model))
    assert gains.R_star2.shape == (1, 1)
    report = se.kl_report(model, [model, scalar_model(0.3)], truth_index=0)
    assert report["closest_mode"] == 0


def test_intersection_run():
    out = se.simulate_and_estimate(str(SCENARIOS / "intersection_imi.json"), seed=2)
    mu = out["mu"]
    assert mu.shape == (901, 3)
    assert np.allclose(mu.sum(axis=1), 1.0, atol=1e-12)
    assert out["metrics"]["mode_accuracy"] > 0.85


def test_config_error_is_typed():
    with pytest.raises(se.ConfigError):
        se.simulate_and_estimate({"preset": "nowhere"})
