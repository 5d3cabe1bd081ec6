import json
import math

import numpy as np
import pytest
from scipy import stats

from frailtyfit.simulate import (CALIBRATION_SEED, SimulationScenario, _calibration_times, bundled_scenarios,
                                 calibrate_censoring, censoring_fraction, event_times, generate, load_scenarios,
                                 scenario_path, stream, write_sidecar)

DEFAULT = SimulationScenario()


def test_scenario_defaults():
    assert (DEFAULT.alpha, DEFAULT.lam, DEFAULT.beta, DEFAULT.theta) == (3.0, 0.007, (1.0, -1.0, 0.5), 0.5)
    assert DEFAULT.name == "g40_n10_c20"
    assert DEFAULT.truth() == {"beta1": 1.0, "beta2": -1.0, "beta3": 0.5, "theta": 0.5, "alpha": 3.0,
                             "lambda": 0.007}


@pytest.mark.parametrize("kwargs", [dict(g=1), dict(n_i=0), dict(alpha=0), dict(lam=-1), dict(theta=-0.1),
                                    dict(censoring=1.0), dict(beta=(1, 2))])
def test_scenario_validation(kwargs):
    with pytest.raises(ValueError):
        SimulationScenario(**kwargs)


def test_scenario_dict_round_trip():
    sc = SimulationScenario(g=12, n_i=3, censoring=0.5, seed=9)
    assert SimulationScenario.from_dict(sc.to_dict()) == sc
    assert sc.to_dict()["lambda"] == 0.007
    with pytest.raises(ValueError, match="unknown"):
        SimulationScenario.from_dict({"g": 3, "shape": 2})


def test_load_scenarios_formats(tmp_path):
    one = tmp_path / "one.json"
    one.write_text(json.dumps({"g": 5, "n_i": 2}))
    many = tmp_path / "many.json"
    many.write_text(json.dumps({"scenarios": [{"g": 5, "n_i": 2}, {"g": 6, "n_i": 2, "lambda": 0.01}]}))
    assert len(load_scenarios(one)) == 1
    assert [s.lam for s in load_scenarios(many)] == [0.007, 0.01]
    with pytest.raises(FileNotFoundError):
        load_scenarios(tmp_path / "missing.json")


def test_bundled_scenarios_cover_the_design():
    names = bundled_scenarios()
    assert "table4_c20" in names
    layouts = {(10, 10), (10, 40), (40, 10), (80, 10), (10, 80)}
    got = set()
    for name in names:
        (sc,) = load_scenarios(name)
        got.add((sc.g, sc.n_i, round(100 * sc.censoring)))
    assert {(g, n, c) for g, n in layouts for c in (20, 50, 80)} <= got
    assert scenario_path("table4_c20.json") == scenario_path("table4_c20")


def test_inverse_transform_identity():
    lam = 0.007
    lp = np.log(1 / lam)
    assert event_times(1.0, lp, 1.0, 3.0, lam) == pytest.approx(1.0, abs=1e-14)


def test_unit_exponential_times():
    sc = SimulationScenario(g=10_000, n_i=10, alpha=1.0, lam=1.0, beta=(0, 0, 0), theta=0.0, censoring=0.0)
    data, z = generate(sc, stream(1))
    assert data.status.all()
    assert abs(data.time.mean() - 1.0) < 0.02
    assert np.all(z == 1.0)


def test_same_seed_is_bit_identical():
    a, za = generate(DEFAULT, stream(42, 3, 7))
    b, zb = generate(DEFAULT, stream(42, 3, 7))
    assert a.time.tobytes() == b.time.tobytes()
    assert a.X.tobytes() == b.X.tobytes()
    assert a.status.tobytes() == b.status.tobytes()
    assert za.tobytes() == zb.tobytes()
    c, _ = generate(DEFAULT, stream(42, 3, 8))
    assert c.time.tobytes() != a.time.tobytes()


def test_generated_times_follow_weibull_law():
    sc = SimulationScenario(g=1000, n_i=10, censoring=0.0)
    data, z = generate(sc, stream(11))
    # under the true law, exp(-H(t | z, x)) is uniform
    H = sc.lam * z[data.cluster] * np.exp(data.X @ np.array(sc.beta)) * data.time**sc.alpha
    assert stats.kstest(np.exp(-H), "uniform").pvalue > 0.001


def test_covariate_laws():
    data, _ = generate(SimulationScenario(g=2000, n_i=10, censoring=0.0), stream(2))
    x1, x2, x3 = data.X.T
    assert stats.kstest(x1, "uniform").pvalue > 0.001
    assert stats.kstest(x2, "norm").pvalue > 0.001
    assert set(np.unique(x3)) == {0.0, 1.0}
    assert abs(x3.mean() - 0.25) < 0.015


def test_frailty_variance():
    _, z = generate(SimulationScenario(g=40_000, n_i=1, censoring=0.0), stream(5))
    assert abs(z.mean() - 1) < 0.01
    assert abs(z.var(ddof=1) - 0.5) < 0.02


def test_calibration_zero_and_monotone():
    assert calibrate_censoring(SimulationScenario(censoring=0.0)) == 0.0
    low = calibrate_censoring(SimulationScenario(censoring=0.2))
    high = calibrate_censoring(SimulationScenario(censoring=0.8))
    assert high > low > 0


def test_calibration_holds_on_fresh_seed():
    sc = SimulationScenario(censoring=0.5)
    rate = calibrate_censoring(sc)
    fresh = _calibration_times(sc, seed=CALIBRATION_SEED + 1)
    assert 0.495 <= censoring_fraction(fresh, rate) <= 0.505


def test_calibration_ignores_seed_and_name():
    a = calibrate_censoring(SimulationScenario(seed=1, name="a"))
    b = calibrate_censoring(SimulationScenario(seed=77, name="b"))
    assert a == b


def test_observed_censoring_concentrates():
    sc = SimulationScenario(g=40, n_i=10, censoring=0.5)
    rate = calibrate_censoring(sc)
    cens = [1 - generate(sc, stream(3, 0, r), cens_rate=rate)[0].status.mean() for r in range(250)]
    assert abs(np.mean(cens) - 0.5) < 0.02


def test_censoring_fraction_helper():
    assert censoring_fraction(np.ones(3), 0.0) == 0.0
    assert censoring_fraction(np.ones(3), math.log(2)) == pytest.approx(0.5)


def test_sidecar(tmp_path):
    path = tmp_path / "s.json"
    write_sidecar(DEFAULT, np.array([0.5, 1.5]), 0.05, path, {"seed": 3})
    obj = json.loads(path.read_text())
    assert obj["true_frailties"] == [0.5, 1.5]
    assert obj["scenario"]["lambda"] == 0.007
    assert obj["seed"] == 3


def test_exponential_link():
    sc = SimulationScenario(g=2000, n_i=1, censoring=0.0, frailty_link="exponential")
    a, w = generate(sc, stream(8))
    b, z = generate(SimulationScenario(g=2000, n_i=1, censoring=0.0), stream(8))
    np.testing.assert_allclose(w, np.exp(z))
    assert np.all(a.time <= b.time)
    assert SimulationScenario.from_dict(sc.to_dict()) == sc
    with pytest.raises(ValueError, match="frailty_link"):
        SimulationScenario(frailty_link="additive")
