import numpy as np
import pytest
from scipy.stats import norm

from fvsim.bessel import (BesselParams, TailTable, domination_check,
                          simulate_reflected_bessel)
from fvsim.geometry import interval
from fvsim.particle_system import TrajectorySeries


def reflected_bm_cdf(y, t, x0, length, k_max=20):
    """Image-series CDF of Brownian motion reflected at 0 and `length`."""
    total = np.zeros_like(np.asarray(y, dtype=float))
    s = np.sqrt(t)
    for k in range(-k_max, k_max + 1):
        total += norm.cdf((y - x0 + 2 * k * length) / s) - norm.cdf((-x0 + 2 * k * length) / s)
        total += norm.cdf((y + x0 + 2 * k * length) / s) - norm.cdf((x0 + 2 * k * length) / s)
    return total


def test_params_validation():
    with pytest.raises(ValueError):
        BesselParams(dimension=0, drift_bound=0.0, radius=1.0)
    with pytest.raises(ValueError):
        BesselParams(dimension=1, drift_bound=-1.0, radius=1.0)
    with pytest.raises(ValueError):
        BesselParams(dimension=1, drift_bound=0.0, radius=0.0)


def test_dt_resolution_guard():
    p = BesselParams(dimension=1, drift_bound=0.0, radius=1.0)
    with pytest.raises(ValueError, match="dt"):
        simulate_reflected_bessel(p, T=1.0, dt=0.02, n_paths=10, seed=1)


def test_delta_equal_r_has_probability_one():
    p = BesselParams(dimension=1, drift_bound=0.5, radius=1.0)
    table = simulate_reflected_bessel(p, T=1.0, dt=0.01, n_paths=500, seed=2,
                                      deltas=[0.25, 1.0])
    assert np.all(table.probs[:, -1] == 1.0)  # eta <= r always


def test_paths_stay_in_range_and_tail_monotone_in_delta():
    for d in (1, 2):
        p = BesselParams(dimension=d, drift_bound=1.0, radius=0.7)
        table = simulate_reflected_bessel(p, T=0.5, dt=0.004, n_paths=400, seed=3,
                                          return_paths=True)
        assert np.all(table.paths >= 0.0) and np.all(table.paths <= 0.7)
        assert np.all(np.diff(table.probs, axis=1) >= 0)


def test_reflected_bm_matches_image_series():
    # d=1, B=0: the folded Euler chain is exactly reflected Brownian motion
    p = BesselParams(dimension=1, drift_bound=0.0, radius=1.0)
    n = 20_000
    deltas = np.linspace(0.05, 1.0, 20)
    table = simulate_reflected_bessel(p, T=1.0, dt=1e-3, n_paths=n, seed=4,
                                      times=[1.0], deltas=deltas)
    exact = 1.0 - reflected_bm_cdf(1.0 - deltas, 1.0, x0=1.0, length=1.0)
    err = np.abs(table.probs[0] - exact)
    assert np.max(err) <= 3.0 * (1.0 / (2.0 * np.sqrt(n)))


def test_tail_decreases_in_time_without_drift():
    p = BesselParams(dimension=1, drift_bound=0.0, radius=1.0)
    table = simulate_reflected_bessel(p, T=1.0, dt=2e-3, n_paths=4000, seed=5,
                                      times=[0.05, 1.0], deltas=[0.3])
    early, late = table.probs[0, 0], table.probs[1, 0]
    slack = 3.0 * (table.stderrs[0, 0] + table.stderrs[1, 0])
    assert early >= late - slack


def test_strong_drift_pins_near_barrier():
    # strong upward drift concentrates the path against the reflecting barrier;
    # by t=1 the B=10 process is fully relaxed, so the exact tail is the
    # stationary one for density ~ exp(2 B x) on [0, 1]
    B = 10.0
    exact = (np.exp(2 * B) - np.exp(2 * B * 0.9)) / (np.exp(2 * B) - 1.0)
    p = BesselParams(dimension=1, drift_bound=B, radius=1.0)
    table = simulate_reflected_bessel(p, T=1.0, dt=2.5e-4, n_paths=20_000, seed=6,
                                      times=[1.0], deltas=[0.1])
    mc = table.probs[0, 0]
    assert mc >= 0.8
    assert abs(mc - exact) <= 3.0 * table.stderrs[0, 0] + 2.0 * np.sqrt(2.5e-4)


def test_thread_count_does_not_change_table():
    p = BesselParams(dimension=2, drift_bound=1.0, radius=1.0)
    kw = dict(T=0.5, dt=0.005, n_paths=3000, seed=7, deltas=[0.1, 0.5])
    t1 = simulate_reflected_bessel(p, threads=1, **kw)
    t4 = simulate_reflected_bessel(p, threads=4, **kw)
    assert np.array_equal(t1.probs, t4.probs)
    assert np.array_equal(t1.stderrs, t4.stderrs)


def _series_with_positions(xs):
    pos = np.asarray(xs, dtype=float)[None, :, None]
    return TrajectorySeries(domain=interval(-1, 1), times=np.array([1.0]),
                            positions=pos, js=np.array([0.0]))


def _tail_fixture(prob):
    p = BesselParams(dimension=1, drift_bound=0.0, radius=1.0)
    return TailTable(params=p, times=np.array([1.0]), deltas=np.array([0.05]),
                     probs=np.array([[prob]]), stderrs=np.array([[0.001]]), n_paths=10_000)


def test_domination_check_trivial_pass():
    series = _series_with_positions(np.zeros(50))  # all mass at the center
    rep = domination_check(_tail_fixture(0.1), series, interval(-1, 1), t=1.0, delta=0.05)
    assert rep.passed and rep.empirical_mass == 0.0


def test_domination_check_constructed_violation():
    series = _series_with_positions(np.full(50, 0.999))  # all mass at the wall
    rep = domination_check(_tail_fixture(0.1), series, interval(-1, 1), t=1.0, delta=0.05)
    assert not rep.passed and rep.empirical_mass == 1.0


def test_domination_check_missing_delta():
    series = _series_with_positions(np.zeros(50))
    with pytest.raises(Exception, match="not tabulated"):
        domination_check(_tail_fixture(0.1), series, interval(-1, 1), t=1.0, delta=0.3)
