import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaycredit import (BrownianIncrements, ConfigurationError, DomainError, FirmModel, HistoryPath,
                         MarketParams, OutOfRangeError, Scheme, SimConfig, SimulationError, VolSpec,
                         exact_representation, girsanov_kernel, risk_neutral_simulate, simulate_em,
                         vol_integral)
from delaycredit.rng import standard_normals
from delaycredit.sdde import exact_paths, simulate_paths

from oracles import delay_ode_oracle


def stacked_increments(seeds, n_steps, h):
    """Path 0 of each seed, one column per seed."""
    return np.column_stack([standard_normals(s, 0, 1, n_steps)[:, 0] for s in seeds]) * math.sqrt(h)


@pytest.fixture
def flat_history():
    return HistoryPath.constant(100.0, -1.0, 0.0, 1 / 64)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_zero_vol_zero_drift_is_constant(flat_history, scheme):
    wavy = HistoryPath.from_function(lambda t: 100 + 5 * math.sin(4 * t), -1.0, 0.0, 1 / 64)
    model = FirmModel(alpha=0.0, l1=0.5, l2=1.0, vol=VolSpec.constant(0.0))
    path = simulate_em(model, wavy, SimConfig(step=0.01, horizon=2.0, seed=3, scheme=scheme))
    future = path.values[path.times >= -1e-12]
    assert np.all(future == wavy.values[-1])


@pytest.mark.parametrize("scheme", list(Scheme))
def test_zero_vol_matches_delay_ode(scheme):
    phi = lambda t: 1.0 + 0.1 * math.sin(2.0 * t)
    model = FirmModel(alpha=0.05, l1=0.5, l2=0.5, vol=VolSpec.constant(0.0))
    hist = HistoryPath.from_function(phi, -0.5, 0.0, 1e-3)
    h = 1e-3
    path = simulate_em(model, hist, SimConfig(step=h, horizon=2.0, seed=1, scheme=scheme))
    t_ref, v_ref = delay_ode_oracle(phi, 0.0, 0.05, 0.5, 2.0, h / 100)
    sim = path.values[path.times >= -1e-12]
    ref = v_ref[::100]
    assert sim.shape == ref.shape
    err = np.max(np.abs(sim - ref))
    assert err < 1e-4


def test_seed_determinism(affine_model, wavy_history):
    cfg = SimConfig(step=1 / 128, horizon=3.0, seed=2024)
    a = simulate_em(affine_model, wavy_history, cfg)
    b = simulate_em(affine_model, wavy_history, cfg)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_em(affine_model, wavy_history, SimConfig(step=1 / 128, horizon=3.0, seed=2025))
    assert not np.array_equal(a.values, c.values)


def test_output_grid_contains_history(affine_model, wavy_history):
    path = simulate_em(affine_model, wavy_history, SimConfig(step=1 / 128, horizon=1.0, seed=0))
    assert path.t0 == pytest.approx(-1.0)
    assert path.t_end == pytest.approx(1.0)
    assert path.dt == pytest.approx(1 / 128)
    np.testing.assert_allclose(path.values[:129], wavy_history.values[::2], rtol=0, atol=1e-12)


def test_step_longer_than_delay_rejected(affine_model, wavy_history):
    with pytest.raises(ConfigurationError):
        simulate_em(affine_model, wavy_history, SimConfig(step=0.6, horizon=0.6, seed=0))


def test_history_must_cover_delay(affine_model):
    short = HistoryPath.constant(100.0, -0.25, 0.0, 1 / 64)
    with pytest.raises(OutOfRangeError):
        simulate_em(affine_model, short, SimConfig(step=1 / 64, horizon=1.0, seed=0))


def test_euler_failure_reports_step(flat_history):
    model = FirmModel(alpha=0.0, l1=0.5, l2=0.5, vol=VolSpec.constant(0.5), payout_c=0.0)
    # a single huge negative shock drives plain Euler through zero
    dw = np.zeros(40)
    dw[7] = -3.0
    with pytest.raises(SimulationError) as info:
        simulate_em(model, flat_history, SimConfig(0.01, 0.4, 0, Scheme.EULER),
                    increments=BrownianIncrements(0.01, dw))
    assert info.value.step == 7
    path = simulate_em(model, flat_history, SimConfig(0.01, 0.4, 0, Scheme.LOG_EULER),
                       increments=BrownianIncrements(0.01, dw))
    assert np.all(path.values > 0)


def test_payout_requires_euler(flat_history):
    model = FirmModel(alpha=0.0, l1=0.5, l2=0.5, vol=VolSpec.constant(0.2), payout_c=1.0)
    with pytest.raises(ConfigurationError):
        simulate_em(model, flat_history, SimConfig(0.01, 0.5, 0, Scheme.LOG_EULER))
    with pytest.raises(ConfigurationError):
        exact_representation(model, flat_history, BrownianIncrements.generate(0, 10, 0.01))
    # default scheme switches to plain Euler when C != 0
    path = simulate_em(model, flat_history, SimConfig(0.01, 0.5, 0))
    assert path.values[-1] > 0


@pytest.mark.parametrize("h", [1e-2, 5e-3, 2.5e-3])
def test_exact_representation_agrees_with_log_euler(affine_model, wavy_history, h):
    inc = BrownianIncrements.generate(11, int(round(2.0 / h)), h)
    cfg = SimConfig(step=h, horizon=2.0, seed=11, scheme=Scheme.LOG_EULER)
    a = simulate_em(affine_model, wavy_history, cfg, increments=inc)
    b = exact_representation(affine_model, wavy_history, inc)
    sup = np.max(np.abs(a.values - b.values)) / np.max(a.values)
    assert sup <= h


def test_exact_representation_with_inert_delay_feedback():
    """Horizon shorter than l1: the drift only sees the history."""
    phi = lambda t: 100.0 + 20.0 * t
    hist = HistoryPath.from_function(phi, -1.0, 0.0, 1 / 1024)
    sigma, alpha, l1, T = 0.25, 0.001, 1.0, 0.75
    model = FirmModel(alpha=alpha, l1=l1, l2=0.9, vol=VolSpec.constant(sigma))
    h = 1 / 1024
    inc = BrownianIncrements.generate(5, int(T / h), h)
    path = exact_representation(model, hist, inc)
    # int_0^T phi(s - l1) ds for the linear history, then the GBM-type exponent
    drift_int = 100.0 * T + 20.0 * (0.5 * T * T - l1 * T)
    expected = phi(0.0) * math.exp(alpha * drift_int - 0.5 * sigma**2 * T + sigma * inc.dw.sum())
    # left-point rule error alpha * 20 * h * T / 2 on the exponent
    assert path.values[-1] == pytest.approx(expected, rel=2 * alpha * 20 * h * T)


def test_risk_neutral_constant_vol_is_gbm(gbm_model, flat_history, market):
    h = 1 / 64
    inc = BrownianIncrements.generate(9, 128, h)
    path = risk_neutral_simulate(gbm_model, flat_history, market, SimConfig(h, 2.0, 9), increments=inc)
    w = np.concatenate([[0.0], np.cumsum(inc.dw)])
    t = h * np.arange(129)
    expected = 100.0 * np.exp((market.r - 0.02) * t + 0.2 * w)
    np.testing.assert_allclose(path.values[-129:], expected, rtol=1e-12)


def test_risk_neutral_moments(gbm_model, flat_history, market):
    n, h, T = 100_000, 1 / 16, 1.0
    dw = standard_normals(77, 0, n, 16) * math.sqrt(h)
    V = simulate_paths(gbm_model, flat_history, h, dw, Scheme.LOG_EULER, rate=market.r)
    logs = np.log(V[-1])
    se = logs.std(ddof=1) / math.sqrt(n)
    assert abs(logs.mean() - (math.log(100.0) + (market.r - 0.02) * T)) < 3 * se
    disc = math.exp(-market.r * T) * V[-1]
    assert abs(disc.mean() - 100.0) < 3 * disc.std(ddof=1) / math.sqrt(n)


def test_risk_neutral_seed_determinism(affine_model, wavy_history, market):
    cfg = SimConfig(step=1 / 64, horizon=2.5, seed=123)
    a = risk_neutral_simulate(affine_model, wavy_history, market, cfg)
    b = risk_neutral_simulate(affine_model, wavy_history, market, cfg)
    np.testing.assert_array_equal(a.values, b.values)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_positivity_any_seed(seed):
    model = FirmModel(alpha=-0.01, l1=0.25, l2=0.25, vol=VolSpec.affine(0.9, 0.002, 0.3))
    hist = HistoryPath.constant(50.0, -0.25, 0.0, 1 / 64)
    inc = BrownianIncrements.generate(seed, 256, 1 / 64)
    cfg = SimConfig(1 / 64, 4.0, seed, Scheme.LOG_EULER)
    assert np.all(simulate_em(model, hist, cfg, increments=inc).values > 0)
    assert np.all(exact_representation(model, hist, inc).values > 0)


def test_euler_strong_order_half():
    """Sup-norm error against exact GBM halves when the step is quartered."""
    sigma = 0.2
    model = FirmModel(alpha=0.0, l1=1.0, l2=1.0, vol=VolSpec.constant(sigma))
    hist = HistoryPath.constant(100.0, -1.0, 0.0, 1 / 64)
    fine = stacked_increments(range(200), 1024, 1 / 1024)

    def mean_sup_error(factor):
        dw = fine.reshape(1024 // factor, factor, 200).sum(axis=1)
        h = factor / 1024
        V = simulate_paths(model, hist, h, dw, Scheme.EULER)
        w = np.vstack([np.zeros(200), np.cumsum(dw, axis=0)])
        t = h * np.arange(dw.shape[0] + 1)[:, None]
        exact = 100.0 * np.exp(-0.5 * sigma**2 * t + sigma * w)
        return np.mean(np.max(np.abs(V - exact), axis=0))

    ratio = mean_sup_error(16) / mean_sup_error(4)
    assert 1.7 <= ratio <= 2.3


def test_girsanov_zero_numerator(wavy_history, market):
    v_del = wavy_history.lookup(-0.5)
    model = FirmModel(alpha=market.r / v_del, l1=0.5, l2=1.0, vol=VolSpec.constant(0.2))
    assert girsanov_kernel(model, wavy_history, market, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_girsanov_constant_vol(wavy_history, market):
    model = FirmModel(alpha=0.0, l1=0.5, l2=1.0, vol=VolSpec.constant(0.2))
    assert girsanov_kernel(model, wavy_history, market, 0.0) == pytest.approx(-0.25)


def test_girsanov_bounded_near_floor(market):
    vol = VolSpec.table([1, 200], [0.001, 0.002], floor=0.02)
    model = FirmModel(alpha=0.003, l1=0.5, l2=1.0, vol=vol)
    hist = HistoryPath.from_function(lambda t: 100 + 30 * math.cos(5 * t), -1.0, 0.0, 1 / 64)
    v_max = hist.values.max()
    bound = (abs(model.alpha) * v_max + market.r) / vol.floor
    assert abs(girsanov_kernel(model, hist, market, 0.0)) <= bound


def test_girsanov_rejects_zero_vol(wavy_history, market):
    model = FirmModel(alpha=0.0, l1=0.5, l2=1.0, vol=VolSpec.constant(0.0))
    with pytest.raises(DomainError):
        girsanov_kernel(model, wavy_history, market, 0.0)


def test_girsanov_coverage(wavy_history, market, affine_model):
    with pytest.raises(OutOfRangeError):
        girsanov_kernel(affine_model, wavy_history, market, -0.5)


def test_vol_integral_constant(wavy_history):
    assert vol_integral(wavy_history, VolSpec.constant(0.3), 1.0, 0.1, 0.85) == pytest.approx(0.09 * 0.75, rel=1e-14)


def test_vol_integral_two_levels():
    # first half at 80, second half at 120, one linear transition interval
    path = HistoryPath(-1.0, 0.25, [80.0, 80.0, 80.0, 120.0, 120.0])
    # trapezoid with g^2 = 0.0324 at three nodes and 0.0484 at two nodes, dt = 0.25
    expected = 0.25 * (0.5 * 0.0324 + 0.0324 + 0.0324 + 0.0484 + 0.5 * 0.0484)
    assert vol_integral(path, VolSpec.affine(0.1, 0.001, 0.05), 1.0, 0.0, 1.0) == pytest.approx(expected, rel=1e-13)


def test_vol_integral_additive(wavy_history, affine_model):
    vol = affine_model.vol
    full = vol_integral(wavy_history, vol, 1.0, 0.013, 0.97)
    u = 0.5  # u - l2 = -0.5 is a node
    split = vol_integral(wavy_history, vol, 1.0, 0.013, u) + vol_integral(wavy_history, vol, 1.0, u, 0.97)
    assert abs(full - split) <= 1e-12


def test_vol_integral_vanishes_as_interval_shrinks(wavy_history, affine_model):
    vals = [vol_integral(wavy_history, affine_model.vol, 1.0, 0.5 - e, 0.5) for e in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 1e-7
    with pytest.raises(DomainError):
        vol_integral(wavy_history, affine_model.vol, 1.0, 0.5, 0.5)


def test_vol_integral_coverage_error(wavy_history, affine_model):
    with pytest.raises(OutOfRangeError) as info:
        vol_integral(wavy_history, affine_model.vol, 1.0, -0.5, 0.5)
    assert info.value.required == (-1.5, -0.5)


def test_simulated_path_csv_round_trip(tmp_path, affine_model, wavy_history):
    path = simulate_em(affine_model, wavy_history, SimConfig(1 / 128, 1.0, 4))
    back = HistoryPath.from_csv(path.to_csv(tmp_path / "p.csv"))
    np.testing.assert_array_equal(back.values, path.values)
