import numpy as np
import pytest

from hawkestrack.errors import ConfigError
from hawkestrack.events import EventStream, discretize
from hawkestrack.kernels import ExponentialKernel, RectangularKernel, build_dynamics
from hawkestrack.loss import dual_bregman, instantaneous_loss
from hawkestrack.simulate import GeneratorConfig, simulate_hawkes
from hawkestrack.tracker import (
    Tracker,
    direct_calculation,
    dual_dynamics,
    dual_update_closed_form,
    dual_update_objective,
    eta_schedule,
    run_tracking,
    tune_eta0,
)

ALPHA_E = float(np.exp(-1.0))


def small_sim(seed=0, p=2, T=300.0, delta=0.25, w_scale=0.3):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0, w_scale, (p, p))
    mu = rng.uniform(0.05, 0.15, p)
    kern = ExponentialKernel(0.5)
    stream = simulate_hawkes(GeneratorConfig(p=p, T=T, mu_bar=mu, W=W, kernel=kern, seed=seed))
    return stream, discretize(stream, delta), kern, W, mu


def test_eta_schedule_forms():
    const = eta_schedule(10.0, "constant", 400)
    assert np.allclose(const, 10.0 / 20.0)
    dec = eta_schedule(0.5, "sqrt_t", 4)
    assert np.allclose(dec, 0.5 / np.sqrt([1, 2, 3, 4]))


def test_eta_schedule_rejects_out_of_range():
    with pytest.raises(ConfigError):
        eta_schedule(30.0, "constant", 4)  # 30/2 = 15 > 1
    with pytest.raises(ConfigError):
        eta_schedule(2.0, "sqrt_t", 100)  # eta_1 = 2
    with pytest.raises(ConfigError):
        eta_schedule(1.0, "linear", 10)


def test_step_hand_arithmetic():
    # p=1, eta=0.5, lam=2, x/delta=4 -> lam_tilde = 3
    binned_delta = 0.5
    tr = Tracker(mu_bar=np.array([2.0]), delta=binned_delta, lam_min=0.1, lam_max=10.0, eta=[0.5])
    from hawkestrack.kernels import DynamicsStep

    step = DynamicsStep(a_diag=np.array([1.0]), y=np.array([0.0]), c=np.array([0.0]))
    tr.step(np.array([2.0]), step, np.zeros((1, 1)))  # x/delta = 4
    assert tr.lam[0] == pytest.approx(3.0)


def test_step_fixed_point_when_counts_match_rate():
    tr = Tracker(mu_bar=np.array([4.0]), delta=0.5, lam_min=0.1, lam_max=10.0, eta=[0.3])
    from hawkestrack.kernels import DynamicsStep

    step = DynamicsStep(a_diag=np.array([1.0]), y=np.array([0.0]), c=np.array([0.0]))
    tr.step(np.array([2.0]), step, np.zeros((1, 1)))  # x/delta = 4 = lam
    assert tr.lam[0] == pytest.approx(4.0)


def test_eta_zero_is_direct_calculation():
    stream, binned, kern, W, mu = small_sim(1)
    a = run_tracking(binned, kern, W, mu, eta0=0.0, record_rates=True)
    b = direct_calculation(binned, kern, W, mu, record_rates=True)
    assert np.array_equal(a.rates, b.rates)
    assert np.array_equal(a.losses, b.losses)


def test_zero_event_zero_w_stays_at_baseline():
    # with the decision-space floor at the baseline, mu_bar is a fixed point
    # of the innovation + dynamics composition even for eta > 0
    stream = EventStream(times=np.zeros(0), actors=np.zeros(0, dtype=np.int64), p=2, horizon=10.0)
    binned = discretize(stream, 0.5)
    mu = np.array([0.25, 0.25])
    res = run_tracking(
        binned, ExponentialKernel(0.5), np.zeros((2, 2)), mu, eta0=2.0,
        lam_min=0.25, lam_max=10.0, record_rates=True,
    )
    assert np.allclose(res.rates, mu)
    assert np.allclose(res.lam_next, mu)
    # and exactly, for any bounds, when eta = 0
    res0 = run_tracking(binned, ExponentialKernel(0.5), np.zeros((2, 2)), np.array([0.3, 0.2]), eta0=0.0, record_rates=True)
    assert np.allclose(res0.rates, [0.3, 0.2])


def test_feasibility_every_rate_in_bounds():
    stream, binned, kern, W, mu = small_sim(2, w_scale=0.6)
    lam_min, lam_max = 0.05, 0.5
    res = run_tracking(binned, kern, W, mu, eta0=5.0, lam_min=lam_min, lam_max=lam_max, record_rates=True)
    assert res.rates.min() >= lam_min
    assert res.rates.max() <= lam_max


def test_fast_path_matches_reference_state_machine():
    stream, binned, kern, W, mu = small_sim(3)
    eta = eta_schedule(0.8, "sqrt_t", binned.n_bins)
    fast = run_tracking(binned, kern, W, mu, eta=eta, lam_min=0.01, lam_max=20.0, record_rates=True)
    dyn = build_dynamics(kern, binned, W=W)
    ref = Tracker(mu_bar=mu, delta=binned.delta, lam_min=0.01, lam_max=20.0, eta=eta)
    losses = []
    for t in range(1, binned.n_bins + 1):
        assert np.allclose(ref.lam, fast.rates[t - 1], rtol=1e-12, atol=1e-14)
        losses.append(ref.step(binned.counts_at(t), dyn.step(t, mu), W))
    assert np.allclose(losses, fast.losses, rtol=1e-12)
    assert np.allclose(ref.lam, fast.lam_next, rtol=1e-12)


def test_losses_match_instantaneous_loss_of_recorded_rates():
    stream, binned, kern, W, mu = small_sim(4)
    res = run_tracking(binned, kern, W, mu, eta0=2.0, record_rates=True)
    for t in (1, binned.n_bins // 2, binned.n_bins):
        expect = instantaneous_loss(res.rates[t - 1], binned.counts_at(t), binned.delta)
        assert res.losses[t - 1] == pytest.approx(expect, rel=1e-12)


def test_contractivity_of_dual_dynamics():
    # Lemma-2 property: diagonal A in [0,1], b >= 0 never grow the divergence
    rng = np.random.default_rng(5)
    for _ in range(2000):
        p = rng.integers(1, 9)
        t1 = rng.uniform(-4, 2, p)
        t2 = rng.uniform(-4, 2, p)
        a = rng.uniform(0, 1, p)
        b = rng.uniform(0, 2, p) * (rng.random(p) < 0.85)
        delta = 10 ** rng.uniform(-2, 0)
        d_after = dual_bregman(dual_dynamics(t1, a, b, delta), dual_dynamics(t2, a, b, delta))
        assert d_after <= dual_bregman(t1, t2) + 1e-12


def test_dual_update_closed_form_matches_numerical_minimizer():
    from scipy import optimize

    rng = np.random.default_rng(6)
    for _ in range(30):
        delta = 10 ** rng.uniform(-2, 0)
        lo, hi = np.log(delta * 1e-4), np.log(delta * 1e4)
        theta_hat = rng.uniform(np.log(delta * 0.05), np.log(delta * 20))
        x = float(rng.poisson(1.0))
        eta = rng.uniform(0.05, 0.95)
        closed = dual_update_closed_form(np.array([theta_hat]), np.array([x]), eta)[0]
        res = optimize.minimize_scalar(
            lambda th: dual_update_objective(np.array([th]), np.array([theta_hat]), np.array([x]), eta),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13},
        )
        assert np.exp(res.x) == pytest.approx(np.exp(closed), abs=2e-7)


def test_empirical_regret_sublinearity():
    # per-round regret vs the oracle exact rate shrinks as T grows
    kern = ExponentialKernel(0.5)
    p = 2
    rng = np.random.default_rng(7)
    W = rng.uniform(0, 0.3, (p, p))
    mu = np.full(p, 0.1)
    rates_per_T = {}
    for T in (400.0, 800.0, 1600.0):
        vals = []
        for seed in range(8):
            stream = simulate_hawkes(GeneratorConfig(p=p, T=T, mu_bar=mu, W=W, kernel=kern, seed=seed))
            binned = discretize(stream, 0.25)
            tracked = run_tracking(binned, kern, W, mu, eta0=5.0)
            oracle = direct_calculation(binned, kern, W, mu)
            vals.append((tracked.cumulative_loss - oracle.cumulative_loss) / binned.n_bins)
        rates_per_T[T] = float(np.mean(vals))
    assert rates_per_T[1600.0] < rates_per_T[800.0] < rates_per_T[400.0]


def test_rectangular_tracking_runs_and_stays_feasible():
    stream, binned, _, W, mu = small_sim(8)
    rect = RectangularKernel(2.0)
    res = run_tracking(binned, rect, W, mu, eta0=2.0, lam_min=0.01, lam_max=30.0, record_rates=True)
    assert res.rates.min() >= 0.01
    assert np.isfinite(res.losses).all()


def test_tune_eta0_picks_grid_member_and_zero_data_safe():
    stream, binned, kern, W, mu = small_sim(9)
    grid = (0.5, 2.0, 8.0)
    choice = tune_eta0(binned, kern, W, mu, grid=grid, lam_min=0.01, lam_max=30.0)
    assert choice in grid


def test_forecast_is_next_step_rate():
    stream, binned, kern, W, mu = small_sim(10)
    res = run_tracking(binned, kern, W, mu, eta0=2.0, record_rates=True)
    # append one empty bin: the recorded rate there must equal lam_next
    stream2 = EventStream(times=stream.times, actors=stream.actors, p=stream.p, horizon=stream.horizon + binned.delta)
    binned2 = discretize(stream2, binned.delta)
    assert binned2.n_bins == binned.n_bins + 1
    res2 = run_tracking(binned2, kern, W, mu, eta0=2.0, record_rates=True, eta=None)
    # schedules differ in length (constant eta0/sqrt(n)), so rerun with matched eta
    eta = np.concatenate([res.eta, [res.eta[-1]]])
    res2 = run_tracking(binned2, kern, W, mu, eta=np.clip(eta, 0, 1), record_rates=True)
    assert np.allclose(res2.rates[binned.n_bins], res.lam_next, rtol=1e-12)
