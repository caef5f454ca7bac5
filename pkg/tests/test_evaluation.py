import numpy as np
import pytest

from hawkestrack.errors import DataError
from hawkestrack.evaluation import (
    paired_percentiles,
    read_loss_trace,
    read_matrix_csv,
    regret_curve,
    roc,
    significance_count,
    variation_curve,
    write_loss_trace,
    write_matrix_csv,
)
from hawkestrack.events import discretize
from hawkestrack.kernels import ExponentialKernel, build_dynamics
from hawkestrack.simulate import GeneratorConfig, simulate_hawkes
from hawkestrack.tracker import direct_calculation


def test_regret_identical_traces_zero():
    losses = np.random.default_rng(0).normal(size=50)
    assert np.array_equal(regret_curve(losses, losses), np.zeros(50))
    with pytest.raises(DataError):
        regret_curve(losses, losses[:-1])


def test_variation_zero_for_oracle_rates():
    # rates generated by the dynamics themselves have zero variation
    mu = np.full(2, 0.1)
    W = 0.3 * np.eye(2)
    kern = ExponentialKernel(0.5)
    stream = simulate_hawkes(GeneratorConfig(p=2, T=200.0, mu_bar=mu, W=W, kernel=kern, seed=1))
    binned = discretize(stream, 0.5)
    res = direct_calculation(binned, kern, W, mu, record_rates=True, lam_min=0.0, lam_max=np.inf)
    dyn = build_dynamics(kern, binned)
    var = variation_curve(res.rates, dyn, W, mu)
    assert var[-1] == pytest.approx(0.0, abs=1e-10)


def test_variation_positive_for_perturbed_rates():
    mu = np.full(2, 0.1)
    W = 0.3 * np.eye(2)
    kern = ExponentialKernel(0.5)
    stream = simulate_hawkes(GeneratorConfig(p=2, T=100.0, mu_bar=mu, W=W, kernel=kern, seed=2))
    binned = discretize(stream, 0.5)
    res = direct_calculation(binned, kern, W, mu, record_rates=True)
    rng = np.random.default_rng(3)
    noisy = res.rates + rng.uniform(0.01, 0.02, res.rates.shape)
    dyn = build_dynamics(kern, binned)
    var = variation_curve(noisy, dyn, W, mu)
    assert np.all(np.diff(var) >= 0)
    assert var[-1] > 0.01


def test_paired_percentiles_degenerate_and_known_quantiles():
    flat = np.zeros((7, 4))
    bands = paired_percentiles(flat)
    assert np.array_equal(bands, np.zeros((5, 4)))
    # 101 shifted trials: percentiles of {0..100} are exact order statistics
    diffs = np.arange(101, dtype=float)[:, None] * np.ones((1, 3))
    bands = paired_percentiles(diffs, (5, 50, 95))
    assert np.allclose(bands[0], 5.0)
    assert np.allclose(bands[1], 50.0)
    assert np.allclose(bands[2], 95.0)


def test_paired_percentiles_ignore_nan_prefix():
    diffs = np.ones((4, 5))
    diffs[:, 0] = np.nan
    bands = paired_percentiles(diffs, (50,))
    assert np.isnan(bands[0, 0])
    assert np.allclose(bands[0, 1:], 1.0)


def test_roc_perfect_estimate():
    W_true = np.array([[0.0, 0.7], [0.2, 0.0]])
    curve = roc(W_true, W_true)
    assert curve.auc == pytest.approx(1.0)
    assert curve.tpr[0] == 0.0 and curve.tpr[-1] == 1.0
    assert np.all(np.diff(curve.tpr) >= 0) and np.all(np.diff(curve.fpr) >= 0)


def test_roc_random_estimate_near_half():
    rng = np.random.default_rng(4)
    W_true = (rng.random((6, 6)) < 0.4) * rng.random((6, 6))
    aucs = [roc(rng.random((6, 6)), W_true).auc for _ in range(100)]
    assert abs(np.mean(aucs) - 0.5) < 0.05


def test_roc_invariant_to_monotone_rescaling():
    rng = np.random.default_rng(5)
    W_true = (rng.random((5, 5)) < 0.3) * rng.random((5, 5))
    est = rng.random((5, 5))
    a = roc(est, W_true).auc
    b = roc(np.exp(3 * est) + 7, W_true).auc
    assert a == pytest.approx(b, abs=1e-12)


def test_roc_top10_mode_uses_largest_decile():
    rng = np.random.default_rng(6)
    W_true = rng.random((10, 10))
    curve = roc(W_true, W_true, mode="top10")
    assert curve.auc == pytest.approx(1.0)
    # 10% of 100 entries -> 10 positives
    m = np.sort(W_true.ravel())[::-1][9]
    assert (np.abs(W_true.ravel()) >= m).sum() == 10


def test_roc_rejects_degenerate_truth():
    with pytest.raises(DataError):
        roc(np.ones((2, 2)), np.zeros((2, 2)))


def test_significance_count_cases():
    sym = np.array([[0.0, 0.9, 0.1], [0.9, 0.0, 0.8], [0.1, 0.8, 0.0]])
    above, below = significance_count(sym, 0.5)
    assert above == below == 2
    lower = np.tril(np.full((4, 4), 0.9), k=-1)
    above, below = significance_count(lower, 0.5)
    assert above == 0 and below == 6
    # ordering permutes rows/cols jointly: reversing flips the split
    above_r, below_r = significance_count(lower, 0.5, ordering=np.arange(4)[::-1])
    assert above_r == 6 and below_r == 0


def test_significance_count_random_binomial_split():
    rng = np.random.default_rng(7)
    above_frac = []
    for _ in range(200):
        W = rng.random((8, 8))
        a, b = significance_count(W, 0.5)
        above_frac.append(a / (a + b))
    assert abs(np.mean(above_frac) - 0.5) < 0.03


def test_matrix_and_loss_trace_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    M = rng.normal(size=(3, 4))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, M)
    assert np.array_equal(read_matrix_csv(path), M)  # repr round-trips exactly

    losses = rng.normal(size=20)
    ma = np.full(20, np.nan)
    ma[4:] = 1.5
    tpath = tmp_path / "loss.csv"
    write_loss_trace(tpath, losses, ma)
    cols = read_loss_trace(tpath)
    assert np.array_equal(cols["instantaneous"], losses)
    assert np.allclose(cols["cumulative"], np.cumsum(losses))
    assert np.isnan(cols["moving_avg"][:4]).all()


def test_csv_emission_deterministic(tmp_path):
    losses = np.random.default_rng(9).normal(size=15)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_loss_trace(p1, losses)
    write_loss_trace(p2, losses)
    assert p1.read_bytes() == p2.read_bytes()
