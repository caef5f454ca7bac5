import json

import numpy as np
import pytest

from hawkestrack.cli import main
from hawkestrack.config import (
    LEARN_SCHEMA,
    SIMULATE_SCHEMA,
    TRACK_SCHEMA,
    load_mu_bar,
    parse_config_text,
)
from hawkestrack.errors import ConfigError
from hawkestrack.evaluation import read_loss_trace, read_matrix_csv, write_matrix_csv


def test_config_parsing_types_and_defaults():
    cfg = parse_config_text(
        "delta = 0.5\nkernel = exponential 0.9\nmu_bar = 0.1\n# comment\neta0 = 3\n",
        TRACK_SCHEMA,
    )
    assert cfg["delta"] == 0.5
    assert cfg["eta0"] == 3.0
    assert cfg["schedule"] == "constant"
    assert cfg["lambda_min"] == 1e-8


def test_config_rejects_unknown_duplicate_missing():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("delta = 1\nwat = 2\n", TRACK_SCHEMA)
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("delta = 1\ndelta = 2\n", TRACK_SCHEMA)
    with pytest.raises(ConfigError, match="missing required"):
        parse_config_text("delta = 1\n", TRACK_SCHEMA)
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("delta = abc\nkernel = exponential 0.9\nmu_bar = 0.1\n", TRACK_SCHEMA)


def test_config_bool_and_mu_file(tmp_path):
    cfg = parse_config_text(
        "delta = 1\nkernel = exponential 0.9\nmu_bar = mu.csv\nlearn_mu = true\n",
        LEARN_SCHEMA,
        base_dir=tmp_path,
    )
    assert cfg["learn_mu"] is True
    write_matrix_csv(tmp_path / "mu.csv", np.array([[0.1, 0.2]]))
    assert np.allclose(load_mu_bar(cfg, 2), [0.1, 0.2])
    with pytest.raises(ConfigError, match="expected 3"):
        load_mu_bar(cfg, 3)


@pytest.fixture
def workspace(tmp_path):
    """Config files + a simulated event stream for the CLI round trip."""
    w = np.array([[0.3, 0.05], [0.0, 0.25]])
    write_matrix_csv(tmp_path / "W.csv", w)
    (tmp_path / "sim.cfg").write_text(
        "T = 300\nmu_bar = 0.1\nkernel = exponential 0.6\nw_file = W.csv\n"
    )
    (tmp_path / "track.cfg").write_text(
        "delta = 0.5\nkernel = exponential 0.6\nmu_bar = 0.1\nw_file = W.csv\n"
        "eta0 = 2\nlambda_max = 50\n"
    )
    (tmp_path / "learn.cfg").write_text(
        "delta = 0.5\nkernel = exponential 0.6\nmu_bar = 0.1\n"
        "eta0 = 2\nrho0 = 0.3\nl1_penalty = 0.001\nsnapshot_every = 100\n"
    )
    (tmp_path / "batch.cfg").write_text(
        "delta = 0.5\nkernel = exponential 0.6\nmu_bar = 0.1\ngamma = 0.001\nmax_outer = 30\n"
    )
    rc = main(["simulate", "--config", str(tmp_path / "sim.cfg"), "--seed", "5", "--out", str(tmp_path / "events.csv")])
    assert rc == 0
    return tmp_path


def test_cli_simulate_deterministic(workspace):
    out2 = workspace / "events2.csv"
    rc = main(["simulate", "--config", str(workspace / "sim.cfg"), "--seed", "5", "--out", str(out2)])
    assert rc == 0
    assert (workspace / "events.csv").read_bytes() == out2.read_bytes()


def test_cli_track_learn_batch_round_trip(workspace):
    rc = main([
        "track", "--config", str(workspace / "track.cfg"), "--events", str(workspace / "events.csv"),
        "--out", str(workspace / "trackout"), "--emit-forecasts",
    ])
    assert rc == 0
    trace = read_loss_trace(workspace / "trackout" / "loss.csv")
    forecasts = read_loss_trace(workspace / "trackout" / "forecasts.csv")
    # the CSV format carries no horizon; bins run to the last event
    assert trace["t"].size > 500
    assert forecasts["t"].size == trace["t"].size + 1  # one-step-ahead after the last bin

    rc = main([
        "learn", "--config", str(workspace / "learn.cfg"), "--events", str(workspace / "events.csv"),
        "--out", str(workspace / "learnout"),
    ])
    assert rc == 0
    W_hat = read_matrix_csv(workspace / "learnout" / "W.csv")
    assert W_hat.shape == (2, 2)
    assert (workspace / "learnout" / "snapshots" / "W_00000100.csv").exists()

    rc = main([
        "batch", "--config", str(workspace / "batch.cfg"), "--events", str(workspace / "events.csv"),
        "--out", str(workspace / "W_batch.csv"), "--trace", str(workspace / "obj.csv"),
    ])
    assert rc == 0
    obj = read_loss_trace(workspace / "obj.csv")
    assert np.all(np.diff(obj["objective"]) <= 1e-10)


def test_cli_forecast_no_data_gives_baseline(workspace, capsys):
    (workspace / "empty.csv").write_text("time,actor\n")
    rc = main([
        "forecast", "--config", str(workspace / "track.cfg"), "--events", str(workspace / "empty.csv"),
        "--out", str(workspace / "fc.csv"),
    ])
    assert rc == 0
    vals = np.array([float(v) for v in (workspace / "fc.csv").read_text().split(",")])
    assert np.allclose(vals, 0.1)


def test_cli_forecast_matches_tracker_tail(workspace):
    rc = main([
        "track", "--config", str(workspace / "track.cfg"), "--events", str(workspace / "events.csv"),
        "--out", str(workspace / "trackout"), "--emit-forecasts",
    ])
    assert rc == 0
    rc = main([
        "forecast", "--config", str(workspace / "track.cfg"), "--events", str(workspace / "events.csv"),
        "--out", str(workspace / "fc2.csv"),
    ])
    assert rc == 0
    vals = np.array([float(v) for v in (workspace / "fc2.csv").read_text().split(",")])
    forecasts = read_loss_trace(workspace / "trackout" / "forecasts.csv")
    assert vals[0] == pytest.approx(forecasts["lambda_0"][-1])
    assert vals[1] == pytest.approx(forecasts["lambda_1"][-1])


def test_cli_exit_codes(workspace, capsys):
    bad_cfg = workspace / "bad.cfg"
    bad_cfg.write_text("delta = 0.5\nkernel = exponential 0.6\nmu_bar = 0.1\nunknown_key = 1\n")
    assert main(["track", "--config", str(bad_cfg), "--events", str(workspace / "events.csv"), "--out", str(workspace / "x")]) == 2

    bad_events = workspace / "bad_events.csv"
    bad_events.write_text("time,actor\n-3.0,0\n")
    assert main(["track", "--config", str(workspace / "track.cfg"), "--events", str(bad_events), "--out", str(workspace / "x")]) == 3

    # missing w_file for track is a configuration error
    no_w = workspace / "now.cfg"
    no_w.write_text("delta = 0.5\nkernel = exponential 0.6\nmu_bar = 0.1\n")
    assert main(["track", "--config", str(no_w), "--events", str(workspace / "events.csv"), "--out", str(workspace / "x")]) == 2


def test_cli_jsonl_ingest(workspace):
    lines = "".join('{"t": %.1f, "k": %d}\n' % (0.4 + 1.7 * i, i % 2) for i in range(20))
    (workspace / "ev.jsonl").write_text(lines)
    rc = main([
        "track", "--config", str(workspace / "track.cfg"), "--events", str(workspace / "ev.jsonl"),
        "--out", str(workspace / "jout"),
    ])
    assert rc == 0


def test_forecast_beats_constant_rate_paired(tmp_path):
    # one-step-ahead tracking NLL < constant empirical-mean-rate NLL, per seed
    from hawkestrack.events import discretize
    from hawkestrack.kernels import ExponentialKernel
    from hawkestrack.loss import instantaneous_loss
    from hawkestrack.simulate import GeneratorConfig, simulate_hawkes
    from hawkestrack.tracker import run_tracking

    wins = 0
    for seed in range(6):
        rng = np.random.default_rng(seed)
        W = rng.uniform(0.1, 0.4, (2, 2))
        mu = np.full(2, 0.1)
        kern = ExponentialKernel(0.5)
        stream = simulate_hawkes(GeneratorConfig(p=2, T=600.0, mu_bar=mu, W=W, kernel=kern, seed=seed))
        binned = discretize(stream, 0.5)
        tracked = run_tracking(binned, kern, W, mu, eta0=2.0)
        const_rate = np.full(2, stream.n_events / (2 * stream.horizon))
        const_nll = sum(
            instantaneous_loss(const_rate, binned.counts_at(t), binned.delta)
            for t in range(1, binned.n_bins + 1)
        )
        wins += tracked.cumulative_loss < const_nll
    assert wins >= 5


def test_replicate_and_eval_cli(tmp_path):
    runs = tmp_path / "runs"
    rc = main(["replicate", "mismatch_exp", "--trials", "2", "--out", str(runs), "--scale", "0.01"])
    assert rc == 0
    manifest = json.loads((runs / "manifest.json").read_text())
    assert manifest["completed_trials"] == 2
    assert not manifest["failed_trials"]
    for trial in ("trial_000", "trial_001"):
        d = runs / trial
        assert (d / "events.csv").exists()
        assert (d / "direct_loss.csv").exists()
        assert (d / "tracked_loss.csv").exists()
        assert (d / "oracle_loss.csv").exists()
        assert (d / "W_true.csv").exists()
    assert (runs / "aggregate" / "regret.csv").exists()
    assert (runs / "aggregate" / "percentiles.csv").exists()

    out = tmp_path / "eval"
    rc = main(["eval", "--runs", str(runs), "--out", str(out)])
    assert rc == 0
    assert (out / "regret.csv").exists()
    assert (out / "percentiles.csv").exists()


def test_replicate_deterministic_manifest(tmp_path):
    r1, r2 = tmp_path / "r1", tmp_path / "r2"
    for r in (r1, r2):
        assert main(["replicate", "mismatch_exp", "--trials", "1", "--out", str(r), "--scale", "0.01"]) == 0
    m1 = (r1 / "manifest.json").read_bytes()
    m2 = (r2 / "manifest.json").read_bytes()
    assert m1 == m2
    assert (r1 / "trial_000" / "events.csv").read_bytes() == (r2 / "trial_000" / "events.csv").read_bytes()
    assert (r1 / "aggregate" / "regret.csv").read_bytes() == (r2 / "aggregate" / "regret.csv").read_bytes()


def test_simulate_block_network_cli(tmp_path):
    (tmp_path / "simb.cfg").write_text(
        "T = 50\np = 10\nmu_bar = 0.05\nkernel = exponential 0.2\nnetwork = block\nblock_size = 2\n"
    )
    rc = main([
        "simulate", "--config", str(tmp_path / "simb.cfg"), "--seed", "1",
        "--out", str(tmp_path / "ev.csv"), "--w-out", str(tmp_path / "Wb.csv"),
    ])
    assert rc == 0
    Wb = read_matrix_csv(tmp_path / "Wb.csv")
    assert Wb.shape == (10, 10)
    assert np.linalg.svd(Wb, compute_uv=False)[0] == pytest.approx(0.8, abs=1e-9)
