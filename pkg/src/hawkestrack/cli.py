"""Command-line orchestration.

Subcommands: simulate, track, learn, batch, eval, replicate, forecast.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .batch import BatchProblem, batch_fit
from .config import (
    BATCH_SCHEMA,
    LEARN_SCHEMA,
    SIMULATE_SCHEMA,
    TRACK_SCHEMA,
    load_matrix,
    load_mu_bar,
    parse_config,
    resolve_path,
)
from .errors import ConfigError, DataError, NumericalError
from .evaluation import (
    paired_percentiles,
    read_loss_trace,
    read_matrix_csv,
    regret_curve,
    roc,
    write_columns_csv,
    write_loss_trace,
    write_matrix_csv,
)
from .events import discretize, ingest, write_csv
from .kernels import kernel_from_string
from .loss import moving_average_loss
from .netlearn import run_learning, run_ogd_learning
from .profiles import PROFILES, replicate
from .projections import feasible_from_string
from .simulate import BlockNetworkSpec, GeneratorConfig, generate_block_network, simulate_hawkes
from .tracker import run_tracking


def _ingest_events(path: str, fmt: str | None, p: int | None):
    fmt = fmt or ("jsonl" if str(path).endswith(".jsonl") else "csv")
    return ingest(path, fmt=fmt, p=p)


def _kernel_for(cfg: dict):
    return kernel_from_string(
        cfg["kernel"], grid_loader=lambda f: np.loadtxt(resolve_path(cfg, f), delimiter=",", ndmin=2)
    )


def _maybe_ma(cfg, losses):
    # loss traces always carry the moving-average column; window defaults to
    # 100 bins when the config does not pin one
    window = cfg.get("ma_window") or 100 * cfg["delta"]
    return moving_average_loss(losses, window, cfg["delta"])


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config, SIMULATE_SCHEMA)
    kernel = _kernel_for(cfg)
    if cfg["network"] == "block":
        if cfg["p"] is None:
            raise ConfigError("block network needs p")
        W, _mask = generate_block_network(
            BlockNetworkSpec(
                p=cfg["p"],
                block_size=cfg["block_size"],
                offblock_prob=cfg["offblock_prob"],
                offblock_max=cfg["offblock_max"],
                target_sv=cfg["target_sv"],
            ),
            seed=args.seed + 50_000,
        )
    elif cfg["network"] == "file":
        W = load_matrix(cfg, "w_file")
        if W is None:
            raise ConfigError("simulate needs w_file (or network = block)")
    else:
        raise ConfigError(f"unknown network mode {cfg['network']!r}")
    p = W.shape[0]
    if cfg["p"] is not None and cfg["p"] != p:
        raise ConfigError(f"p={cfg['p']} does not match W ({p} x {p})")
    mu = load_mu_bar(cfg, p)
    stream = simulate_hawkes(
        GeneratorConfig(
            p=p,
            T=cfg["T"],
            mu_bar=mu,
            W=W,
            kernel=kernel,
            seed=args.seed,
            x_max_guard=cfg["x_max_guard"],
            max_events=cfg["max_events"],
        )
    )
    write_csv(stream, args.out)
    if args.w_out:
        write_matrix_csv(args.w_out, W)
    print(f"simulated {stream.n_events} events over T={cfg['T']} (p={p}) -> {args.out}")
    return 0


def _write_forecasts(path, rates, lam_next):
    stacked = np.vstack([rates, lam_next])
    header = ["t"] + [f"lambda_{k}" for k in range(stacked.shape[1])]
    cols = [np.arange(1, stacked.shape[0] + 1)] + [stacked[:, k] for k in range(stacked.shape[1])]
    write_columns_csv(path, header, cols)


def cmd_track(args) -> int:
    cfg = parse_config(args.config, TRACK_SCHEMA)
    W = load_matrix(cfg, "w_file")
    if W is None:
        raise ConfigError("track requires w_file (the network is known here)")
    p = W.shape[0]
    stream = _ingest_events(args.events, args.format, p)
    binned = discretize(stream, cfg["delta"])
    mu = load_mu_bar(cfg, p)
    res = run_tracking(
        binned,
        _kernel_for(cfg),
        W,
        mu,
        eta0=cfg["eta0"],
        schedule=cfg["schedule"],
        lam_min=cfg["lambda_min"],
        lam_max=cfg["lambda_max"],
        record_rates=args.emit_forecasts,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_loss_trace(out / "loss.csv", res.losses, _maybe_ma(cfg, res.losses))
    if args.emit_forecasts:
        _write_forecasts(out / "forecasts.csv", res.rates, res.lam_next)
    print(f"tracked {binned.n_bins} bins; cumulative loss {res.cumulative_loss:.6g}")
    return 0


def cmd_learn(args) -> int:
    cfg = parse_config(args.config, LEARN_SCHEMA)
    W0 = load_matrix(cfg, "w0_file")
    stream = _ingest_events(args.events, args.format, W0.shape[0] if W0 is not None else None)
    binned = discretize(stream, cfg["delta"])
    p = binned.p
    mu = load_mu_bar(cfg, p)
    feasible = feasible_from_string(
        cfg["feasible_set"],
        mask_loader=lambda f: read_matrix_csv(resolve_path(cfg, f)) == 0,
    )
    res = run_learning(
        binned,
        _kernel_for(cfg),
        mu,
        W0=W0,
        eta0=cfg["eta0"],
        rho0=cfg["rho0"],
        schedule=cfg["schedule"],
        feasible=feasible,
        gamma=cfg["l1_penalty"],
        lam_min=cfg["lambda_min"],
        lam_max=cfg["lambda_max"],
        learn_mu=cfg["learn_mu"],
        snapshot_every=cfg["snapshot_every"],
        record_rates=args.emit_forecasts,
        x_max=cfg["x_max"],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_loss_trace(out / "loss.csv", res.losses, _maybe_ma(cfg, res.losses))
    write_matrix_csv(out / "W.csv", res.network)
    if res.mu_learned is not None:
        write_matrix_csv(out / "mu_learned.csv", res.mu_learned.reshape(1, -1))
    if res.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for b, Wb in res.snapshots:
            write_matrix_csv(snap_dir / f"W_{b:08d}.csv", Wb[:, :p])
    if args.emit_forecasts:
        _write_forecasts(out / "forecasts.csv", res.rates, res.lam_next)
    print(
        f"learned over {binned.n_bins} bins; cumulative loss {res.cumulative_loss:.6g}; "
        f"clamp hits {res.clamp_hits}"
    )
    return 0


def cmd_batch(args) -> int:
    cfg = parse_config(args.config, BATCH_SCHEMA)
    stream = _ingest_events(args.events, args.format, None)
    binned = discretize(stream, cfg["delta"])
    mu = load_mu_bar(cfg, binned.p)
    fit = batch_fit(
        BatchProblem(
            binned=binned,
            kernel=_kernel_for(cfg),
            mu_bar=mu,
            gamma=cfg["gamma"],
            max_outer=cfg["max_outer"],
            tol=cfg["tol"],
        )
    )
    write_matrix_csv(args.out, fit.W)
    if args.trace:
        write_columns_csv(
            args.trace,
            ["iteration", "objective"],
            [np.arange(fit.objective_trace.size), fit.objective_trace],
        )
    print(f"batch fit: {fit.n_iter} iterations, objective {fit.objective_trace[-1]:.6g}")
    return 0


def cmd_eval(args) -> int:
    runs = Path(args.runs)
    manifest_path = runs / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest.json under {runs}")
    manifest = json.loads(manifest_path.read_text())
    prof = manifest["profile"]
    trial_dirs = sorted(d for d in runs.iterdir() if d.is_dir() and d.name.startswith("trial_"))
    if not trial_dirs:
        raise DataError(f"no trial_* directories under {runs}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    losses: dict[str, list[np.ndarray]] = {}
    mas: dict[str, list[np.ndarray]] = {}
    estimates: dict[str, list[np.ndarray]] = {}
    truths: list[np.ndarray] = []
    for td in trial_dirs:
        truths.append(read_matrix_csv(td / "W_true.csv"))
        for f in sorted(td.glob("*_loss.csv")):
            method = f.name[: -len("_loss.csv")]
            cols = read_loss_trace(f)
            losses.setdefault(method, []).append(cols["instantaneous"])
            mas.setdefault(method, []).append(cols["moving_avg"])
        for f in sorted(td.glob("*_W.csv")):
            method = f.name[: -len("_W.csv")]
            if method != "W_true":
                estimates.setdefault(method, []).append(read_matrix_csv(f))

    methods = sorted(losses)
    ref = prof.get("reference") if prof.get("reference") in methods else methods[0]
    n_bins = losses[methods[0]][0].size
    tcol = np.arange(1, n_bins + 1)
    names, cols = ["t"], [tcol]
    for m in methods:
        if m == ref:
            continue
        curves = np.stack(
            [regret_curve(lm, lr) for lm, lr in zip(losses[m], losses[ref])]
        )
        names.append(f"{m}_minus_{ref}")
        cols.append(curves.mean(axis=0))
    write_columns_csv(out / "regret.csv", names, cols)

    pair = prof.get("percentile_pair")
    if pair and all(m in mas for m in pair):
        diffs = np.stack([a - b for a, b in zip(mas[pair[0]], mas[pair[1]])])
        pcts = (5, 25, 50, 75, 95)
        bands = paired_percentiles(diffs, pcts)
        write_columns_csv(
            out / "percentiles.csv",
            ["t"] + [f"p{q}" for q in pcts],
            [tcol] + [bands[i] for i in range(len(pcts))],
        )

    if estimates:
        summary = {}
        for mode, fname in (("full", "roc_full.csv"), ("top10", "roc_top10.csv")):
            rows_m, rows_thr, rows_tpr, rows_fpr = [], [], [], []
            for m, ests in sorted(estimates.items()):
                pooled = roc(
                    np.concatenate([e.ravel() for e in ests]),
                    np.concatenate([t.ravel() for t in truths[: len(ests)]]),
                    mode=mode,
                )
                rows_m.append(np.array([m] * pooled.thresholds.size))
                rows_thr.append(pooled.thresholds)
                rows_tpr.append(pooled.tpr)
                rows_fpr.append(pooled.fpr)
                summary.setdefault(mode, {})[m] = pooled.auc
            write_columns_csv(
                out / fname,
                ["method", "threshold", "tpr", "fpr"],
                [
                    np.concatenate(rows_m),
                    np.concatenate(rows_thr),
                    np.concatenate(rows_tpr),
                    np.concatenate(rows_fpr),
                ],
            )
        (out / "metrics.json").write_text(json.dumps({"auc": summary}, indent=2, sort_keys=True) + "\n")
    print(f"evaluated {len(trial_dirs)} trials -> {out}")
    return 0


def cmd_replicate(args) -> int:
    manifest = replicate(
        args.profile,
        trials=args.trials,
        out_dir=args.out,
        scale=args.scale,
        seed_base=args.seed_base,
    )
    failed = len(manifest["failed_trials"])
    print(
        f"replicated {args.profile}: {manifest['completed_trials']} trials ok"
        + (f", {failed} failed (excluded)" if failed else "")
    )
    return 0


def cmd_forecast(args) -> int:
    if args.mode == "track":
        cfg = parse_config(args.config, TRACK_SCHEMA)
        W = load_matrix(cfg, "w_file")
        if W is None:
            raise ConfigError("forecast in track mode requires w_file")
        p = W.shape[0]
        stream = _ingest_events(args.events, args.format, p)
        binned = discretize(stream, cfg["delta"])
        res = run_tracking(
            binned,
            _kernel_for(cfg),
            W,
            load_mu_bar(cfg, p),
            eta0=cfg["eta0"],
            schedule=cfg["schedule"],
            lam_min=cfg["lambda_min"],
            lam_max=cfg["lambda_max"],
        )
    else:
        cfg = parse_config(args.config, LEARN_SCHEMA)
        stream = _ingest_events(args.events, args.format, None)
        binned = discretize(stream, cfg["delta"])
        res = run_learning(
            binned,
            _kernel_for(cfg),
            load_mu_bar(cfg, binned.p),
            eta0=cfg["eta0"],
            rho0=cfg["rho0"],
            schedule=cfg["schedule"],
            feasible=feasible_from_string(cfg["feasible_set"]),
            gamma=cfg["l1_penalty"],
            lam_min=cfg["lambda_min"],
            lam_max=cfg["lambda_max"],
            learn_mu=cfg["learn_mu"],
        )
    line = ",".join(repr(float(v)) for v in res.lam_next)
    if args.out:
        Path(args.out).write_text(line + "\n")
    print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hawkestrack", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate an event stream")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--w-out", dest="w_out")
    sp.set_defaults(func=cmd_simulate)

    for name, fn in (("track", cmd_track), ("learn", cmd_learn)):
        sp = sub.add_parser(name, help=f"{name} an event stream")
        sp.add_argument("--config", required=True)
        sp.add_argument("--events", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--format", choices=["csv", "jsonl"])
        sp.add_argument("--emit-forecasts", action="store_true")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("batch", help="offline proximal-gradient fit of W")
    sp.add_argument("--config", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trace")
    sp.add_argument("--format", choices=["csv", "jsonl"])
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("eval", help="aggregate metrics from a replicate run dir")
    sp.add_argument("--runs", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("replicate", help="run a full experiment profile")
    sp.add_argument("profile", choices=sorted(PROFILES))
    sp.add_argument("--trials", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--seed-base", dest="seed_base", type=int)
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("forecast", help="one-step-ahead intensity after the stream")
    sp.add_argument("--config", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--mode", choices=["track", "learn"], default="track")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["csv", "jsonl"])
    sp.set_defaults(func=cmd_forecast)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
