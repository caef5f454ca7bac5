"""Flat ``key = value`` configuration files with strict typed schemas.

Unknown keys are rejected; '#' starts a comment.  File-valued keys are
resolved relative to the config file's directory.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .evaluation import read_matrix_csv

REQUIRED = object()


def _to_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in {"1", "true", "yes", "on"}:
        return True
    if v in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {s!r}")


_CASTS = {float: float, int: int, str: lambda s: s.strip(), bool: _to_bool}

TRACK_SCHEMA = {
    "delta": (float, REQUIRED),
    "kernel": (str, REQUIRED),
    "mu_bar": (str, REQUIRED),
    "w_file": (str, None),
    "eta0": (float, 10.0),
    "schedule": (str, "constant"),
    "lambda_min": (float, 1e-8),
    "lambda_max": (float, 1e6),
    "x_max": (float, None),
    "ma_window": (float, None),
}

LEARN_SCHEMA = {
    **TRACK_SCHEMA,
    "rho0": (float, 0.01),
    "feasible_set": (str, "box"),
    "l1_penalty": (float, 0.0),
    "learn_mu": (bool, False),
    "snapshot_every": (int, 0),
    "w0_file": (str, None),
}

SIMULATE_SCHEMA = {
    "p": (int, None),
    "T": (float, REQUIRED),
    "mu_bar": (str, REQUIRED),
    "kernel": (str, REQUIRED),
    "w_file": (str, None),
    "network": (str, "file"),
    "block_size": (int, 20),
    "offblock_prob": (float, 0.2),
    "offblock_max": (float, 0.3),
    "target_sv": (float, 0.8),
    "x_max_guard": (float, None),
    "max_events": (int, None),
}

BATCH_SCHEMA = {
    "delta": (float, REQUIRED),
    "kernel": (str, REQUIRED),
    "mu_bar": (str, REQUIRED),
    "gamma": (float, 1e-3),
    "max_outer": (int, 60),
    "tol": (float, 1e-7),
}


def parse_config_text(text: str, schema: dict, base_dir: Path | None = None) -> dict:
    values: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in schema:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        seen.add(key)
        typ, _default = schema[key]
        try:
            values[key] = _CASTS[typ](val)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key!r}: {exc}") from None
    for key, (typ, default) in schema.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"missing required config key {key!r}")
            values[key] = default
    values["_base_dir"] = base_dir or Path(".")
    return values


def parse_config(path, schema: dict) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, schema, base_dir=path.parent)


def resolve_path(cfg: dict, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else cfg["_base_dir"] / p


def load_mu_bar(cfg: dict, p: int) -> np.ndarray:
    """mu_bar is either a scalar (broadcast to p) or a CSV path of p values."""
    raw = cfg["mu_bar"]
    try:
        return np.full(p, float(raw))
    except ValueError:
        pass
    arr = read_matrix_csv(resolve_path(cfg, raw)).ravel()
    if arr.shape != (p,):
        raise ConfigError(f"mu_bar file has {arr.size} values, expected {p}")
    return arr


def load_matrix(cfg: dict, key: str) -> np.ndarray | None:
    raw = cfg.get(key)
    if raw is None:
        return None
    try:
        return read_matrix_csv(resolve_path(cfg, raw))
    except OSError as exc:
        raise ConfigError(f"cannot read {key} file {raw!r}: {exc}") from None
