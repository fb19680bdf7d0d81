"""Scenario files: INI-style sections of ``key = value`` lines, ``#`` comments.

Rates are written in Mbps, file sizes in Mbit and transmit powers in dBm;
they are converted to bits/second, bits and watts here and nowhere else.

Example::

    [scenario]
    kind = delay            # delay | gain | energy | throughput | outage | scaling | cluster_size
    schemes = cpf, gca, rc  # or custom:<path to a K x m 0/1 text matrix>
    sweep = beta
    grid = 0:1.5:0.25       # start:stop:step (inclusive) or a comma list
    series = n_cache: 16, 20

    [params]
    n = 25
    K = 5
    ...

    [sim]
    enabled = true
    num_requests = 100000
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..core import ParameterError, SystemParams
from ..placement import Objective
from ..queuesim import SimConfig
from ..rates import ServiceModel

__all__ = [
    "ConfigError",
    "Scenario",
    "KINDS",
    "SWEEPS",
    "dbm_to_watts",
    "parse_grid",
    "params_from_mapping",
    "BASELINE_VALUES",
    "baseline_params",
    "load_scenario",
    "parse_scenario",
]

MBPS = 1e6
MBIT = 1e6

# sweep variables accepted by each kind
KINDS: dict[str, tuple[str, ...]] = {
    "delay": ("beta", "lambda", "n_cache"),
    "gain": ("n_cache", "beta"),
    "energy": ("n_cache",),
    "throughput": ("beta", "n_cache", "lambda"),
    "outage": ("y",),
    "scaling": ("m",),
    "cluster_size": ("y",),
}
SWEEPS = ("beta", "n_cache", "lambda", "y", "m")
SCHEMES = ("cpf", "gca", "rc")

# scenario key -> (SystemParams field, unit factor)
_PARAM_KEYS = {
    "n": ("n", None),
    "K": ("K", None),
    "m": ("m", None),
    "m0": ("m0", None),
    "M": ("M", None),
    "beta": ("beta", 1.0),
    "n_cache": ("N", None),
    "y": ("y", None),
    "lambda": ("lambda_per_cluster", 1.0),
    "mean_file_size_mbit": ("mean_file_size", MBIT),
    "r_d2d_mbps": ("r_d2d", MBPS),
    "r_cell_mbps": ("r_cell", MBPS),
    "r_cell_avg_mbps": ("r_cell_avg", MBPS),
    "r_bh_avg_mbps": ("r_bh_avg", MBPS),
    "p_lc_dbm": ("p_lc", "dbm"),
    "p_rc_dbm": ("p_rc", "dbm"),
    "k1": ("k1_rate_ratio", 1.0),
    "rho_scale": ("rho_scale", 1.0),
}
_REQUIRED = ("n", "K", "m", "m0", "M", "beta", "lambda", "mean_file_size_mbit",
             "r_d2d_mbps", "r_cell_mbps", "r_bh_avg_mbps")
_SCENARIO_KEYS = {"name", "kind", "schemes", "sweep", "grid", "series", "output", "seed",
                  "rc_replications", "service_model", "objective", "gca_fallback",
                  "c_rate_mbps", "workers"}
_SIM_KEYS = {"enabled", "num_requests", "warmup_fraction", "batch_count", "discipline"}


# evaluation defaults in boundary units; scheme comparisons use slower D2D/cellular links and a faster backhaul
BASELINE_VALUES = {
    "n": 25, "K": 5, "m": 108, "m0": 60, "M": 4, "n_cache": 20, "beta": 0.5, "lambda": 0.5,
    "mean_file_size_mbit": 4, "r_d2d_mbps": 120, "r_cell_mbps": 50, "r_bh_avg_mbps": 5,
    "p_lc_dbm": 20, "p_rc_dbm": 23,
}
COMPARISON_RATES = {"r_d2d_mbps": 50, "r_cell_mbps": 15, "r_bh_avg_mbps": 10}


class ConfigError(ValueError):
    """Malformed scenario file; the message names the file, line and key."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def parse_grid(text: str) -> tuple[float, ...]:
    """``"a, b, c"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"range grid must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ValueError(f"empty range {text!r}")
        return tuple(float(np.round(start + i * step, 12)) for i in range(count))
    values = tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip())
    if not values:
        raise ValueError("empty grid")
    return values


def _number(key: str, raw):
    field_name, unit = _PARAM_KEYS[key]
    if unit is None:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{key} must be an integer, got {raw}")
        return field_name, int(value)
    if unit == "dbm":
        return field_name, dbm_to_watts(float(raw))
    return field_name, float(raw) * unit


def params_from_mapping(values: Mapping[str, object]) -> SystemParams:
    """Build :class:`SystemParams` from boundary units (Mbps, Mbit, dBm).

    ``lambda`` may be a single rate or a comma list with one rate per cluster.
    """
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    kwargs = {}
    for key, raw in values.items():
        if key not in _PARAM_KEYS:
            raise ConfigError(f"unknown parameter {key!r}")
        if key == "lambda" and isinstance(raw, str) and "," in raw:
            kwargs["lambda_per_cluster"] = tuple(float(v) for v in raw.split(","))
            continue
        try:
            name, value = _number(key, raw)
        except ValueError as exc:
            raise ConfigError(f"parameter {key!r}: {exc}") from None
        kwargs[name] = value
    try:
        return SystemParams(**kwargs)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def baseline_params(comparison_rates: bool = False, **overrides) -> SystemParams:
    """Default evaluation parameters; ``overrides`` use the scenario keys (Mbps, Mbit, dBm)."""
    values = dict(BASELINE_VALUES)
    if comparison_rates:
        values.update(COMPARISON_RATES)
    values.update(overrides)
    return params_from_mapping(values)


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    params: SystemParams
    param_values: dict
    schemes: tuple[str, ...]
    sweep: str
    grid: tuple[float, ...]
    series_key: Optional[str] = None
    series: tuple[float, ...] = ()
    sim: Optional[SimConfig] = None
    discipline: str = "fifo"
    output: Optional[str] = None
    rc_replications: int = 50
    seed: int = 0
    service_model: ServiceModel = ServiceModel.FIXED_AVERAGE
    objective: Objective = Objective.MPSQ_DELAY
    gca_fallback: Optional[Objective] = None
    c_rate: Optional[float] = None
    workers: int = 1
    source: Optional[str] = None
    custom_placements: dict = field(default_factory=dict)

    def params_at(self, value: float, series_value: Optional[float] = None) -> SystemParams:
        """Parameters at one sweep point (and series value)."""
        values = dict(self.param_values)
        for key, v in ((self.sweep, value), (self.series_key, series_value)):
            if key is None or v is None:
                continue
            values[key] = v
            if key == "y":
                # regroup n users into clusters of y; cache follows y unless fixed
                values["K"] = max(int(values["n"]) // int(v), 1)
        return params_from_mapping(values)


def _line_of(path_text: str, section: str, key: Optional[str]) -> str:
    lines = path_text.splitlines()
    in_section = False
    for i, line in enumerate(lines, start=1):
        s = line.split("#", 1)[0].strip()
        if s.startswith("["):
            in_section = s.strip("[]").strip() == section
            if in_section and key is None:
                return f"line {i}"
            continue
        if in_section and key is not None and s.split("=", 1)[0].strip() == key:
            return f"line {i}"
    return "line ?"


def _blamed_key(msg: str, keys) -> Optional[str]:
    """Scenario key whose name (or field name) appears first in ``msg``."""
    best, pos = None, len(msg) + 1
    for key in keys:
        names = {key, _PARAM_KEYS[key][0]} if key in _PARAM_KEYS else {key}
        for name in names:
            hit = re.search(rf"(?<![\w.]){re.escape(name)}(?!\w)", msg)
            if hit and hit.start() < pos:
                best, pos = key, hit.start()
    return best


def _enum(cls, raw: str, what: str):
    try:
        return cls(raw.strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown {what} {raw!r} (choose from {choices})") from None


def _load_matrix(path: Path, shape) -> np.ndarray:
    c = np.loadtxt(path, dtype=float, ndmin=2)
    if c.shape != shape or not np.isin(c, (0.0, 1.0)).all():
        raise ValueError(f"{path} must hold a {shape[0]}x{shape[1]} 0/1 matrix")
    return c.astype(np.int8)


def parse_scenario(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> Scenario:
    """Parse scenario text. Errors are raised as :class:`ConfigError` with a line and key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    def fail(section, key, msg):
        where = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{source}:{_line_of(text, section, key)}: {where}: {msg}")

    for sec in ("scenario", "params"):
        if not cp.has_section(sec):
            raise ConfigError(f"{source}: missing [{sec}] section")
    for sec in cp.sections():
        if sec not in ("scenario", "params", "sim"):
            fail(sec, None, "unknown section")
    sc = cp["scenario"]
    for key in sc:
        if key not in _SCENARIO_KEYS:
            fail("scenario", key, "unknown key")
    if cp.has_section("sim"):
        for key in cp["sim"]:
            if key not in _SIM_KEYS:
                fail("sim", key, "unknown key")

    param_values = dict(cp["params"])
    for key in param_values:
        if key not in _PARAM_KEYS:
            fail("params", key, "unknown parameter")
    try:
        params = params_from_mapping(param_values)
    except ConfigError as exc:
        fail("params", _blamed_key(str(exc), param_values), str(exc))

    kind = sc.get("kind", "").strip()
    if kind not in KINDS:
        fail("scenario", "kind", f"expected one of {', '.join(KINDS)}, got {kind!r}")
    sweep = sc.get("sweep", "").strip()
    if sweep not in KINDS[kind]:
        fail("scenario", "sweep", f"kind {kind!r} sweeps one of {', '.join(KINDS[kind])}, got {sweep!r}")
    try:
        grid = parse_grid(sc.get("grid", ""))
    except ValueError as exc:
        fail("scenario", "grid", str(exc))
    if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
        fail("scenario", "grid", "grid must be strictly increasing")

    series_key, series = None, ()
    if "series" in sc:
        head, _, rest = sc["series"].partition(":")
        series_key = head.strip()
        if series_key not in SWEEPS or series_key == sweep:
            fail("scenario", "series", f"series variable must be a sweep variable other than {sweep!r}")
        try:
            series = parse_grid(rest)
        except ValueError as exc:
            fail("scenario", "series", str(exc))

    schemes, custom = [], {}
    for item in (s.strip() for s in sc.get("schemes", "cpf").split(",")):
        if not item:
            continue
        if item.startswith("custom:"):
            path = Path(item[len("custom:"):].strip())
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                custom[item] = _load_matrix(path, (params.K, params.m))
            except (OSError, ValueError) as exc:
                fail("scenario", "schemes", str(exc))
        elif item not in SCHEMES:
            fail("scenario", "schemes", f"unknown scheme {item!r}")
        schemes.append(item)

    def get_int(section, key, default):
        try:
            return cp[section].getint(key, default)
        except ValueError as exc:
            fail(section, key, str(exc))

    try:
        model = _enum(ServiceModel, sc.get("service_model", "fixed-average"), "service model")
    except ValueError as exc:
        fail("scenario", "service_model", str(exc))
    try:
        objective = _enum(Objective, sc.get("objective", Objective.MPSQ_DELAY.value), "objective")
    except ValueError as exc:
        fail("scenario", "objective", str(exc))
    fallback = None
    if "gca_fallback" in sc:
        try:
            fallback = _enum(Objective, sc["gca_fallback"], "objective")
        except ValueError as exc:
            fail("scenario", "gca_fallback", str(exc))
    c_rate = None
    if "c_rate_mbps" in sc:
        try:
            c_rate = float(sc["c_rate_mbps"]) * MBPS
        except ValueError as exc:
            fail("scenario", "c_rate_mbps", str(exc))

    seed = get_int("scenario", "seed", 0)
    sim, discipline = None, "fifo"
    if cp.has_section("sim"):
        s = cp["sim"]
        try:
            enabled = s.getboolean("enabled", True)
        except ValueError as exc:
            fail("sim", "enabled", str(exc))
        discipline = s.get("discipline", "fifo").strip()
        if discipline not in ("fifo", "ps"):
            fail("sim", "discipline", f"expected fifo or ps, got {discipline!r}")
        if enabled:
            try:
                sim = SimConfig(num_requests=get_int("sim", "num_requests", 100_000),
                                warmup_fraction=s.getfloat("warmup_fraction", 0.1),
                                seed=seed, batch_count=get_int("sim", "batch_count", 20))
            except ValueError as exc:
                fail("sim", None, str(exc))

    reps = get_int("scenario", "rc_replications", 50)
    if reps < 1:
        fail("scenario", "rc_replications", "must be >= 1")
    workers = get_int("scenario", "workers", 1)
    if workers < 1:
        fail("scenario", "workers", "must be >= 1")
    return Scenario(name=sc.get("name", Path(source).stem).strip(), kind=kind, params=params,
                    param_values=param_values, schemes=tuple(schemes), sweep=sweep, grid=grid,
                    series_key=series_key, series=series, sim=sim, discipline=discipline,
                    output=sc.get("output"), rc_replications=reps, seed=seed,
                    service_model=model, objective=objective, gca_fallback=fallback,
                    c_rate=c_rate, workers=workers, source=source, custom_placements=custom)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return parse_scenario(text, source=str(path), base_dir=path.parent)
