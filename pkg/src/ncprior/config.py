"""Flat key-value run configuration: parsing, validation, serialization.

Format: one `dotted.key = value` per line; '#' starts a comment (full-line
or trailing); blank lines ignored. Unknown keys are rejected. A duplicated
key keeps its last occurrence and emits a ConfigWarning. config_to_text
serializes a RunConfig back to this format with every key explicit, and
parse_config(config_to_text(rc)) reproduces rc exactly — that round trip
is what makes run manifests replayable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

from .acquisition import AcquisitionConfig
from .data import DEFAULT_BANDS
from .harness import ExperimentConfig, Schedule
from .models import MODEL_KINDS
from .priors import KL_DIRECTIONS, MEAN_RULES, NOISE_KINDS, NcpConfig


class ConfigError(Exception):
    """A config line, key, value, or combination is invalid."""


class ConfigWarning(UserWarning):
    """Non-fatal config irregularity (e.g. duplicate key)."""


@dataclass(frozen=True)
class DataConfig:
    """Where the dataset comes from and how it is split."""

    source: str = "toy"
    csv_path: str | None = None
    target: str = "y"
    categorical: tuple[str, ...] = ()
    test_fraction: float = 0.2
    toy_n_per_band: int = 50
    toy_bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS
    toy_test_interval: tuple[float, float] = (-2.4, 2.4)
    toy_test_points: int = 200
    toy_exclude_bands_from_test: bool = False

    def __post_init__(self) -> None:
        if self.source not in ("toy", "csv"):
            raise ValueError(f"data.source must be 'toy' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.csv_path:
            raise ValueError("data.source = csv requires data.csv_path")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in [0, 1)")
        if self.toy_n_per_band < 1 or self.toy_test_points < 1:
            raise ValueError("toy counts must be >= 1")


@dataclass(frozen=True)
class SweepConfig:
    """Grid and seed list for robustness sweeps."""

    noise_kinds: tuple[str, ...] = ("gaussian", "uniform")
    sigma_x_sq_grid: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 11))
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.noise_kinds or not self.sigma_x_sq_grid or not self.seeds:
            raise ValueError("sweep grid and seeds must be nonempty")
        for kind in self.noise_kinds:
            if kind not in NOISE_KINDS:
                raise ValueError(f"unknown sweep noise kind {kind!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    """The full parsed configuration of one CLI invocation."""

    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    data: DataConfig = field(default_factory=DataConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


# ---------------------------------------------------------------- codecs

@dataclass(frozen=True)
class _Codec:
    parse: Callable[[str], object]
    fmt: Callable[[object], str]


def _parse_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}") from None


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}") from None


def _parse_bool(s: str) -> bool:
    if s in ("true", "false"):
        return s == "true"
    raise ConfigError(f"expected true or false, got {s!r}")


def _choice(options) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ConfigError(f"got {s!r}, valid values: {', '.join(options)}")
        return s
    return parse


def _split_list(s: str) -> list[str]:
    return [part.strip() for part in s.split(",") if part.strip()]


def _parse_interval(s: str) -> tuple[float, float]:
    parts = s.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {s!r}")
    return (_parse_float(parts[0]), _parse_float(parts[1]))


_INT = _Codec(_parse_int, str)
_FLOAT = _Codec(_parse_float, lambda v: repr(float(v)))
_BOOL = _Codec(_parse_bool, lambda v: "true" if v else "false")
_STR = _Codec(lambda s: s, str)
_OPT_FLOAT = _Codec(lambda s: None if s == "none" else _parse_float(s),
                    lambda v: "none" if v is None else repr(float(v)))
_OPT_STR = _Codec(lambda s: None if s == "none" else s,
                  lambda v: "none" if v is None else str(v))
_INT_LIST = _Codec(lambda s: tuple(_parse_int(p) for p in _split_list(s)),
                   lambda v: ",".join(str(x) for x in v))
_FLOAT_LIST = _Codec(lambda s: tuple(_parse_float(p) for p in _split_list(s)),
                     lambda v: ",".join(repr(float(x)) for x in v))
_STR_LIST = _Codec(lambda s: tuple(_split_list(s)),
                   lambda v: ",".join(v))
_INTERVAL = _Codec(_parse_interval, lambda v: f"{v[0]!r}:{v[1]!r}")
_INTERVALS = _Codec(lambda s: tuple(_parse_interval(p) for p in _split_list(s)),
                    lambda v: ",".join(f"{lo!r}:{hi!r}" for lo, hi in v))


def _choice_codec(options) -> _Codec:
    return _Codec(_choice(options), str)


# Key -> (section, dataclass field, codec). Section nesting is resolved in
# _assemble; registry order is the canonical serialization order.
_REGISTRY: dict[str, tuple[str, str, _Codec]] = {
    "model.kind": ("exp", "model_kind", _choice_codec(MODEL_KINDS)),
    "model.hidden": ("exp", "hidden", _INT_LIST),
    "model.prior_var": ("exp", "weight_prior_var", _FLOAT),
    "train.lr": ("exp", "learning_rate", _FLOAT),
    "train.batch_size": ("exp", "batch_size", _INT),
    "train.initial_visible": ("sched", "initial_visible", _INT),
    "train.labels_per_round": ("sched", "labels_per_round", _INT),
    "train.epochs_per_round": ("sched", "epochs_per_round", _INT),
    "train.rounds": ("sched", "rounds", _INT),
    "train.eval_every_epochs": ("exp", "eval_every_epochs", _INT),
    "ncp.noise_kind": ("ncp", "noise_kind", _choice_codec(NOISE_KINDS)),
    "ncp.sigma_x_sq": ("ncp", "sigma_x_sq", _FLOAT),
    "ncp.sigma_mu_sq": ("ncp", "sigma_mu_sq", _FLOAT),
    "ncp.sigma_y_sq": ("ncp", "sigma_y_sq", _FLOAT),
    "ncp.mean_rule": ("ncp", "mean_rule", _choice_codec(MEAN_RULES)),
    "ncp.mu_y_const": ("ncp", "mu_y_const", _FLOAT),
    "ncp.gamma": ("ncp", "gamma", _FLOAT),
    "ncp.kl_direction": ("ncp", "kl_direction", _choice_codec(KL_DIRECTIONS)),
    "ncp.flip_prob": ("ncp", "flip_prob", _FLOAT),
    "acquire.tau": ("acq", "tau", _FLOAT),
    "run.seed": ("exp", "seed", _INT),
    "run.deterministic_timing": ("exp", "deterministic_timing", _BOOL),
    "run.round_seconds_limit": ("exp", "round_seconds_limit", _OPT_FLOAT),
    "run.jobs": ("sweep", "jobs", _INT),
    "data.source": ("data", "source", _choice_codec(("toy", "csv"))),
    "data.csv_path": ("data", "csv_path", _OPT_STR),
    "data.target": ("data", "target", _STR),
    "data.categorical": ("data", "categorical", _STR_LIST),
    "data.test_fraction": ("data", "test_fraction", _FLOAT),
    "data.toy_n_per_band": ("data", "toy_n_per_band", _INT),
    "data.toy_bands": ("data", "toy_bands", _INTERVALS),
    "data.toy_test_interval": ("data", "toy_test_interval", _INTERVAL),
    "data.toy_test_points": ("data", "toy_test_points", _INT),
    "data.toy_exclude_bands_from_test": ("data", "toy_exclude_bands_from_test", _BOOL),
    "sweep.noise_kinds": ("sweep", "noise_kinds", _STR_LIST),
    "sweep.sigma_x_sq_grid": ("sweep", "sigma_x_sq_grid", _FLOAT_LIST),
    "sweep.seeds": ("sweep", "seeds", _INT_LIST),
}


def _read_lines(text: str, raw: dict[str, tuple[str, object]], where) -> None:
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where(i)}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _REGISTRY:
            raise ConfigError(f"{where(i)}: unknown key {key!r}")
        if key in raw:
            warnings.warn(f"duplicate key {key!r} ({where(i)}): last occurrence wins",
                          ConfigWarning, stacklevel=3)
        raw[key] = (value, where(i))


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse config text, then apply `key=value` override strings on top."""
    raw: dict[str, tuple[str, object]] = {}
    _read_lines(text, raw, lambda i: f"line {i}")
    for n, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ConfigError(f"override {n}: expected key=value, got {item!r}")
        key, _, value = item.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _REGISTRY:
            raise ConfigError(f"override {n}: unknown key {key!r}")
        raw[key] = (value, f"override {n}")
    return _assemble(raw)


def _assemble(raw: dict[str, tuple[str, object]]) -> RunConfig:
    sections: dict[str, dict] = {"exp": {}, "sched": {}, "ncp": {}, "acq": {},
                                 "data": {}, "sweep": {}}
    for key, (section, field_name, codec) in _REGISTRY.items():
        if key not in raw:
            continue
        value, where = raw[key]
        try:
            sections[section][field_name] = codec.parse(value)
        except ConfigError as err:
            raise ConfigError(f"{where}: key {key!r}: {err}") from None
    try:
        experiment = ExperimentConfig(
            schedule=Schedule(**sections["sched"]),
            ncp=NcpConfig(**sections["ncp"]),
            acquisition=AcquisitionConfig(**sections["acq"]),
            **sections["exp"])
        return RunConfig(experiment=experiment,
                         data=DataConfig(**sections["data"]),
                         sweep=SweepConfig(**sections["sweep"]))
    except ValueError as err:
        raise ConfigError(str(err)) from None


def config_to_text(rc: RunConfig) -> str:
    """Canonical full serialization; parse_config inverts it exactly."""
    objs = {"exp": rc.experiment, "sched": rc.experiment.schedule,
            "ncp": rc.experiment.ncp, "acq": rc.experiment.acquisition,
            "data": rc.data, "sweep": rc.sweep}
    lines = [f"{key} = {codec.fmt(getattr(objs[section], field_name))}"
             for key, (section, field_name, codec) in _REGISTRY.items()]
    return "\n".join(lines) + "\n"
