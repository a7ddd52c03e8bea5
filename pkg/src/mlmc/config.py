"""Experiment configuration: a YAML document with nested sections.

Every key has a default (``print-config`` shows them all) and unknown keys
are rejected with the dotted path of the offending field.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import yaml

from .errors import ConfigError, InvalidParameter, InvalidResolution
from .kernels import KernelSpec, kernel_from_config
from .multilevel import MODES
from .partition import DEFAULT_STATE_CAP, as_fraction, build_partition
from .szegedy import WALK_CAP
from .ulam import DEFAULT_THRESHOLD, QuadratureSpec

DEFAULTS = {
    "kernel": {"family": "gauss-ar1", "params": {"a": 0.5, "sigma": 0.3},
               "boundary": "renormalize-rows", "lambda": "auto"},
    "schedule": {"h_max": "1/2", "h_min": "1/16", "d": 1},
    "mode": "classical-emulation",
    "target_epsilon": 1.0e-6,
    "quadrature": {"rule": "gauss-legendre", "points": 8, "samples": 256, "seed": 0},
    "threshold": DEFAULT_THRESHOLD,
    "caps": {"states": DEFAULT_STATE_CAP, "walk": WALK_CAP},
    "output_dir": "mlmc-out",
    "slack": {"cost": 0.25, "overlap": 0.5, "payoff": 0.75},
    "walk": {"random_chains": 20, "max_states": 16, "steps": 64, "seed": 0},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}", where)
        if isinstance(base[key], dict) and key != "params":
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a mapping", where)
            out[key] = _merge(base[key], val, where + ".")
        elif key == "params":
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a mapping", where)
            out[key] = dict(val)  # params are replaced wholesale; the family decides the keys
        else:
            out[key] = val
    return out


@dataclass
class ExperimentConfig:
    raw: dict

    @property
    def kernel(self) -> KernelSpec:
        try:
            return kernel_from_config(self.raw["kernel"])
        except InvalidParameter as exc:
            raise ConfigError(str(exc), "kernel") from exc

    @property
    def d(self) -> int:
        return int(self.raw["schedule"]["d"])

    @property
    def h_max(self) -> Fraction:
        return as_fraction(self.raw["schedule"]["h_max"])

    @property
    def h_min(self) -> Fraction:
        return as_fraction(self.raw["schedule"]["h_min"])

    @property
    def levels(self) -> list:
        r = (self.h_max / self.h_min).numerator.bit_length() - 1
        return [self.h_max / 2 ** i for i in range(r + 1)]

    @property
    def quadrature(self) -> QuadratureSpec:
        q = self.raw["quadrature"]
        return QuadratureSpec(q["rule"], int(q["points"]), 1, int(q["samples"]), int(q["seed"]))

    @property
    def state_cap(self) -> int:
        return int(self.raw["caps"]["states"])

    @property
    def walk_cap(self) -> int:
        return int(self.raw["caps"]["walk"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False, default_flow_style=False)

    def validate(self) -> "ExperimentConfig":
        self.kernel
        sch = self.raw["schedule"]
        d = sch["d"]
        if isinstance(d, bool) or not isinstance(d, int) or d < 1:
            raise ConfigError(f"schedule.d must be a positive integer, got {d!r}", "schedule.d")
        for key in ("h_max", "h_min"):
            try:
                build_partition(sch[key], d, cap=2 ** 62)
            except InvalidResolution as exc:
                raise ConfigError(f"schedule.{key}: {exc}", f"schedule.{key}") from exc
        ratio = self.h_max / self.h_min
        n = ratio.numerator
        if ratio.denominator != 1 or n & (n - 1):
            raise ConfigError(f"schedule.h_min={sch['h_min']} is not h_max={sch['h_max']} "
                              f"divided by a power of two", "schedule.h_min")
        if self.raw["mode"] not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", "mode")
        eps = self.raw["target_epsilon"]
        if not isinstance(eps, (int, float)) or not 0.0 < eps < 1.0:
            raise ConfigError("target_epsilon must lie in (0, 1)", "target_epsilon")
        try:
            self.quadrature
        except (InvalidParameter, TypeError, ValueError) as exc:
            raise ConfigError(f"quadrature: {exc}", "quadrature") from exc
        for key in ("states", "walk"):
            v = self.raw["caps"][key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"caps.{key} must be a positive integer", f"caps.{key}")
        for key, v in self.raw["slack"].items():
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"slack.{key} must be a nonnegative number", f"slack.{key}")
        return self


def default_config() -> ExperimentConfig:
    return ExperimentConfig(copy.deepcopy(DEFAULTS))


def parse_config(text_or_dict) -> ExperimentConfig:
    if isinstance(text_or_dict, dict):
        data = text_or_dict
    else:
        try:
            data = yaml.safe_load(text_or_dict) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}", None) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level", None)
    if "kernel" in data and isinstance(data["kernel"], dict) and "params" not in data["kernel"]:
        fam = data["kernel"].get("family", DEFAULTS["kernel"]["family"])
        if fam != DEFAULTS["kernel"]["family"]:
            raise ConfigError(f"kernel.params is required for family {fam!r}", "kernel.params")
    return ExperimentConfig(_merge(DEFAULTS, data)).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", None) from exc
    return parse_config(text)
