"""Experiment configuration: JSON files mirroring :class:`ExperimentConfig`."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from ..fredholm_deform import (
    DeformationSymbol,
    Fermi,
    Indicator,
    OneMinusExpF,
    TestFunction,
    ThinnedIndicator,
    Zero,
    bump,
    bump_f,
    indicator_h,
    softened_indicator,
    zero_h,
)

SCENARIOS = ("bulk-sine", "edge-airy", "discrete-sine", "mc-verify", "gap-probability", "equilibrium")
SCENARIO_ALIASES = {"gap": "gap-probability"}


class ConfigError(ValueError):
    pass


def _num(value: Any, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    n: tuple[int, ...] = ()
    potential: str = "quadratic"
    weight: dict = field(default_factory=lambda: {"name": "krawtchouk", "p": 0.5})
    rho: str = "uniform"
    beta: float = 0.5
    x_star: Optional[float] = None
    symbol: dict = field(default_factory=lambda: {"family": "zero"})
    t: float = 0.0
    h: dict = field(default_factory=lambda: {"family": "bump", "height": 0.9, "a": -1.0, "b": 1.0})
    window: Optional[tuple[float, float]] = None
    quad_order: Optional[int] = None
    kernel_cutoff: float = 12.0
    seed: int = 0
    replicas: int = 100_000
    kernel: str = "sine"
    s_grid: tuple[float, ...] = ()
    output: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        scenario = SCENARIO_ALIASES.get(self.scenario, self.scenario)
        object.__setattr__(self, "scenario", scenario)
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        n = tuple(int(v) for v in self.n)
        object.__setattr__(self, "n", n)
        if scenario not in ("gap-probability",):
            if not n:
                raise ConfigError("n sweep list is empty")
            if any(b <= a for a, b in zip(n, n[1:])):
                raise ConfigError(f"n list must be strictly increasing, got {list(n)}")
            if n[0] < 1:
                raise ConfigError("n values must be positive")
        if scenario == "mc-verify" and n[-1] > 3:
            raise ConfigError("mc-verify supports n <= 3")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.t < 0:
            raise ConfigError("t must be nonnegative")
        if self.window is not None:
            a, b = (float(v) for v in self.window)
            if not a < b:
                raise ConfigError(f"window must satisfy a < b, got {self.window}")
            object.__setattr__(self, "window", (a, b))
        if self.quad_order is not None and self.quad_order < 2:
            raise ConfigError("quad_order must be at least 2")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")
        object.__setattr__(self, "s_grid", tuple(float(s) for s in self.s_grid))
        # parse eagerly so malformed specs fail at load time
        self.make_symbol()
        self.make_h()

    # -- construction of the objects named in the config --

    def make_symbol(self) -> DeformationSymbol:
        spec = dict(self.symbol)
        fam = spec.pop("family", None)
        try:
            if fam == "zero":
                return Zero()
            if fam == "indicator":
                return Indicator(_num(spec["a"], "symbol.a"), _num(spec["b"], "symbol.b"))
            if fam == "thinned":
                return ThinnedIndicator(_num(spec["gamma"], "symbol.gamma"), _num(spec["a"], "symbol.a"),
                                        _num(spec["b"], "symbol.b"))
            if fam == "fermi":
                default = "even" if self.scenario in ("bulk-sine", "mc-verify") else "one-sided"
                return Fermi(_num(spec.get("t", 1.0), "symbol.t"), _num(spec.get("s", 0.0), "symbol.s"),
                             spec.get("profile", default))
            if fam == "one-minus-exp":
                a, b = _num(spec["a"], "symbol.a"), _num(spec["b"], "symbol.b")
                height = _num(spec.get("height", 1.0), "symbol.height")
                return OneMinusExpF(bump_f(height, a, b), (a, b), f"bump({height:g})", kinks=(a, b))
        except KeyError as exc:
            raise ConfigError(f"symbol family {fam!r} is missing parameter {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"symbol: {exc}") from None
        raise ConfigError(f"unknown symbol family {fam!r}")

    def make_h(self) -> TestFunction:
        spec = dict(self.h)
        fam = spec.pop("family", None)
        try:
            if fam == "zero":
                return zero_h()
            height, a, b = (_num(spec[k], f"h.{k}") for k in ("height", "a", "b"))
            if fam == "bump":
                return bump(height, a, b)
            if fam == "soft-indicator":
                width = _num(spec.get("width", 1.0 / (self.quad_order or 16)), "h.width")
                return softened_indicator(height, a, b, width)
            if fam == "indicator":
                if not spec.get("outside_hypotheses", False):
                    raise ConfigError("plain indicator h requires \"outside_hypotheses\": true")
                return indicator_h(height, a, b)
        except KeyError as exc:
            raise ConfigError(f"h family {fam!r} is missing parameter {exc}") from None
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"h: {exc}") from None
        raise ConfigError(f"unknown h family {fam!r}")

    # -- serialization --

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        d["s_grid"] = list(self.s_grid)
        if self.window is not None:
            d["window"] = list(self.window)
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (output path and thread count excluded)."""
        d = self.to_dict()
        d.pop("output", None)
        d.pop("threads", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not serializable: {obj!r}")


def _decode_inf(obj):
    if isinstance(obj, dict):
        return {k: _decode_inf(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode_inf(v) for v in obj]
    if isinstance(obj, str) and obj.lower() in ("inf", "+inf", "-inf", "infinity", "-infinity"):
        return float(obj)
    return obj


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = _decode_inf(dict(data))
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "scenario" not in data:
        raise ConfigError("config needs a 'scenario'")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data)
