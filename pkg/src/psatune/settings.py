from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

from .strategies import STRATEGIES

GLOBAL_MODES = ("percent", "dynamic")
TIMEOUT_INITS = ("static", "first_runtime")
EVOLUTIONS = ("static", "geometric", "luby")
STOPS = ("timeout", "first_solution", "stagnation")


class SettingsError(ValueError):
    pass


@dataclass(frozen=True)
class PsaSettings:
    global_timeout_s: float = 1800.0
    probing_ratio: float = 0.2
    global_time_mode: str = "percent"
    max_tries: int = 30
    timeout_init: str = "static"
    initial_timeout_s: float = 5.0
    evolution: str = "static"
    beta: float = 1.5
    luby_unit_s: float | None = None  # None: scale Luby by the initial round timeout
    stop_condition: str = "timeout"
    stagnation_limit: int = 10
    strategy: str = "bo"
    strategy_options: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.global_timeout_s > 0:
            raise SettingsError("global timeout must be > 0")
        if not 0.0 <= self.probing_ratio <= 1.0:
            raise SettingsError(f"probing ratio must lie in [0, 1], got {self.probing_ratio}")
        _choice("global_time_mode", self.global_time_mode, GLOBAL_MODES)
        _choice("timeout_init", self.timeout_init, TIMEOUT_INITS)
        _choice("evolution", self.evolution, EVOLUTIONS)
        _choice("stop_condition", self.stop_condition, STOPS)
        _choice("strategy", self.strategy, tuple(STRATEGIES))
        if self.max_tries < 1:
            raise SettingsError("max_tries must be >= 1")
        if not self.initial_timeout_s > 0:
            raise SettingsError("initial timeout must be > 0")
        if not self.beta > 1:
            raise SettingsError("geometric growth factor must be > 1")
        if self.luby_unit_s is not None and not self.luby_unit_s > 0:
            raise SettingsError("luby unit must be > 0")
        if self.stagnation_limit < 1:
            raise SettingsError("stagnation limit must be >= 1")
        if self.stop_condition == "first_solution" and self.evolution != "static":
            raise SettingsError("first_solution stop only permits static timeout evolution")

    def replace(self, **changes: Any) -> PsaSettings:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["strategy_options"] = dict(self.strategy_options)
        return d

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> PsaSettings:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise SettingsError(f"unknown settings keys: {sorted(unknown)}")
        return cls(**doc)


def _choice(label: str, value: str, allowed: tuple[str, ...]) -> None:
    if value not in allowed:
        raise SettingsError(f"unknown {label} {value!r}; choose from {', '.join(allowed)}")


def parse_timeout_init(text: str) -> dict[str, Any]:
    """``static:S`` | ``static`` | ``first-runtime``."""
    kind, _, arg = text.partition(":")
    kind = kind.replace("-", "_")
    if kind == "static":
        return {"timeout_init": "static", **({"initial_timeout_s": _num(arg, text)} if arg else {})}
    if kind == "first_runtime" and not arg:
        return {"timeout_init": "first_runtime"}
    raise SettingsError(f"bad --timeout-init {text!r}")


def parse_evolution(text: str) -> dict[str, Any]:
    """``static`` | ``geometric[:B]`` | ``luby[:UNIT]``."""
    kind, _, arg = text.partition(":")
    if kind == "static" and not arg:
        return {"evolution": "static"}
    if kind == "geometric":
        return {"evolution": "geometric", **({"beta": _num(arg, text)} if arg else {})}
    if kind == "luby":
        return {"evolution": "luby", **({"luby_unit_s": _num(arg, text)} if arg else {})}
    raise SettingsError(f"bad --evolve {text!r}")


def parse_stop(text: str) -> dict[str, Any]:
    """``timeout`` | ``first-solution`` | ``stagnation[:L]``."""
    kind, _, arg = text.partition(":")
    kind = kind.replace("-", "_")
    if kind in ("timeout", "first_solution") and not arg:
        return {"stop_condition": kind}
    if kind == "stagnation":
        if not arg:
            return {"stop_condition": "stagnation"}
        if not arg.isdigit():
            raise SettingsError(f"bad stagnation limit in {text!r}")
        return {"stop_condition": "stagnation", "stagnation_limit": int(arg)}
    raise SettingsError(f"bad --stop {text!r}")


def _num(arg: str, text: str) -> float:
    try:
        return float(arg)
    except ValueError:
        raise SettingsError(f"bad number in {text!r}") from None
