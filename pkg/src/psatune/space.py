"""Categorical hyperparameter spaces, configurations and their Hamming geometry."""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

DEFAULT_FLAG = "-{name}={value}"


class SpaceError(ValueError):
    """Raised for malformed space documents or invalid configurations."""


@dataclass(frozen=True)
class Dimension:
    name: str
    options: tuple[str, ...]
    flag_template: str | None = None

    def __post_init__(self) -> None:
        if not self.options:
            raise SpaceError(f"dimension {self.name!r} has no options")
        if len(set(self.options)) != len(self.options):
            raise SpaceError(f"dimension {self.name!r} has duplicate options")

    def render(self, index: int) -> str:
        template = self.flag_template or DEFAULT_FLAG
        return template.replace("{name}", self.name).replace("{value}", self.options[index])


@dataclass(frozen=True)
class Configuration:
    """One option index per dimension, in dimension order. Hashable; used as cache key."""

    indices: tuple[int, ...]

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, i: int) -> int:
        return self.indices[i]

    def replace(self, dim: int, option: int) -> Configuration:
        idx = list(self.indices)
        idx[dim] = option
        return Configuration(tuple(idx))


@dataclass(frozen=True)
class ConfigSpace:
    dimensions: tuple[Dimension, ...]
    default: Configuration
    solver: str = ""

    def __post_init__(self) -> None:
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate dimension names")
        self.validate(self.default)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(d.options) for d in self.dimensions)

    def validate(self, c: Configuration) -> None:
        if len(c) != len(self.dimensions):
            raise SpaceError(f"configuration has {len(c)} entries, space has {len(self.dimensions)}")
        for i, (idx, size) in enumerate(zip(c, self.sizes)):
            if not 0 <= idx < size:
                raise SpaceError(f"option index {idx} out of range for dimension {self.dimensions[i].name!r}")

    def config(self, labels: Mapping[str, str]) -> Configuration:
        """Build a configuration from ``{dimension: option label}``; missing dimensions take the default."""
        idx = list(self.default.indices)
        for name, label in labels.items():
            pos = self.index_of(name)
            try:
                idx[pos] = self.dimensions[pos].options.index(label)
            except ValueError:
                raise SpaceError(f"unknown option {label!r} for dimension {name!r}") from None
        return Configuration(tuple(idx))

    def index_of(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise SpaceError(f"unknown dimension {name!r}")

    def labels(self, c: Configuration) -> dict[str, str]:
        return {d.name: d.options[i] for d, i in zip(self.dimensions, c)}

    def render_params(self, c: Configuration) -> list[str]:
        return [d.render(i) for d, i in zip(self.dimensions, c)]

    def describe(self, c: Configuration) -> str:
        return " ".join(self.render_params(c))


def _space_from_mapping(doc: Mapping[str, Any]) -> ConfigSpace:
    if not isinstance(doc, Mapping):
        raise SpaceError("space document must be an object")
    unknown = set(doc) - {"solver", "parameters"}
    if unknown:
        raise SpaceError(f"unknown keys in space document: {sorted(unknown)}")
    params = doc.get("parameters")
    if not isinstance(params, list) or not params:
        raise SpaceError("space document needs a non-empty 'parameters' list")
    dims = []
    default = []
    for p in params:
        if not isinstance(p, Mapping):
            raise SpaceError("each parameter must be an object")
        extra = set(p) - {"name", "flag", "values", "default"}
        if extra:
            raise SpaceError(f"unknown keys in parameter: {sorted(extra)}")
        for key in ("name", "values", "default"):
            if key not in p:
                raise SpaceError(f"parameter missing {key!r}")
        values = p["values"]
        if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
            raise SpaceError(f"parameter {p['name']!r}: 'values' must be a list of strings")
        flag = p.get("flag")
        if flag is not None and not isinstance(flag, str):
            raise SpaceError(f"parameter {p['name']!r}: 'flag' must be a string")
        dim = Dimension(str(p["name"]), tuple(values), flag)
        if p["default"] not in dim.options:
            raise SpaceError(f"parameter {dim.name!r}: default {p['default']!r} is not an option")
        dims.append(dim)
        default.append(dim.options.index(p["default"]))
    return ConfigSpace(tuple(dims), Configuration(tuple(default)), str(doc.get("solver", "")))


def load_space(source: str | Path | Mapping[str, Any]) -> ConfigSpace:
    """Load a space from a JSON file path, a JSON string, or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return _space_from_mapping(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"malformed space document: {exc}") from exc
    return _space_from_mapping(doc)


def cardinality(space: ConfigSpace) -> int:
    return math.prod(space.sizes)


def hamming_distance(a: Configuration, b: Configuration) -> int:
    if len(a) != len(b):
        raise SpaceError("configurations belong to different spaces")
    return sum(x != y for x, y in zip(a, b))


def neighbors(space: ConfigSpace, c: Configuration) -> list[Configuration]:
    """All configurations at Hamming distance 1, in dimension order then option order."""
    out = []
    for dim, size in enumerate(space.sizes):
        for opt in range(size):
            if opt != c[dim]:
                out.append(c.replace(dim, opt))
    return out


def random_config(space: ConfigSpace, rng: random.Random) -> Configuration:
    return Configuration(tuple(rng.randrange(size) for size in space.sizes))


def grid(space: ConfigSpace) -> Iterator[Configuration]:
    """Mixed-radix enumeration; the first dimension varies fastest."""
    for idx in itertools.product(*(range(s) for s in reversed(space.sizes))):
        yield Configuration(tuple(reversed(idx)))


def encode(space: ConfigSpace, c: Configuration) -> np.ndarray:
    """One-hot encoding, dimension-major."""
    out = np.zeros(sum(space.sizes))
    offset = 0
    for idx, size in zip(c, space.sizes):
        out[offset + idx] = 1.0
        offset += size
    return out


def decode(space: ConfigSpace, vector: Sequence[float]) -> Configuration:
    vec = np.asarray(vector, dtype=float)
    if vec.shape != (sum(space.sizes),):
        raise SpaceError("vector length does not match the space encoding")
    idx = []
    offset = 0
    for size in space.sizes:
        idx.append(int(np.argmax(vec[offset : offset + size])))
        offset += size
    return Configuration(tuple(idx))
