"""Deterministic stand-in for an anytime solver, driven by a simulated clock.

A landscape assigns every configuration a best reachable objective ``q``, a time to first
solution, and a piecewise-constant improvement curve from ``q + gap`` down to ``q``.
Nothing here sleeps: runtimes are simulated seconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .adapters import SolverOutcome, SolverStatus, SolverTask, format_number
from .space import ConfigSpace, Configuration

DEFAULT_STEPS: tuple[tuple[float, float], ...] = ((0.0, 1.0), (0.25, 0.5), (0.5, 0.2), (1.0, 0.0))


@dataclass(frozen=True)
class SyntheticLandscape:
    space: ConfigSpace
    quality: Callable[[Configuration], float]
    time_to_first: Callable[[Configuration], float]
    gap: Callable[[Configuration], float]
    improvement_steps: tuple[tuple[float, float], ...] = DEFAULT_STEPS
    duration_factor: float = 4.0
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        steps = self.improvement_steps
        if not steps or steps[0][0] != 0.0 or steps[-1] != (1.0, 0.0):
            raise ValueError("improvement steps must start at fraction 0 and end at (1.0, 0.0)")
        fracs = [s[0] for s in steps]
        offs = [s[1] for s in steps]
        if fracs != sorted(fracs) or offs != sorted(offs, reverse=True) or min(offs) < 0:
            raise ValueError("improvement steps must be increasing in time and non-increasing in offset")
        if self.duration_factor < 1.0:
            raise ValueError("duration_factor must be >= 1")

    def duration(self, c: Configuration) -> float:
        return self.time_to_first(c) * self.duration_factor

    def curve(self, c: Configuration) -> list[tuple[float, float]]:
        """(time, objective) incumbents in the order the solver would print them."""
        q, t0, gap = self.quality(c), self.time_to_first(c), self.gap(c)
        end = self.duration(c)
        return [(t0 + frac * (end - t0), q + gap * off) for frac, off in self.improvement_steps]


def synth_evaluate(
    landscape: SyntheticLandscape,
    c: Configuration,
    timeout_s: float,
    bound: float | None = None,
    *,
    first_solution: bool = False,
) -> SolverOutcome:
    """Pure function of its arguments. A bound is a strict cut: only objectives < bound count."""
    if timeout_s <= 0:
        raise ValueError("timeout_s must be positive")
    q = landscape.quality(c)
    end = landscape.duration(c)
    points = landscape.curve(c)
    if bound is not None:
        if q >= bound:
            return SolverOutcome(SolverStatus.TIMEOUT, None, timeout_s)
        points = [p for p in points if p[1] < bound]
    reached = [p for p in points if p[0] <= timeout_s]
    if not reached:
        return SolverOutcome(SolverStatus.TIMEOUT, None, min(timeout_s, end))
    if first_solution:
        t, obj = reached[0]
        return SolverOutcome(SolverStatus.SATISFIABLE, obj, t)
    if timeout_s >= end:
        return SolverOutcome(SolverStatus.OPTIMUM_FOUND, q, end)
    return SolverOutcome(SolverStatus.SATISFIABLE, reached[-1][1], timeout_s)


def _unit(seed: int, stream: int, c: Configuration) -> float:
    return float(np.random.default_rng([seed, stream, *c.indices]).random())


def generate_landscape(
    space: ConfigSpace,
    seed: int = 0,
    *,
    base: float = 100.0,
    scale: float = 10.0,
    interaction: float = 0.05,
    default_bias: str = "median",
    ttf_range: tuple[float, float] = (0.05, 0.3),
    gap_scale: float = 0.5,
    duration_factor: float = 4.0,
    improvement_steps: tuple[tuple[float, float], ...] = DEFAULT_STEPS,
) -> SyntheticLandscape:
    """Additive per-option effects plus a small hashed interaction term.

    ``default_bias``: "median" gives the default option the median effect in every dimension
    (a mediocre default), "worst" the largest effect, "none" leaves the draw untouched.
    With ``interaction=0`` the landscape has a single basin under Hamming moves.
    """
    if default_bias not in ("median", "worst", "none"):
        raise ValueError(f"unknown default_bias {default_bias!r}")
    rng = np.random.default_rng(seed)
    effects = []
    for dim, size in enumerate(space.sizes):
        e = rng.uniform(0.0, scale, size)
        if default_bias != "none" and size > 1:
            order = np.argsort(e)
            target = order[-1] if default_bias == "worst" else order[(size - 1) // 2]
            d = space.default[dim]
            e[[d, target]] = e[[target, d]]
        effects.append(e)
    lo, hi = ttf_range

    def quality(c: Configuration) -> float:
        additive = sum(effects[i][k] for i, k in enumerate(c))
        return float(base + additive + interaction * scale * _unit(seed, 1, c))

    def time_to_first(c: Configuration) -> float:
        return float(lo + (hi - lo) * _unit(seed, 2, c))

    def gap(c: Configuration) -> float:
        return float(gap_scale * scale * (0.5 + _unit(seed, 3, c)))

    params = {
        "seed": seed,
        "base": base,
        "scale": scale,
        "interaction": interaction,
        "default_bias": default_bias,
        "ttf_range": [lo, hi],
        "gap_scale": gap_scale,
        "duration_factor": duration_factor,
    }
    return SyntheticLandscape(
        space, quality, time_to_first, gap, tuple(improvement_steps), duration_factor, seed, params
    )


def table_landscape(
    space: ConfigSpace,
    table: Mapping[Configuration, tuple[float, float]],
    *,
    fallback: tuple[float, float] = (1000.0, 1.0),
    gap: float = 10.0,
    duration_factor: float = 4.0,
    improvement_steps: tuple[tuple[float, float], ...] = DEFAULT_STEPS,
) -> SyntheticLandscape:
    """Explicit ``{config: (quality, time_to_first)}``; anything missing uses ``fallback``."""

    def lookup(c: Configuration) -> tuple[float, float]:
        return table.get(c, fallback)

    return SyntheticLandscape(
        space,
        lambda c: lookup(c)[0],
        lambda c: lookup(c)[1],
        lambda c: gap,
        tuple(improvement_steps),
        duration_factor,
    )


def load_landscape(path: str | Path, space: ConfigSpace) -> SyntheticLandscape:
    """A synthetic instance file holds ``generate_landscape`` keyword arguments as JSON."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("synthetic instance must be a JSON object")
    doc.pop("objective_sense", None)
    if "ttf_range" in doc:
        doc["ttf_range"] = tuple(doc["ttf_range"])
    if "improvement_steps" in doc:
        doc["improvement_steps"] = tuple(tuple(s) for s in doc["improvement_steps"])
    return generate_landscape(space, **doc)


class SyntheticSolver:
    """Solver facade over a landscape; runtimes are charged to a simulated clock by the engine."""

    simulated = True
    supports_bound = True
    grace_s = 0.0

    def __init__(self, landscape: SyntheticLandscape, task: SolverTask | None = None) -> None:
        self.landscape = landscape
        self.space = landscape.space
        self.task = task
        self.invocations = 0

    def flags(self, c: Configuration) -> str:
        return self.space.describe(c)

    def evaluate(
        self,
        c: Configuration,
        timeout_s: float,
        bound: float | None = None,
        *,
        first_solution: bool = False,
        log_path: Path | None = None,
    ) -> SolverOutcome:
        self.invocations += 1
        out = synth_evaluate(self.landscape, c, timeout_s, bound, first_solution=first_solution)
        command = ("synthetic", f"-t={format_number(timeout_s)}", *self.space.render_params(c))
        if bound is not None:
            command += (f"-ub={format_number(bound)}",)
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            lines = [f"# {' '.join(command)}"]
            for t, obj in self.landscape.curve(c):
                if t <= out.runtime_s and (bound is None or obj < bound):
                    lines.append(f"o {format_number(obj)}")
                    if first_solution:
                        break
            lines.append(f"s {out.status.value}")
            log_path.write_text("\n".join(lines) + "\n")
        return SolverOutcome(out.status, out.objective, out.runtime_s, log_path, command)
