from __future__ import annotations

import json
from pathlib import Path

import pytest

from psatune.adapters import SolverOutcome, SolverStatus
from psatune.space import ConfigSpace, Configuration, load_space
from psatune.strategies import Strategy

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def make_space(*sizes: int, default: tuple[int, ...] | None = None) -> ConfigSpace:
    params = []
    for i, n in enumerate(sizes):
        values = [f"v{k}" for k in range(n)]
        d = values[default[i]] if default else values[0]
        params.append({"name": f"p{i}", "values": values, "default": d})
    return load_space({"parameters": params})


class ScriptedSolver:
    """Returns queued outcomes in call order (or a function of the configuration)."""

    simulated = True
    supports_bound = True
    grace_s = 0.0

    def __init__(self, outcomes=None, by_config=None):
        self.outcomes = list(outcomes or [])
        self.by_config = by_config
        self.invocations = 0
        self.calls: list[tuple[Configuration, float, float | None, bool]] = []

    def flags(self, c: Configuration) -> str:
        return " ".join(f"-p{i}={k}" for i, k in enumerate(c))

    def evaluate(self, c, timeout_s, bound=None, *, first_solution=False, log_path=None):
        self.invocations += 1
        self.calls.append((c, timeout_s, bound, first_solution))
        if self.by_config is not None:
            out = self.by_config(c, timeout_s, bound, first_solution)
        else:
            out = self.outcomes.pop(0)
        if log_path is not None:
            log_path.write_text(f"# scripted {c}\n")
        return out


def solved(obj: float, runtime: float = 1.0) -> SolverOutcome:
    return SolverOutcome(SolverStatus.SATISFIABLE, obj, runtime)


def empty(runtime: float = 1.0) -> SolverOutcome:
    return SolverOutcome(SolverStatus.TIMEOUT, None, runtime)


class ScriptedStrategy(Strategy):
    """Proposes a fixed list (repeats allowed), then nothing."""

    name = "scripted"

    def __init__(self, space, proposals):
        super().__init__(space, 0)
        self.proposals = list(proposals)

    def next_config(self):
        return self.proposals.pop(0) if self.proposals else None


@pytest.fixture
def space3():
    return make_space(3, 3, 3)


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def fake_instance(tmp_path):
    def write(name="inst", **doc):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(doc))
        return p

    return write
