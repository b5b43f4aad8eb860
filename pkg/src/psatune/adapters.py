"""Run one configuration on one instance under a wall-clock limit and parse what the solver printed."""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import shlex
import signal
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .space import ConfigSpace, Configuration

log = logging.getLogger(__name__)

DEFAULT_OBJECTIVE_PATTERN = r"^o\s+(-?\d+(?:\.\d+)?)\s*$"
DEFAULT_STATUS_PATTERN = r"^s\s+(.+?)\s*$"
DEFAULT_GRACE_S = 2.0
_PLACEHOLDER = re.compile(r"\{([a-z_]*)\}")
_KNOWN_PLACEHOLDERS = {"instance", "timeout_s", "params", "bound", "python"}


class AdapterError(ValueError):
    """Adapter or task misconfiguration, detected before any solver is spawned."""


class SolverStatus(str, enum.Enum):
    OPTIMUM_FOUND = "OPTIMUM_FOUND"
    SATISFIABLE = "SATISFIABLE"
    UNSATISFIABLE = "UNSATISFIABLE"
    TIMEOUT = "TIMEOUT"
    ERROR = "ERROR"
    UNKNOWN = "UNKNOWN"

    @property
    def has_solution(self) -> bool:
        return self in (SolverStatus.OPTIMUM_FOUND, SolverStatus.SATISFIABLE)


DEFAULT_STATUS_TOKENS = {
    "OPTIMUM FOUND": SolverStatus.OPTIMUM_FOUND,
    "OPTIMUM": SolverStatus.OPTIMUM_FOUND,
    "SATISFIABLE": SolverStatus.SATISFIABLE,
    "UNSATISFIABLE": SolverStatus.UNSATISFIABLE,
    "UNKNOWN": SolverStatus.UNKNOWN,
    "TIMEOUT": SolverStatus.TIMEOUT,
    "ERROR": SolverStatus.ERROR,
}


@dataclass(frozen=True)
class SolverOutcome:
    """Result of one solver run. ``objective`` is always in canonical (minimize) sense."""

    status: SolverStatus
    objective: float | None
    runtime_s: float
    raw_log_path: Path | None = None
    command: tuple[str, ...] = ()


@dataclass(frozen=True)
class AdapterSpec:
    command_template: str
    objective_pattern: str = DEFAULT_OBJECTIVE_PATTERN
    status_pattern: str = DEFAULT_STATUS_PATTERN
    status_map: Mapping[str, SolverStatus] = field(default_factory=lambda: dict(DEFAULT_STATUS_TOKENS))
    bound_template: str | None = None
    grace_s: float = DEFAULT_GRACE_S

    def __post_init__(self) -> None:
        for needed in ("{instance}", "{timeout_s}"):
            if needed not in self.command_template:
                raise AdapterError(f"command template lacks {needed}")
        for name in _PLACEHOLDER.findall(self.command_template):
            if name not in _KNOWN_PLACEHOLDERS:
                raise AdapterError(f"unknown placeholder {{{name}}} in command template")
        if self.bound_template is not None and "{bound}" not in self.bound_template:
            raise AdapterError("bound flag lacks {bound}")
        try:
            if re.compile(self.objective_pattern).groups != 1:
                raise AdapterError("objective_pattern needs exactly one capture group")
        except re.error as exc:
            raise AdapterError(f"bad objective_pattern: {exc}") from exc
        if self.grace_s < 0:
            raise AdapterError("grace_s must be >= 0")

    @property
    def supports_bound(self) -> bool:
        return self.bound_template is not None


@dataclass(frozen=True)
class SyntheticAdapter:
    """Marker adapter: evaluate against a procedurally generated landscape on a simulated clock."""

    grace_s: float = 0.0
    supports_bound: bool = True


@dataclass(frozen=True)
class SolverTask:
    instance_path: Path
    objective_sense: str = "minimize"
    adapter: AdapterSpec | SyntheticAdapter = field(default_factory=SyntheticAdapter)

    def __post_init__(self) -> None:
        if self.objective_sense not in ("minimize", "maximize"):
            raise AdapterError(f"objective_sense must be minimize or maximize, got {self.objective_sense!r}")

    @property
    def instance_id(self) -> str:
        return Path(self.instance_path).stem

    def check(self) -> None:
        path = Path(self.instance_path)
        if not path.is_file():
            raise AdapterError(f"instance file not found: {path}")

    def to_canonical(self, value: float | None) -> float | None:
        if value is None:
            return None
        return -value if self.objective_sense == "maximize" else value

    from_canonical = to_canonical


def load_adapter(source: str | Path | Mapping[str, Any]) -> AdapterSpec | SyntheticAdapter:
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        try:
            doc = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise AdapterError(f"cannot read adapter file {source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise AdapterError("adapter document must be an object")
    if doc.get("synthetic"):
        return SyntheticAdapter()
    unknown = set(doc) - {"command", "objective_pattern", "status_pattern", "status_tokens", "bound_flag", "grace_s"}
    if unknown:
        raise AdapterError(f"unknown keys in adapter document: {sorted(unknown)}")
    if "command" not in doc:
        raise AdapterError("adapter document needs 'command'")
    status_map = dict(DEFAULT_STATUS_TOKENS)
    for token, name in doc.get("status_tokens", {}).items():
        try:
            status_map[token] = SolverStatus(name)
        except ValueError:
            raise AdapterError(f"unknown status {name!r} for token {token!r}") from None
    return AdapterSpec(
        command_template=doc["command"],
        objective_pattern=doc.get("objective_pattern", DEFAULT_OBJECTIVE_PATTERN),
        status_pattern=doc.get("status_pattern", DEFAULT_STATUS_PATTERN),
        status_map=status_map,
        bound_template=doc.get("bound_flag"),
        grace_s=float(doc.get("grace_s", DEFAULT_GRACE_S)),
    )


def format_number(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.6f}".rstrip("0").rstrip(".")


def render_command(
    spec: AdapterSpec,
    task: SolverTask,
    space: ConfigSpace,
    c: Configuration,
    timeout_s: float,
    bound: float | None = None,
) -> list[str]:
    """Substitute placeholders token by token. ``bound`` is in the solver's own (original) sense.

    ``{params}`` expands to one token per dimension flag (none for an empty space). When a bound is
    given and the template has no ``{bound}`` placeholder, the rendered bound flag is appended.
    """
    values = {
        "instance": str(task.instance_path),
        "timeout_s": format_number(timeout_s),
        "python": sys.executable,
    }
    if bound is not None:
        values["bound"] = format_number(bound)
    argv: list[str] = []
    for token in shlex.split(spec.command_template):
        if token == "{params}":
            for p in space.render_params(c):
                argv.extend(shlex.split(p))
            continue
        if "{params}" in token:
            token = token.replace("{params}", " ".join(space.render_params(c)))

        def sub(m: re.Match[str]) -> str:
            name = m.group(1)
            if name not in values:
                raise AdapterError(f"unresolved placeholder {{{name}}}")
            return values[name]

        token = _PLACEHOLDER.sub(sub, token)
        if token:
            argv.append(token)
    if bound is not None and "{bound}" not in spec.command_template:
        if spec.bound_template is None:
            raise AdapterError("adapter has no bound flag; cannot inject an objective cut")
        argv.extend(shlex.split(spec.bound_template.replace("{bound}", values["bound"])))
    return argv


def parse_output(raw: str, spec: AdapterSpec) -> tuple[SolverStatus, float | None]:
    """Last objective match wins (anytime solvers print improving incumbents in order)."""
    objective = None
    for m in re.finditer(spec.objective_pattern, raw, flags=re.MULTILINE):
        try:
            objective = float(m.group(1))
        except ValueError:
            continue
    status = SolverStatus.UNKNOWN
    tokens = list(re.finditer(spec.status_pattern, raw, flags=re.MULTILINE))
    if tokens:
        status = lookup_status(tokens[-1].group(1), spec.status_map)
    return status, objective


def lookup_status(token: str, status_map: Mapping[str, SolverStatus]) -> SolverStatus:
    token = token.strip()
    if token in status_map:
        return status_map[token]
    # longest key that prefixes the token: "OPTIMUM FOUND" -> "OPTIMUM", never "UNSAT..." -> "SAT..."
    best = None
    for key in status_map:
        if token.startswith(key) and (best is None or len(key) > len(best)):
            best = key
    return status_map[best] if best is not None else SolverStatus.UNKNOWN


def normalize(status: SolverStatus, objective: float | None, *, hit_limit: bool, failed: bool) -> SolverStatus:
    """Make status and objective agree: an objective implies a solution, a solution needs an objective."""
    if objective is not None:
        return status if status.has_solution else SolverStatus.SATISFIABLE
    if status.has_solution:
        status = SolverStatus.UNKNOWN
    if status is SolverStatus.UNKNOWN:
        if hit_limit:
            return SolverStatus.TIMEOUT
        if failed:
            return SolverStatus.ERROR
    return status


class SubprocessSolver:
    """Evaluates configurations by spawning the adapter's command line."""

    simulated = False

    def __init__(self, task: SolverTask, space: ConfigSpace) -> None:
        if not isinstance(task.adapter, AdapterSpec):
            raise AdapterError("SubprocessSolver needs a command-line adapter")
        task.check()
        self.task = task
        self.space = space
        self.spec: AdapterSpec = task.adapter
        self.invocations = 0

    @property
    def supports_bound(self) -> bool:
        return self.spec.supports_bound

    @property
    def grace_s(self) -> float:
        return self.spec.grace_s

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
        if timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        solver_bound = self.task.from_canonical(bound)
        argv = render_command(self.spec, self.task, self.space, c, timeout_s, solver_bound)
        self.invocations += 1
        out = run_with_deadline(
            argv,
            timeout_s + self.spec.grace_s,
            stop_pattern=self.spec.objective_pattern if first_solution else None,
        )
        status, objective = parse_output(out.text, self.spec)
        if first_solution and objective is not None:
            # stopped on purpose; keep the first incumbent only
            m = re.search(self.spec.objective_pattern, out.text, flags=re.MULTILINE)
            objective = float(m.group(1)) if m else objective
            status = SolverStatus.SATISFIABLE
        hit_limit = out.killed or (not out.stopped_early and out.runtime_s >= timeout_s)
        status = normalize(status, objective, hit_limit=hit_limit, failed=out.returncode not in (0, None))
        if out.spawn_error:
            status, objective = SolverStatus.ERROR, None
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            log_path.write_text(f"# {shlex.join(argv)}\n{out.text}")
        return SolverOutcome(status, self.task.to_canonical(objective), out.runtime_s, log_path, tuple(argv))


@dataclass
class ProcessOutput:
    text: str
    runtime_s: float
    returncode: int | None
    killed: bool
    spawn_error: bool = False
    stopped_early: bool = False


def run_with_deadline(argv: list[str], hard_limit_s: float, stop_pattern: str | None = None) -> ProcessOutput:
    """Run ``argv``, killing its process group at ``hard_limit_s`` wall-clock seconds.

    With ``stop_pattern``, the process is also stopped as soon as a matching line is printed.
    """
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
            text=True,
            bufsize=1,
            start_new_session=True,
        )
    except OSError as exc:
        return ProcessOutput(f"spawn failed: {exc}\n", time.monotonic() - start, None, False, spawn_error=True)

    lines: list[str] = []
    hit = threading.Event()
    stop_re = re.compile(stop_pattern) if stop_pattern else None

    def reader() -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            lines.append(line)
            if stop_re is not None and stop_re.search(line.rstrip("\n")):
                hit.set()

    t = threading.Thread(target=reader, daemon=True)
    t.start()
    deadline = start + hard_limit_s
    killed = stopped_early = False
    while proc.poll() is None:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            killed = True
            break
        if hit.is_set():
            stopped_early = True
            break
        time.sleep(min(remaining, 0.02))
    if killed or stopped_early:
        _kill(proc)
    proc.wait()
    t.join(timeout=1.0)
    runtime = time.monotonic() - start
    return ProcessOutput("".join(lines), runtime, proc.returncode, killed, stopped_early=stopped_early)


def _kill(proc: subprocess.Popen[str]) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()
