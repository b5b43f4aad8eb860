"""The probe-and-solve engine: budget split, round timeouts, the probing loop and the final solve."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .adapters import AdapterSpec, SolverOutcome, SolverStatus, SolverTask, SubprocessSolver, format_number
from .settings import PsaSettings
from .space import ConfigSpace, Configuration
from .strategies import Strategy, make_strategy
from .synthetic import SyntheticSolver, load_landscape

log = logging.getLogger(__name__)

RESULT_FIELDS = ["instance", "variant", "strategy", "seed", "status", "objective", "runtime_s", "flags"]
ROUND_FIELDS = ["round", "flags", "timeout_s", "status", "objective", "runtime_s"]
MIN_FIRST_RUNTIME_S = 0.1


class Solver(Protocol):
    simulated: bool
    supports_bound: bool
    grace_s: float
    invocations: int

    def flags(self, c: Configuration) -> str: ...

    def evaluate(
        self,
        c: Configuration,
        timeout_s: float,
        bound: float | None = None,
        *,
        first_solution: bool = False,
        log_path: Path | None = None,
    ) -> SolverOutcome: ...


class WallClock:
    def now(self) -> float:
        return time.monotonic()

    def charge(self, seconds: float) -> None:
        pass


class SimulatedClock:
    """Advances only when solver runtimes are charged to it."""

    def __init__(self, start: float = 0.0) -> None:
        self.t = start

    def now(self) -> float:
        return self.t

    def charge(self, seconds: float) -> None:
        self.t += seconds


def make_solver(task: SolverTask, space: ConfigSpace) -> Solver:
    task.check()
    if isinstance(task.adapter, AdapterSpec):
        return SubprocessSolver(task, space)
    return SyntheticSolver(load_landscape(task.instance_path, space), task)


def allocate_time(total_s: float, ratio: float) -> tuple[float, float]:
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"probing ratio must lie in [0, 1], got {ratio}")
    if not total_s > 0:
        raise ValueError("global timeout must be > 0")
    probe = ratio * total_s
    return probe, total_s - probe


def luby(k: int) -> int:
    """k-th term (1-based) of 1, 1, 2, 1, 1, 2, 4, 1, ..."""
    if k < 1:
        raise ValueError("luby index starts at 1")
    while True:
        i = k.bit_length()
        if k == (1 << i) - 1:
            return 1 << (i - 1)
        k -= (1 << (i - 1)) - 1


class EvaluationCache:
    """Configuration -> (objective or None, runtime). Entries are never overwritten."""

    def __init__(self) -> None:
        self._store: dict[Configuration, tuple[float | None, float]] = {}

    def __contains__(self, c: Configuration) -> bool:
        return c in self._store

    def __getitem__(self, c: Configuration) -> tuple[float | None, float]:
        return self._store[c]

    def __len__(self) -> int:
        return len(self._store)

    def put(self, c: Configuration, objective: float | None, runtime_s: float) -> None:
        if c in self._store:
            raise KeyError(f"configuration already cached: {c}")
        self._store[c] = (objective, runtime_s)


@dataclass
class ProbeState:
    start: float
    initial_timeout: float
    current_timeout: float
    best_objective: float | None = None  # None stands for "no solution yet"
    best_config: Configuration | None = None
    stagnation: int = 0
    round_index: int = 0
    luby_counter: int = 1

    def offer(self, c: Configuration, objective: float | None) -> bool:
        """Strict-improvement incumbent update; returns whether the incumbent changed."""
        if objective is not None and (self.best_objective is None or objective < self.best_objective):
            self.best_objective = objective
            self.best_config = c
            self.stagnation = 0
            return True
        self.stagnation += 1
        return False


@dataclass(frozen=True)
class TrialRecord:
    round: int
    config: Configuration
    timeout_s: float
    status: SolverStatus
    objective: float | None
    runtime_s: float
    cached: bool = False
    flags: str = ""


@dataclass
class ProbeResult:
    best_config: Configuration
    best_objective: float | None
    remaining_s: float
    rounds: list[TrialRecord]
    bootstrap: TrialRecord | None
    elapsed_s: float
    stop_reason: str


@dataclass
class PsaResult:
    final_objective: float | None
    final_status: SolverStatus
    best_config: Configuration
    probe_rounds: list[TrialRecord]
    phase_durations: tuple[float, float]
    total_wall_s: float
    bootstrap: TrialRecord | None = None
    probe_objective: float | None = None
    stop_reason: str = ""
    invocations: int = 0
    flags: str = ""
    solve_command: tuple[str, ...] = field(default=())


def evolve(settings: PsaSettings, state: ProbeState) -> float:
    if settings.evolution == "static":
        return state.current_timeout
    if settings.evolution == "geometric":
        return state.current_timeout * settings.beta
    unit = settings.luby_unit_s if settings.luby_unit_s is not None else state.initial_timeout
    value = unit * luby(state.luby_counter)
    state.luby_counter += 1
    return value


def _log_path(run_dir: Path | None, name: str) -> Path | None:
    return run_dir / name if run_dir is not None else None


def init_timeout(
    settings: PsaSettings,
    solver: Solver,
    space: ConfigSpace,
    probe_budget_s: float,
    strategy: Strategy,
    cache: EvaluationCache,
    *,
    clock: WallClock | SimulatedClock,
    run_dir: Path | None = None,
) -> tuple[float, TrialRecord | None]:
    """Static: the configured timeout. First-runtime: run the default until its first solution."""
    if settings.timeout_init == "static" or probe_budget_s <= 0:
        return settings.initial_timeout_s, None
    c = space.default
    out = solver.evaluate(c, probe_budget_s, first_solution=True, log_path=_log_path(run_dir, "round_0.log"))
    clock.charge(out.runtime_s)
    objective = out.objective if out.status.has_solution else None
    record = TrialRecord(0, c, probe_budget_s, out.status, objective, out.runtime_s, flags=solver.flags(c))
    if out.status is SolverStatus.ERROR:
        log.warning("first-runtime bootstrap failed; falling back to a %ss round timeout", settings.initial_timeout_s)
        return settings.initial_timeout_s, record
    tau = min(max(out.runtime_s, MIN_FIRST_RUNTIME_S), probe_budget_s)
    if objective is not None:
        cache.put(c, objective, out.runtime_s)
        strategy.update_model(c, objective, out.runtime_s)
    return tau, record


def probing_phase(
    solver: Solver,
    space: ConfigSpace,
    strategy: Strategy,
    settings: PsaSettings,
    *,
    clock: WallClock | SimulatedClock,
    cache: EvaluationCache | None = None,
    run_dir: Path | None = None,
) -> ProbeResult:
    cache = cache if cache is not None else EvaluationCache()
    probe_s, _ = allocate_time(settings.global_timeout_s, settings.probing_ratio)
    total_s = settings.global_timeout_s
    t0 = clock.now()
    tau, bootstrap = init_timeout(settings, solver, space, probe_s, strategy, cache, clock=clock, run_dir=run_dir)
    state = ProbeState(start=t0, initial_timeout=tau, current_timeout=tau, best_config=space.default)
    if bootstrap is not None and bootstrap.objective is not None:
        state.best_objective = bootstrap.objective
        state.best_config = bootstrap.config

    percent = settings.global_time_mode == "percent"
    budget_end = probe_s if percent else total_s
    rounds: list[TrialRecord] = []
    reason = "budget"
    while True:
        if settings.probing_ratio == 0.0:
            reason = "no probing budget"
            break
        elapsed = clock.now() - t0
        if elapsed >= budget_end:
            reason = "budget"
            break
        if not percent and len(rounds) >= settings.max_tries:
            reason = "max_tries"
            break
        c = strategy.next_config()
        if c is None:
            reason = "exhausted"
            break
        state.round_index += 1
        if c in cache:
            objective, runtime = cache[c]
            status = SolverStatus.SATISFIABLE if objective is not None else SolverStatus.UNKNOWN
            record = TrialRecord(state.round_index, c, 0.0, status, objective, runtime, True, solver.flags(c))
        else:
            granted = min(state.current_timeout, budget_end - elapsed)
            out = solver.evaluate(c, granted, log_path=_log_path(run_dir, f"round_{state.round_index}.log"))
            clock.charge(out.runtime_s)
            objective = out.objective if out.status.has_solution else None
            runtime = out.runtime_s
            cache.put(c, objective, runtime)
            record = TrialRecord(state.round_index, c, granted, out.status, objective, runtime, False, solver.flags(c))
        rounds.append(record)
        state.offer(c, objective)
        strategy.update_model(c, objective, runtime)
        state.current_timeout = evolve(settings, state)
        if settings.stop_condition == "first_solution" and objective is not None:
            reason = "first_solution"
            break
        if settings.stop_condition == "stagnation" and state.stagnation >= settings.stagnation_limit:
            reason = "stagnation"
            break
    elapsed = clock.now() - t0
    best = state.best_config if state.best_config is not None else space.default
    return ProbeResult(best, state.best_objective, total_s - elapsed, rounds, bootstrap, elapsed, reason)


def solving_phase(
    solver: Solver,
    best_config: Configuration,
    best_objective: float | None,
    remaining_s: float,
    strategy: Strategy,
    *,
    clock: WallClock | SimulatedClock,
    run_dir: Path | None = None,
) -> tuple[SolverOutcome | None, float | None, SolverStatus, Configuration]:
    """Returns (solve-run outcome, final objective, final status, configuration used)."""
    if remaining_s <= 0:
        status = SolverStatus.SATISFIABLE if best_objective is not None else SolverStatus.TIMEOUT
        return None, best_objective, status, best_config
    path = _log_path(run_dir, "solve.log")
    if best_objective is None:
        c = strategy.get_best_config()
        out = solver.evaluate(c, remaining_s, log_path=path)
        clock.charge(out.runtime_s)
        return out, out.objective, out.status, c
    bound = best_objective if solver.supports_bound else None
    out = solver.evaluate(best_config, remaining_s, bound, log_path=path)
    clock.charge(out.runtime_s)
    if out.objective is not None and out.objective < best_objective:
        return out, out.objective, out.status, best_config
    if out.objective is not None and out.objective == best_objective and out.status is SolverStatus.OPTIMUM_FOUND:
        return out, best_objective, out.status, best_config
    # the cut run found nothing strictly better; the probe incumbent stands
    status = SolverStatus.OPTIMUM_FOUND if (bound is not None and out.status is SolverStatus.UNSATISFIABLE) else out.status
    if status is SolverStatus.ERROR or status is SolverStatus.UNKNOWN:
        status = SolverStatus.SATISFIABLE
    return out, best_objective, status, best_config


def run_psa(
    task: SolverTask | None,
    space: ConfigSpace,
    settings: PsaSettings,
    *,
    solver: Solver | None = None,
    strategy: Strategy | None = None,
    clock: WallClock | SimulatedClock | None = None,
    run_dir: str | Path | None = None,
    variant: str = "psa",
) -> PsaResult:
    """Allocate, probe, solve. Configuration errors surface before any solver is spawned."""
    if solver is None:
        if task is None:
            raise ValueError("need a task or a solver")
        solver = make_solver(task, space)
    if strategy is None:
        strategy = make_strategy(settings.strategy, space, settings.seed, **dict(settings.strategy_options))
    if clock is None:
        clock = SimulatedClock() if solver.simulated else WallClock()
    rd = Path(run_dir) if run_dir is not None else None
    if rd is not None:
        rd.mkdir(parents=True, exist_ok=True)
        (rd / "settings.json").write_text(json.dumps(settings.to_dict(), indent=2, sort_keys=True) + "\n")

    start = clock.now()
    probe = probing_phase(solver, space, strategy, settings, clock=clock, run_dir=rd)
    mid = clock.now()
    out, final_obj, status, used = solving_phase(
        solver, probe.best_config, probe.best_objective, probe.remaining_s, strategy, clock=clock, run_dir=rd
    )
    end = clock.now()
    result = PsaResult(
        final_objective=final_obj,
        final_status=status,
        best_config=used,
        probe_rounds=probe.rounds,
        phase_durations=(mid - start, end - mid),
        total_wall_s=end - start,
        bootstrap=probe.bootstrap,
        probe_objective=probe.best_objective,
        stop_reason=probe.stop_reason,
        invocations=solver.invocations,
        flags=solver.flags(used),
        solve_command=out.command if out is not None else (),
    )
    if rd is not None:
        instance = task.instance_id if task is not None else "instance"
        write_run_files(rd, result, instance=instance, variant=variant, settings=settings)
    return result


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x)) if not float(x).is_integer() else format_number(x)


def result_row(result: PsaResult, *, instance: str, variant: str, settings: PsaSettings) -> dict[str, str]:
    return {
        "instance": instance,
        "variant": variant,
        "strategy": settings.strategy,
        "seed": str(settings.seed),
        "status": result.final_status.value,
        "objective": _fmt(result.final_objective),
        "runtime_s": _fmt(result.total_wall_s),
        "flags": result.flags,
    }


def write_run_files(run_dir: Path, result: PsaResult, *, instance: str, variant: str, settings: PsaSettings) -> None:
    with open(run_dir / "run.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        w.writeheader()
        w.writerow(result_row(result, instance=instance, variant=variant, settings=settings))
    rows = ([result.bootstrap] if result.bootstrap is not None else []) + list(result.probe_rounds)
    with open(run_dir / "rounds.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROUND_FIELDS)
        for r in rows:
            w.writerow([r.round, r.flags, _fmt(r.timeout_s), r.status.value, _fmt(r.objective), _fmt(r.runtime_s)])

