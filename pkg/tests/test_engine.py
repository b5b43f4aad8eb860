from __future__ import annotations

import csv
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from psatune.adapters import SolverOutcome, SolverStatus, SolverTask
from psatune.engine import (
    EvaluationCache,
    ProbeState,
    SimulatedClock,
    allocate_time,
    evolve,
    luby,
    probing_phase,
    run_psa,
    solving_phase,
)
from psatune.settings import PsaSettings, SettingsError, parse_evolution, parse_stop, parse_timeout_init
from psatune.space import Configuration, grid
from psatune.strategies import make_strategy
from psatune.synthetic import SyntheticSolver, table_landscape

from conftest import ScriptedSolver, ScriptedStrategy, empty, make_space, solved


def luby_oracle(n):
    """Build the sequence by its self-similar definition: S_1 = [1], S_k = S_{k-1} S_{k-1} [2^(k-1)]."""
    seq = [1]
    while len(seq) < n:
        seq = seq + seq + [2 * seq[-1]]
    return seq[:n]


def test_allocate_time_default():
    assert allocate_time(1800, 0.2) == (360, 1440)


@given(st.floats(1e-3, 1e6), st.floats(0, 1))
def test_allocate_time_sums(total, ratio):
    p, s = allocate_time(total, ratio)
    assert p >= 0 and s >= 0
    assert p + s == pytest.approx(total, rel=1e-12)


def test_allocate_time_rejects():
    with pytest.raises(ValueError):
        allocate_time(10, 1.5)
    with pytest.raises(ValueError):
        allocate_time(0, 0.5)


def test_luby_prefix_and_oracle():
    assert [luby(k) for k in range(1, 17)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8, 1]
    assert [luby(k) for k in range(1, 1025)] == luby_oracle(1024)
    with pytest.raises(ValueError):
        luby(0)


def test_evolution_patterns():
    state = ProbeState(0.0, 5.0, 5.0)
    geo = PsaSettings(evolution="geometric", beta=1.5)
    seen = [state.current_timeout]
    for _ in range(2):
        state.current_timeout = evolve(geo, state)
        seen.append(state.current_timeout)
    assert seen == [5, 7.5, 11.25]

    state = ProbeState(0.0, 5.0, 5.0)
    assert all(evolve(PsaSettings(), state) == 5.0 for _ in range(5))

    state = ProbeState(0.0, 5.0, 5.0)
    lub = PsaSettings(evolution="luby")
    assert [evolve(lub, state) for _ in range(7)] == [5, 5, 10, 5, 5, 10, 20]


def test_cache_never_overwrites():
    cache = EvaluationCache()
    c = Configuration((1,))
    cache.put(c, 3.0, 1.0)
    with pytest.raises(KeyError):
        cache.put(c, 2.0, 1.0)
    assert cache[c] == (3.0, 1.0) and len(cache) == 1


def test_probe_state_strict_improvement():
    s = ProbeState(0.0, 1.0, 1.0)
    a, b = Configuration((0,)), Configuration((1,))
    assert s.offer(a, 5.0)
    assert not s.offer(b, 5.0)
    assert s.best_config == a and s.stagnation == 1
    assert not s.offer(b, None)
    assert s.offer(b, 4.0) and s.stagnation == 0


def test_settings_validation():
    with pytest.raises(SettingsError):
        PsaSettings(stop_condition="first_solution", evolution="geometric")
    with pytest.raises(SettingsError):
        PsaSettings(stop_condition="first_solution", evolution="luby")
    PsaSettings(stop_condition="first_solution", evolution="static")
    for bad in ({"probing_ratio": 1.5}, {"strategy": "nope"}, {"beta": 1.0}, {"global_time_mode": "x"}):
        with pytest.raises(SettingsError):
            PsaSettings(**bad)
    s = PsaSettings(seed=4)
    assert PsaSettings.from_dict(s.to_dict()) == s
    with pytest.raises(SettingsError):
        PsaSettings.from_dict({"typo": 1})


def test_setting_parsers():
    assert parse_timeout_init("static:3") == {"timeout_init": "static", "initial_timeout_s": 3.0}
    assert parse_timeout_init("first-runtime") == {"timeout_init": "first_runtime"}
    assert parse_evolution("geometric:2") == {"evolution": "geometric", "beta": 2.0}
    assert parse_stop("stagnation:4") == {"stop_condition": "stagnation", "stagnation_limit": 4}
    assert parse_stop("first_solution") == {"stop_condition": "first_solution"}
    for f, bad in ((parse_timeout_init, "dynamic"), (parse_evolution, "fast"), (parse_stop, "stagnation:x")):
        with pytest.raises(SettingsError):
            f(bad)


def configs(n, space):
    return list(grid(space))[:n]


def test_percent_mode_round_timeouts_are_truncated():
    space = make_space(10)
    settings = PsaSettings(global_timeout_s=50, probing_ratio=0.2, initial_timeout_s=4)
    solver = ScriptedSolver(by_config=lambda c, t, b, f: solved(10.0 - c[0], t))
    res = probing_phase(solver, space, ScriptedStrategy(space, configs(10, space)), settings, clock=SimulatedClock())
    assert [r.timeout_s for r in res.rounds] == [4, 4, 2]
    assert res.elapsed_s == 10
    assert res.remaining_s == 40
    assert res.best_objective == 8.0


def test_dynamic_mode_limits_tries():
    space = make_space(10)
    settings = PsaSettings(global_timeout_s=100, global_time_mode="dynamic", max_tries=3)
    solver = ScriptedSolver(by_config=lambda c, t, b, f: solved(5.0, 1.0))
    res = probing_phase(solver, space, ScriptedStrategy(space, configs(10, space)), settings, clock=SimulatedClock())
    assert len(res.rounds) == 3 and res.stop_reason == "max_tries"
    assert res.remaining_s == 97


def test_dynamic_mode_can_use_whole_budget():
    space = make_space(10)
    settings = PsaSettings(global_timeout_s=12, global_time_mode="dynamic", max_tries=30, initial_timeout_s=5)
    solver = ScriptedSolver(by_config=lambda c, t, b, f: empty(t))
    res = probing_phase(solver, space, ScriptedStrategy(space, configs(10, space)), settings, clock=SimulatedClock())
    assert [r.timeout_s for r in res.rounds] == [5, 5, 2]
    assert res.remaining_s == 0


def test_first_solution_stop():
    space = make_space(5)
    settings = PsaSettings(global_timeout_s=100, stop_condition="first_solution")
    solver = ScriptedSolver([empty(), empty(), solved(3.0), solved(1.0)])
    res = probing_phase(solver, space, ScriptedStrategy(space, configs(5, space)), settings, clock=SimulatedClock())
    assert len(res.rounds) == 3 and res.stop_reason == "first_solution"


def test_cache_hits_do_not_invoke_solver():
    space = make_space(3)
    a, b = Configuration((1,)), Configuration((2,))
    solver = ScriptedSolver(by_config=lambda c, t, bd, f: solved(float(c[0]), 1.0))
    strat = ScriptedStrategy(space, [a, b, a, a, b])
    res = probing_phase(solver, space, strat, PsaSettings(global_timeout_s=100), clock=SimulatedClock())
    assert solver.invocations == 2
    assert [r.cached for r in res.rounds] == [False, False, True, True, True]


def test_zero_ratio_means_no_probing():
    space = make_space(3)
    settings = PsaSettings(global_timeout_s=30, probing_ratio=0.0)
    solver = ScriptedSolver(by_config=lambda c, t, b, f: SolverOutcome(SolverStatus.SATISFIABLE, 7.0, t))
    res = run_psa(None, space, settings, solver=solver)
    assert res.probe_rounds == [] and solver.calls == [(space.default, 30, None, False)]
    assert res.final_objective == 7.0


def test_first_runtime_bootstrap_sets_timeout():
    space = make_space(4)
    settings = PsaSettings(global_timeout_s=100, timeout_init="first_runtime")

    def outcome(c, t, b, first):
        return solved(50.0, 1.5) if first else solved(40.0 + c[0], t)

    solver = ScriptedSolver(by_config=outcome)
    res = probing_phase(solver, space, ScriptedStrategy(space, configs(4, space)), settings, clock=SimulatedClock())
    assert res.bootstrap is not None and res.bootstrap.round == 0
    assert solver.calls[0] == (space.default, 20, None, True)
    assert [r.timeout_s for r in res.rounds] == [0.0, 1.5, 1.5, 1.5]
    # the default was cached by the bootstrap
    assert solver.invocations == 4 and res.rounds[0].cached


def test_first_runtime_clamps_and_falls_back():
    space = make_space(2)
    s = PsaSettings(global_timeout_s=100, timeout_init="first_runtime", initial_timeout_s=3)
    solver = ScriptedSolver([solved(1.0, 0.001)] + [solved(1.0, 1.0)] * 5)
    res = probing_phase(solver, space, ScriptedStrategy(space, [Configuration((1,))]), s, clock=SimulatedClock())
    assert res.rounds[0].timeout_s == 0.1
    solver = ScriptedSolver([SolverOutcome(SolverStatus.ERROR, None, 0.1)] + [solved(1.0, 1.0)] * 5)
    res = probing_phase(solver, space, ScriptedStrategy(space, [Configuration((1,))]), s, clock=SimulatedClock())
    assert res.rounds[0].timeout_s == 3


def test_solving_phase_uses_cut_and_keeps_incumbent():
    space = make_space(2)
    strat = make_strategy("random", space)
    c = Configuration((1,))
    better = ScriptedSolver([SolverOutcome(SolverStatus.OPTIMUM_FOUND, 4.0, 3.0)])
    _, obj, status, used = solving_phase(better, c, 5.0, 10.0, strat, clock=SimulatedClock())
    assert (obj, status, used) == (4.0, SolverStatus.OPTIMUM_FOUND, c)
    assert better.calls[0][2] == 5.0
    unsat = ScriptedSolver([SolverOutcome(SolverStatus.UNSATISFIABLE, None, 3.0)])
    assert solving_phase(unsat, c, 5.0, 10.0, strat, clock=SimulatedClock())[1:3] == (5.0, SolverStatus.OPTIMUM_FOUND)
    crash = ScriptedSolver([SolverOutcome(SolverStatus.ERROR, None, 3.0)])
    assert solving_phase(crash, c, 5.0, 10.0, strat, clock=SimulatedClock())[1:3] == (5.0, SolverStatus.SATISFIABLE)


def test_solving_phase_without_incumbent_runs_default():
    space = make_space(3)
    solver = ScriptedSolver([solved(9.0)])
    _, obj, _, used = solving_phase(solver, space.default, None, 10.0, make_strategy("bo", space), clock=SimulatedClock())
    assert used == space.default and obj == 9.0 and solver.calls[0][2] is None


def test_run_psa_writes_files(tmp_path):
    space = make_space(3, 3)
    table = {c: (100.0 - 3 * c[0] - c[1], 0.5) for c in grid(space)}
    land = table_landscape(space, table, gap=5.0)
    inst = tmp_path / "inst.json"
    inst.write_text("{}")
    task = SolverTask(inst, "maximize")
    settings = PsaSettings(global_timeout_s=30, strategy="grid")
    res = run_psa(task, space, settings, solver=SyntheticSolver(land, task), run_dir=tmp_path / "run")
    files = {p.name for p in (tmp_path / "run").iterdir()}
    assert {"settings.json", "run.csv", "rounds.csv", "solve.log", "round_1.log"} <= files
    assert json.loads((tmp_path / "run" / "settings.json").read_text())["strategy"] == "grid"
    row = next(csv.DictReader(open(tmp_path / "run" / "run.csv")))
    assert float(row["objective"]) == res.final_objective
    # three 2 s rounds fit in the 6 s probe; the cut run cannot beat the grid incumbent
    assert res.final_objective == min(r.objective for r in res.probe_rounds) == 94.0
    assert res.final_status is SolverStatus.TIMEOUT
    rounds = list(csv.DictReader(open(tmp_path / "run" / "rounds.csv")))
    assert len(rounds) == len(res.probe_rounds)


@given(st.integers(0, 10_000))
def test_total_simulated_time_within_budget(seed):
    rng = random.Random(seed)
    space = make_space(4, 4)
    table = {c: (rng.uniform(1, 100), rng.uniform(0.1, 10)) for c in grid(space)}
    land = table_landscape(space, table)
    settings = PsaSettings(
        global_timeout_s=rng.uniform(5, 60),
        probing_ratio=rng.uniform(0, 1),
        global_time_mode=rng.choice(["percent", "dynamic"]),
        evolution=rng.choice(["static", "geometric", "luby"]),
        timeout_init=rng.choice(["static", "first_runtime"]),
        strategy=rng.choice(["bo", "hamming", "random", "grid"]),
        seed=seed,
    )
    res = run_psa(None, space, settings, solver=SyntheticSolver(land))
    assert res.total_wall_s <= settings.global_timeout_s + 1e-9
    if res.probe_objective is not None:
        assert res.final_objective is not None and res.final_objective <= res.probe_objective
