from __future__ import annotations

import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psatune.adapters import SolverStatus
from psatune.space import Configuration, grid, neighbors
from psatune.synthetic import SyntheticSolver, generate_landscape, synth_evaluate, table_landscape

from conftest import make_space


@pytest.fixture
def flat():
    space = make_space(2)
    table = {Configuration((0,)): (50.0, 1.0), Configuration((1,)): (30.0, 2.0)}
    return table_landscape(space, table, gap=10.0)


def test_curve_shape(flat):
    # ttf 1, duration 4: incumbents at 1, 1.75, 2.5, 4 with offsets 10, 5, 2, 0
    assert flat.curve(Configuration((0,))) == [(1.0, 60.0), (1.75, 55.0), (2.5, 52.0), (4.0, 50.0)]


@pytest.mark.parametrize(
    "timeout, status, obj, runtime",
    [
        (0.5, SolverStatus.TIMEOUT, None, 0.5),
        (1.0, SolverStatus.SATISFIABLE, 60.0, 1.0),
        (2.0, SolverStatus.SATISFIABLE, 55.0, 2.0),
        (4.0, SolverStatus.OPTIMUM_FOUND, 50.0, 4.0),
        (100.0, SolverStatus.OPTIMUM_FOUND, 50.0, 4.0),
    ],
)
def test_evaluate_by_timeout(flat, timeout, status, obj, runtime):
    out = synth_evaluate(flat, Configuration((0,)), timeout)
    assert (out.status, out.objective, out.runtime_s) == (status, obj, runtime)


def test_first_solution(flat):
    out = synth_evaluate(flat, Configuration((0,)), 100.0, first_solution=True)
    assert (out.objective, out.runtime_s) == (60.0, 1.0)


def test_bound_is_strict(flat):
    c = Configuration((0,))
    out = synth_evaluate(flat, c, 100.0, bound=55.0)
    assert out.objective == 50.0
    assert synth_evaluate(flat, c, 2.0, bound=55.0).objective is None
    nothing = synth_evaluate(flat, c, 100.0, bound=50.0)
    assert nothing.status is SolverStatus.TIMEOUT and nothing.runtime_s == 100.0


@given(st.integers(0, 500))
@settings(max_examples=30, deadline=None)
def test_median_default_bias(seed):
    space = make_space(3, 4, 5)
    land = generate_landscape(space, seed, interaction=0.0)
    qs = [land.quality(c) for c in grid(space)]
    assert min(qs) < land.quality(space.default) < max(qs)


@given(st.integers(0, 500))
@settings(max_examples=30, deadline=None)
def test_additive_landscape_has_one_basin(seed):
    space = make_space(3, 3, 3)
    land = generate_landscape(space, seed, interaction=0.0)
    local_minima = [
        c for c in grid(space) if all(land.quality(n) > land.quality(c) for n in neighbors(space, c))
    ]
    assert len(local_minima) == 1


def test_generation_is_deterministic():
    space = make_space(3, 3)
    a, b = generate_landscape(space, 7), generate_landscape(space, 7)
    assert [a.quality(c) for c in grid(space)] == [b.quality(c) for c in grid(space)]
    c = generate_landscape(space, 8)
    assert [a.quality(x) for x in grid(space)] != [c.quality(x) for x in grid(space)]


def test_worst_bias():
    space = make_space(4, 4)
    land = generate_landscape(space, 1, default_bias="worst", interaction=0.0)
    assert land.quality(space.default) == max(land.quality(c) for c in grid(space))


def test_ttf_within_range():
    space = make_space(3, 3, 3)
    land = generate_landscape(space, 3, ttf_range=(0.1, 0.2))
    ttfs = [land.time_to_first(c) for c in grid(space)]
    assert all(0.1 <= t <= 0.2 for t in ttfs)
    assert statistics.pstdev(ttfs) > 0


def test_solver_counts_invocations(flat, tmp_path):
    s = SyntheticSolver(flat)
    s.evaluate(Configuration((1,)), 3.0, log_path=tmp_path / "r.log")
    assert s.invocations == 1
    assert (tmp_path / "r.log").read_text().startswith("# synthetic")


def test_bad_steps_rejected():
    space = make_space(2)
    with pytest.raises(ValueError):
        table_landscape(space, {}, improvement_steps=((0.0, 1.0), (0.5, 2.0), (1.0, 0.0)))
