"""HPO strategies: propose configurations, absorb results, report the incumbent.

Every strategy keeps a visited set and never proposes the same configuration twice.
Objectives are canonical (smaller is better); ``None`` marks a failed or empty trial.
"""

from __future__ import annotations

import random
from typing import Iterator

import numpy as np

from . import gp
from .space import ConfigSpace, Configuration, cardinality, grid, neighbors, random_config

RESAMPLE_TRIES = 100


class Strategy:
    name = "base"

    def __init__(self, space: ConfigSpace, seed: int = 0) -> None:
        self.space = space
        self.rng = random.Random(seed)
        self.visited: set[Configuration] = set()
        self.incumbent: tuple[Configuration, float] | None = None
        self.trials: list[tuple[Configuration, float | None, float]] = []
        self._size = cardinality(space)

    def next_config(self) -> Configuration | None:
        raise NotImplementedError

    def update_model(self, c: Configuration, objective: float | None, runtime_s: float) -> None:
        self.visited.add(c)
        self.trials.append((c, objective, runtime_s))
        if objective is not None and (self.incumbent is None or objective < self.incumbent[1]):
            self.incumbent = (c, objective)

    def get_best_config(self) -> Configuration:
        return self.incumbent[0] if self.incumbent is not None else self.space.default

    @property
    def exhausted(self) -> bool:
        return len(self.visited) >= self._size

    def random_unvisited(self) -> Configuration | None:
        for _ in range(RESAMPLE_TRIES):
            c = random_config(self.space, self.rng)
            if c not in self.visited:
                return c
        if self.exhausted:
            return None
        # only reachable when nearly every configuration has been visited, i.e. a small space
        rest = [c for c in grid(self.space) if c not in self.visited]
        return self.rng.choice(rest)


class RandomSearch(Strategy):
    name = "random"

    def next_config(self) -> Configuration | None:
        return self.random_unvisited()


class GridSearch(Strategy):
    name = "grid"

    def __init__(self, space: ConfigSpace, seed: int = 0) -> None:
        super().__init__(space, seed)
        self._cursor: Iterator[Configuration] = grid(space)

    def next_config(self) -> Configuration | None:
        for c in self._cursor:
            if c not in self.visited:
                return c
        return None


class HammingSearch(Strategy):
    """First-improvement local search over 1-neighborhoods with random restarts.

    Neighbors are taken around the incumbent (or ``start`` before any success). When that
    neighborhood is fully visited, a uniformly random unvisited configuration is proposed.
    """

    name = "hamming"

    def __init__(self, space: ConfigSpace, seed: int = 0, start: Configuration | None = None) -> None:
        super().__init__(space, seed)
        self.start = start if start is not None else space.default
        space.validate(self.start)
        self.restarts = 0

    @property
    def anchor(self) -> Configuration:
        return self.incumbent[0] if self.incumbent is not None else self.start

    def next_config(self) -> Configuration | None:
        if self.start not in self.visited and self.incumbent is None:
            return self.start
        for n in neighbors(self.space, self.anchor):
            if n not in self.visited:
                return n
        c = self.random_unvisited()
        if c is not None:
            self.restarts += 1
        return c


class BayesianOptimization(Strategy):
    """GP surrogate with a Hamming kernel; picks the candidate with the largest expected improvement.

    Failed trials enter the GP at a penalty: worst success plus one standard deviation of the
    successes (1.0 when fewer than two distinct successes), or 1.0 flat when nothing succeeded.
    """

    name = "bo"

    def __init__(
        self,
        space: ConfigSpace,
        seed: int = 0,
        n_init: int = 5,
        pool_random: int = 256,
        full_pool_limit: int = 1024,
        kernel: gp.KernelParams | None = None,
    ) -> None:
        super().__init__(space, seed)
        self.n_init = n_init
        self.pool_random = pool_random
        self.full_pool_limit = full_pool_limit
        self.kernel = kernel or gp.KernelParams.for_dimensions(len(space.dimensions))
        self.model: gp.GpModel | None = None

    def penalized_targets(self) -> list[float]:
        ok = [obj for _, obj, _ in self.trials if obj is not None]
        if ok:
            spread = float(np.std(ok)) if len(ok) > 1 else 0.0
            penalty = max(ok) + (spread if spread > 0 else 1.0)
        else:
            penalty = 1.0
        return [penalty if obj is None else obj for _, obj, _ in self.trials]

    def update_model(self, c: Configuration, objective: float | None, runtime_s: float) -> None:
        super().update_model(c, objective, runtime_s)
        self.model = gp.fit([t[0] for t in self.trials], self.penalized_targets(), self.kernel)

    def candidate_pool(self) -> list[Configuration]:
        pool: dict[Configuration, None] = {}
        if self.incumbent is not None:
            for n in neighbors(self.space, self.incumbent[0]):
                if n not in self.visited:
                    pool[n] = None
        for _ in range(self.pool_random):
            c = random_config(self.space, self.rng)
            if c not in self.visited:
                pool[c] = None
        if self._size <= self.full_pool_limit:
            for c in grid(self.space):
                if c not in self.visited:
                    pool[c] = None
        return list(pool)

    def next_config(self) -> Configuration | None:
        if self.exhausted:
            return None
        if len(self.trials) < self.n_init or self.model is None:
            if self.space.default not in self.visited:
                return self.space.default
            return self.random_unvisited()
        pool = self.candidate_pool()
        if not pool:
            return self.random_unvisited()
        mean, var = gp.predict(self.model, pool)
        best = self.incumbent[1] if self.incumbent is not None else float(min(self.penalized_targets()))
        ei = gp.expected_improvement(mean, var, best)
        return pool[int(np.argmax(ei))]


STRATEGIES = {
    "random": RandomSearch,
    "grid": GridSearch,
    "hamming": HammingSearch,
    "bo": BayesianOptimization,
}


def make_strategy(name: str, space: ConfigSpace, seed: int = 0, **options) -> Strategy:
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    return cls(space, seed, **options)
