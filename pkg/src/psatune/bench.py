"""Experiment matrices: (instance, variant, seed) cells run in parallel, appended to one results CSV."""

from __future__ import annotations

import csv
import glob
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .adapters import SolverStatus, SolverTask, SyntheticAdapter, load_adapter
from .engine import RESULT_FIELDS, result_row, run_psa
from .settings import PsaSettings
from .space import ConfigSpace, load_space

log = logging.getLogger(__name__)

BASELINE_VARIANT = "default"


class MatrixError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    name: str
    settings: PsaSettings


@dataclass
class ExperimentMatrix:
    instances: list[SolverTask]
    variants: list[Variant]
    space: ConfigSpace
    seeds: list[int] = field(default_factory=lambda: [0])
    parallelism: int = 1

    def __post_init__(self) -> None:
        if not self.instances:
            raise MatrixError("experiment matrix has no instances")
        if not self.variants:
            raise MatrixError("experiment matrix has no variants")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise MatrixError("variant names must be unique")
        ids = [t.instance_id for t in self.instances]
        if len(set(ids)) != len(ids):
            raise MatrixError("instance ids (file stems) must be unique")
        if self.parallelism < 1:
            raise MatrixError("parallelism must be >= 1")

    def cells(self) -> Iterable[tuple[SolverTask, Variant, int]]:
        for task in self.instances:
            for v in self.variants:
                for seed in self.seeds:
                    yield task, v, seed


def variant_name(strategy: str, s: PsaSettings) -> str:
    return f"{strategy}-{s.global_time_mode}-{s.timeout_init}-{s.evolution}-{s.stop_condition}"


def factorial_variants(strategy: str, base: PsaSettings | None = None) -> list[Variant]:
    """The 24-cell design: 18 static-init cells (2 global x 3 evolution x 3 stop) and
    6 first-runtime cells (2 global x static evolution x 3 stop).

    The four static-init cells that pair a first-solution stop with geometric or Luby evolution
    run with static evolution (the only permitted pattern for that stop); their names keep the
    requested pattern as a suffix so every cell stays distinct.
    """
    base = base or PsaSettings()
    out = []
    for mode in ("percent", "dynamic"):
        for evo in ("static", "geometric", "luby"):
            for stop in ("timeout", "first_solution", "stagnation"):
                run_evo = "static" if stop == "first_solution" else evo
                s = base.replace(
                    strategy=strategy, global_time_mode=mode, timeout_init="static", evolution=run_evo, stop_condition=stop
                )
                name = variant_name(strategy, s)
                if run_evo != evo:
                    name += f"-as_{evo}"
                out.append(Variant(name, s))
    for mode in ("percent", "dynamic"):
        for stop in ("timeout", "first_solution", "stagnation"):
            s = base.replace(
                strategy=strategy, global_time_mode=mode, timeout_init="first_runtime", evolution="static", stop_condition=stop
            )
            out.append(Variant(variant_name(strategy, s), s))
    return out


def baseline_variant(base: PsaSettings | None = None) -> Variant:
    """Default configuration for the whole budget: no probing."""
    base = base or PsaSettings()
    return Variant(BASELINE_VARIANT, base.replace(probing_ratio=0.0, timeout_init="static", stop_condition="timeout",
                                                  evolution="static"))


_COMPONENT_RE = re.compile(
    r"^[^-]+-(?P<global_time>percent|dynamic)-(?P<round_timeout>static|first_runtime)"
    r"-(?P<evolution>static|geometric|luby)-(?P<stop>timeout|first_solution|stagnation)(?:-.*)?$"
)


def variant_components(name: str) -> dict[str, str] | None:
    m = _COMPONENT_RE.match(name)
    return m.groupdict() if m else None


def load_matrix(path: str | Path) -> ExperimentMatrix:
    """Matrix file: JSON with space, adapter, instances (paths or globs), variants, seeds, parallelism."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MatrixError(f"cannot read matrix {path}: {exc}") from exc
    root = path.parent
    unknown = set(doc) - {"space", "adapter", "instances", "variants", "seeds", "parallelism", "objective_sense",
                          "factorial", "base_settings", "baseline"}
    if unknown:
        raise MatrixError(f"unknown keys in matrix: {sorted(unknown)}")
    space = load_space(_resolve(root, doc["space"]))
    adapter = load_adapter(_resolve(root, doc["adapter"]))
    sense = doc.get("objective_sense", "minimize")
    instances = [SolverTask(p, sense, adapter) for p in expand_instances(doc.get("instances", []), root)]
    base = PsaSettings.from_dict(doc.get("base_settings", {}))
    variants: list[Variant] = []
    if doc.get("factorial"):
        variants += factorial_variants(doc["factorial"], base)
    for v in doc.get("variants", []):
        variants.append(Variant(v["name"], PsaSettings.from_dict({**base.to_dict(), **v.get("settings", {})})))
    if doc.get("baseline"):
        variants.append(baseline_variant(base))
    return ExperimentMatrix(instances, variants, space, list(doc.get("seeds", [0])), int(doc.get("parallelism", 1)))


def _resolve(root: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else root / q


def expand_instances(patterns: Iterable[str], root: Path | None = None) -> list[Path]:
    out: list[Path] = []
    for pat in patterns:
        full = str(_resolve(root, pat)) if root is not None else pat
        hits = sorted(glob.glob(full))
        out.extend(Path(h) for h in hits)
    return out


def read_results(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_FIELDS:
            raise MatrixError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def run_cell(task: SolverTask, variant: Variant, seed: int, space: ConfigSpace, run_root: Path) -> dict[str, str]:
    settings = variant.settings.replace(seed=seed)
    cell_dir = run_root / "cells" / f"{task.instance_id}__{variant.name}__{seed}"
    try:
        result = run_psa(task, space, settings, run_dir=cell_dir, variant=variant.name)
    except Exception as exc:  # noqa: BLE001 - a failing cell must not stop the matrix
        log.error("cell %s/%s/%s failed: %s", task.instance_id, variant.name, seed, exc)
        return {
            "instance": task.instance_id,
            "variant": variant.name,
            "strategy": settings.strategy,
            "seed": str(seed),
            "status": SolverStatus.ERROR.value,
            "objective": "",
            "runtime_s": "0",
            "flags": "",
        }
    return result_row(result, instance=task.instance_id, variant=variant.name, settings=settings)


def run_matrix(matrix: ExperimentMatrix, run_root: str | Path) -> Path:
    """Run every missing cell; rows are appended by this thread only. Returns the results path."""
    run_root = Path(run_root)
    run_root.mkdir(parents=True, exist_ok=True)
    results = run_root / "results.csv"
    done: set[tuple[str, str, str]] = set()
    if results.exists() and results.stat().st_size > 0:
        done = {(r["instance"], r["variant"], r["seed"]) for r in read_results(results)}
    else:
        with open(results, "w", newline="") as fh:
            csv.writer(fh).writerow(RESULT_FIELDS)
    todo = [(t, v, s) for t, v, s in matrix.cells() if (t.instance_id, v.name, str(s)) not in done]
    log.info("%d cells to run, %d already done", len(todo), len(done))
    with ThreadPoolExecutor(max_workers=matrix.parallelism) as pool, open(results, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        futures = [pool.submit(run_cell, t, v, s, matrix.space, run_root) for t, v, s in todo]
        for fut in as_completed(futures):
            writer.writerow(fut.result())
            fh.flush()
    return results


def describe_matrix(matrix: ExperimentMatrix) -> Mapping[str, Any]:
    return {
        "instances": [str(t.instance_path) for t in matrix.instances],
        "variants": {v.name: v.settings.to_dict() for v in matrix.variants},
        "seeds": matrix.seeds,
        "parallelism": matrix.parallelism,
        "adapter": "synthetic" if isinstance(matrix.instances[0].adapter, SyntheticAdapter) else "command",
    }

