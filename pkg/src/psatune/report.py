"""Win/tie/loss comparisons between two result sets and component win frequencies across variants.

All comparisons use canonical objectives (smaller is better). An instance is a tie when both
objectives are exactly equal or neither side found a solution; a side that has a solution
beats a side that has none.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .bench import variant_components

COMPONENTS = ("global_time", "round_timeout", "evolution", "stop")
COMPONENT_TITLES = {
    "global_time": "Global Time",
    "round_timeout": "Round Timeout",
    "evolution": "Timeout Evolution",
    "stop": "Stop Condition",
}

Row = Mapping[str, str]


class ReportError(ValueError):
    pass


def objective_of(row: Row) -> float | None:
    text = row.get("objective", "")
    return float(text) if text not in ("", None) else None


def verdict(a: float | None, b: float | None) -> str:
    """'A', 'B' or 'tie' for one instance."""
    if a is None and b is None:
        return "tie"
    if b is None:
        return "A"
    if a is None:
        return "B"
    if a < b:
        return "A"
    if b < a:
        return "B"
    return "tie"


@dataclass
class ComparisonReport:
    label_a: str
    label_b: str
    wins_a: int
    ties: int
    wins_b: int
    verdicts: dict[str, str]
    only_a: list[str] = field(default_factory=list)
    only_b: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.wins_a + self.ties + self.wins_b

    def percentages(self) -> tuple[float, float, float]:
        return tuple(100.0 * k / self.n for k in (self.wins_a, self.ties, self.wins_b))  # type: ignore[return-value]

    def rows(self) -> list[dict[str, str]]:
        pa, pt, pb = self.percentages()
        return [{
            "comparison": f"{self.label_a} vs {self.label_b}",
            "winner_a_pct": f"{pa:.1f}",
            "tie_pct": f"{pt:.1f}",
            "winner_b_pct": f"{pb:.1f}",
            "instances": str(self.n),
        }]

    def text(self) -> str:
        pa, pt, pb = self.percentages()
        title = f"{self.label_a} vs {self.label_b}"
        width = max(len("Comparison"), len(title))
        lines = [
            "Ties: equal canonical objectives, or no solution on either side.",
            f"{'Comparison':<{width}}  {'Winner A':>8}  {'Tie':>6}  {'Winner B':>8}",
            f"{title:<{width}}  {pa:>7.1f}%  {pt:>5.1f}%  {pb:>7.1f}%",
            f"({self.wins_a}/{self.ties}/{self.wins_b} of {self.n} instances)",
        ]
        if self.only_a or self.only_b:
            lines.append(f"unmatched instances: {len(self.only_a)} only in A, {len(self.only_b)} only in B")
        return "\n".join(lines)


def _by_instance(rows: Iterable[Row], side: str) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for r in rows:
        key = r["instance"]
        if key in out:
            raise ReportError(f"side {side}: several rows for instance {key!r}; filter by variant and seed first")
        out[key] = objective_of(r)
    return out


def pairwise_compare(
    rows_a: Iterable[Row],
    rows_b: Iterable[Row],
    *,
    label_a: str = "A",
    label_b: str = "B",
    tie_rule: Callable[[float | None, float | None], str] = verdict,
) -> ComparisonReport:
    a = _by_instance(rows_a, "A")
    b = _by_instance(rows_b, "B")
    joined = sorted(set(a) & set(b))
    if not joined:
        raise ReportError("the two result sets share no instances")
    verdicts = {i: tie_rule(a[i], b[i]) for i in joined}
    counts = {k: sum(v == k for v in verdicts.values()) for k in ("A", "tie", "B")}
    return ComparisonReport(
        label_a, label_b, counts["A"], counts["tie"], counts["B"], verdicts,
        sorted(set(a) - set(b)), sorted(set(b) - set(a)),
    )


@dataclass
class FrequencyTable:
    shares: dict[str, dict[str, float]]  # component -> value -> percent
    instances: int

    def rows(self) -> list[dict[str, str]]:
        return [
            {"component": comp, "strategy": value, "share_pct": f"{pct:.2f}"}
            for comp, values in self.shares.items()
            for value, pct in values.items()
        ]

    def text(self) -> str:
        lines = [f"{'Component':<18}  {'Strategy':<15}  {'Wins':>7}"]
        for comp, values in self.shares.items():
            title = COMPONENT_TITLES.get(comp, comp)
            for value, pct in values.items():
                lines.append(f"{title:<18}  {value:<15}  {pct:>6.2f}%")
                title = ""
        lines.append(f"({self.instances} instances with at least one solution; tied winners share credit)")
        return "\n".join(lines)


def strategy_frequency(
    rows: Sequence[Row],
    components: Mapping[str, Mapping[str, str]] | None = None,
) -> FrequencyTable:
    """Per instance, credit the winning variant(s) 1/t each, then aggregate by component value.

    ``components`` maps variant name to its component values; by default they are parsed from
    factorial variant names. Variants without components (such as the default baseline) are
    left out. Instances where no variant found a solution have no winner.
    """
    table: dict[str, Mapping[str, str]] = {}
    for name in {r["variant"] for r in rows}:
        parsed = components.get(name) if components is not None else variant_components(name)
        if parsed is not None:
            table[name] = parsed
    if len(table) < 2:
        raise ReportError("component frequencies need results for at least two factorial variants")
    rows = [r for r in rows if r["variant"] in table]

    per_instance: dict[str, dict[str, float | None]] = defaultdict(dict)
    for r in rows:
        obj = objective_of(r)
        prev = per_instance[r["instance"]].get(r["variant"])
        if r["variant"] in per_instance[r["instance"]] and prev is not None and (obj is None or prev <= obj):
            continue  # several seeds: keep the best
        per_instance[r["instance"]][r["variant"]] = obj

    credit: dict[str, dict[str, float]] = {c: defaultdict(float) for c in COMPONENTS}
    for parsed in table.values():
        for comp, value in parsed.items():
            if comp in credit:
                credit[comp][value] += 0.0
    decided = 0
    for inst in sorted(per_instance):
        solved = {v: o for v, o in per_instance[inst].items() if o is not None}
        if not solved:
            continue
        best = min(solved.values())
        winners = sorted(v for v, o in solved.items() if o == best)
        decided += 1
        for v in winners:
            for comp, value in table[v].items():
                if comp in credit:
                    credit[comp][value] += 1.0 / len(winners)
    if decided == 0:
        raise ReportError("no instance has a solution in any variant")
    shares = {
        comp: {value: 100.0 * c / decided for value, c in sorted(values.items())}
        for comp, values in credit.items()
    }
    return FrequencyTable(shares, decided)
