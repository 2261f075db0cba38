"""Descriptive statistics and experiment reports.

Length distributions over intonation units (word counts or durations),
filter-sweep grids with deltas against the unfiltered baseline, and
method-comparison tables with fixed-precision rendering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .chat import IntonationUnit, TimeInterval
from .dsp import FilterSpec
from .errors import DataError
from .evaluate import EvalReport

DURATION_BIN_MS = 100


@dataclass
class Histogram:
    edges: list[float]  # len(counts) + 1, strictly increasing
    counts: list[int]
    total: int
    unit: str  # words | duration

    def as_long_rows(self, series: str) -> list[tuple[str, float, int]]:
        """Plot-ready (series, x, y) rows; x is the bin's left edge."""
        return [(series, self.edges[i], self.counts[i]) for i in range(len(self.counts))]


def _word_count(item) -> int:
    if isinstance(item, IntonationUnit):
        return len(item.tokens)
    if isinstance(item, int):
        return item
    return len(item)  # a word sequence


def _duration_ms(item) -> int:
    if isinstance(item, IntonationUnit):
        if item.interval is None:
            raise DataError("unit without interval has no duration")
        return item.interval.duration_ms
    if isinstance(item, TimeInterval):
        return item.duration_ms
    return int(item)


def iu_length_histogram(items: Iterable, unit: str = "words") -> Histogram:
    """Histogram of IU lengths: integer bins for word counts, 100 ms bins
    for durations. Accepts IntonationUnits, word sequences, or raw numbers."""
    if unit == "words":
        values = [_word_count(x) for x in items]
        width = 1
    elif unit == "duration":
        values = [_duration_ms(x) for x in items]
        width = DURATION_BIN_MS
    else:
        raise DataError(f"histogram unit must be words or duration, got {unit!r}")
    if not values:
        return Histogram(edges=[], counts=[], total=0, unit=unit)
    lo = min(values) // width
    hi = max(values) // width
    counts = [0] * (hi - lo + 1)
    for v in values:
        counts[v // width - lo] += 1
    edges = [float(b * width) for b in range(lo, hi + 2)]
    return Histogram(edges=edges, counts=counts, total=len(values), unit=unit)


def total_variation_distance(a: Histogram, b: Histogram) -> float:
    """0.5 * sum |p - q| over the union of bins; 0 = identical shapes."""
    if a.total == 0 or b.total == 0:
        return 0.0 if a.total == b.total else 1.0
    pa = {a.edges[i]: a.counts[i] / a.total for i in range(len(a.counts))}
    pb = {b.edges[i]: b.counts[i] / b.total for i in range(len(b.counts))}
    keys = set(pa) | set(pb)
    return 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in keys)


@dataclass
class SweepCell:
    f1: float | None
    accuracy: float | None
    f1_delta: float | None
    accuracy_delta: float | None

    @property
    def absent(self) -> bool:
        return self.f1 is None


@dataclass
class SweepGrid:
    baseline_f1: float
    baseline_accuracy: float | None
    cells: dict[str, SweepCell]  # keyed by FilterSpec.label

    def csv_rows(self) -> list[list[str]]:
        rows = [["filter", "f1", "accuracy", "f1_delta", "accuracy_delta"]]
        rows.append(
            ["baseline", f"{self.baseline_f1:.4f}", _fmt(self.baseline_accuracy, 4), "", ""]
        )
        for label in sorted(self.cells):
            c = self.cells[label]
            if c.absent:
                rows.append([label, "absent", "absent", "absent", "absent"])
            else:
                rows.append(
                    [
                        label,
                        f"{c.f1:.4f}",
                        _fmt(c.accuracy, 4),
                        f"{c.f1_delta:+.4f}",
                        _fmt(c.accuracy_delta, 4, "+"),
                    ]
                )
        return rows


def _fmt(value: float | None, places: int, sign: str = "") -> str:
    if value is None:
        return ""
    return f"{value:{sign}.{places}f}"


def sweep_report(
    reports: Mapping[str, EvalReport],
    specs: Sequence[FilterSpec],
    baseline_key: str = "baseline",
) -> SweepGrid:
    """Grid of per-filter metrics with deltas vs the unfiltered baseline.

    `reports` maps FilterSpec labels (plus the baseline key) to eval
    reports; a spec without a report is marked absent, never zero.
    """
    if baseline_key not in reports:
        raise DataError(f"missing baseline report ({baseline_key!r})")
    base = reports[baseline_key]
    cells: dict[str, SweepCell] = {}
    for spec in specs:
        rep = reports.get(spec.label)
        if rep is None:
            cells[spec.label] = SweepCell(None, None, None, None)
            continue
        acc_delta = None
        if rep.accuracy is not None and base.accuracy is not None:
            acc_delta = rep.accuracy - base.accuracy
        cells[spec.label] = SweepCell(
            f1=rep.f1,
            accuracy=rep.accuracy,
            f1_delta=rep.f1 - base.f1,
            accuracy_delta=acc_delta,
        )
    return SweepGrid(baseline_f1=base.f1, baseline_accuracy=base.accuracy, cells=cells)


def comparison_table(named_reports: Mapping[str, EvalReport]) -> str:
    """Fixed-precision method table, best F1 first (ties: accuracy, name)."""
    rows = []
    for name, rep in named_reports.items():
        acc = rep.accuracy if rep.accuracy is not None else float("nan")
        rows.append((name, rep.f1, acc))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    name_width = max([len("method")] + [len(r[0]) for r in rows])
    lines = [f"{'method':<{name_width}}  {'F1':>5}  {'accuracy':>8}"]
    for name, f1, acc in rows:
        acc_text = f"{acc:.2f}" if acc == acc else "-"
        lines.append(f"{name:<{name_width}}  {f1:>5.2f}  {acc_text:>8}")
    return "\n".join(lines) + "\n"


def comparison_csv_rows(named_reports: Mapping[str, EvalReport]) -> list[list[str]]:
    rows = []
    for name, rep in named_reports.items():
        acc = rep.accuracy if rep.accuracy is not None else float("nan")
        rows.append((name, rep.f1, acc))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    out = [["method", "f1", "accuracy"]]
    for name, f1, acc in rows:
        out.append([name, f"{f1:.2f}", f"{acc:.2f}" if acc == acc else ""])
    return out
