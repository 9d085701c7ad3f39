"""Measurement records and deterministic CSV output."""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

HANDOVER_DELAY = "HANDOVER_DELAY"
PDD = "PDD"
THROUGHPUT = "THROUGHPUT"
PLP = "PLP"
PROC_DELAY = "PROC_DELAY"
TASK_EXEC = "TASK_EXEC"
CTRL_BYTES = "CTRL_BYTES"
DATA_BYTES = "DATA_BYTES"
FRAME_LOSS = "FRAME_LOSS"
BW_UTIL = "BW_UTIL"

UNITS = {
    HANDOVER_DELAY: "ms",
    PDD: "ms",
    THROUGHPUT: "mbps",
    PLP: "probability",
    PROC_DELAY: "us",
    TASK_EXEC: "ms",
    CTRL_BYTES: "bytes",
    DATA_BYTES: "bytes",
    FRAME_LOSS: "percent",
    BW_UTIL: "mbps",
}


@dataclass(frozen=True)
class MetricsRecord:
    time_ms: float
    metric: str
    value: float
    unit: str
    labels: tuple[tuple[str, str], ...] = ()

    def label(self, key: str) -> Optional[str]:
        for k, v in self.labels:
            if k == key:
                return v
        return None


class MetricsLog:
    """Append-only measurement log; CSV bytes are reproducible."""

    def __init__(self) -> None:
        self.rows: list[MetricsRecord] = []

    def add(self, time_ms: float, metric: str, value: float, **labels: str) -> None:
        unit = UNITS.get(metric, "")
        pairs = tuple(sorted(labels.items()))
        self.rows.append(MetricsRecord(time_ms, metric, float(value), unit, pairs))

    def extend(self, other: "MetricsLog") -> None:
        self.rows.extend(other.rows)

    def select(self, metric: str, **labels: str) -> list[MetricsRecord]:
        out = []
        for row in self.rows:
            if row.metric != metric:
                continue
            if all(row.label(k) == v for k, v in labels.items()):
                out.append(row)
        return out

    def values(self, metric: str, **labels: str) -> list[float]:
        return [r.value for r in self.select(metric, **labels)]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time_ms", "metric", "value", "unit", "labels"])
        for row in self.rows:
            label_text = ";".join(f"{k}={v}" for k, v in row.labels)
            writer.writerow([repr(row.time_ms), row.metric, repr(row.value), row.unit, label_text])
        return buf.getvalue()

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


@dataclass(frozen=True)
class MeanCI:
    mean: float
    ci95: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.ci95

    @property
    def high(self) -> float:
        return self.mean + self.ci95

    def __str__(self) -> str:
        return f"{self.mean:.3f} +/- {self.ci95:.3f} (n={self.n})"


def mean_ci(values: Iterable[float]) -> MeanCI:
    """Mean with a 95% confidence half-width (1.96 * s / sqrt(n))."""
    data = list(values)
    n = len(data)
    if n == 0:
        return MeanCI(math.nan, math.nan, 0)
    mean = statistics.fmean(data)
    if n == 1:
        return MeanCI(mean, math.nan, 1)
    half = 1.96 * statistics.stdev(data) / math.sqrt(n)
    return MeanCI(mean, half, n)


def gaps_significant(a: MeanCI, b: MeanCI) -> bool:
    """True when the 95% intervals of a (lower) and b (higher) do not overlap."""
    return a.high < b.low
