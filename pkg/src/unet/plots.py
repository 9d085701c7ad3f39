"""Optional static plots from a metrics CSV. CSV is the contract; this is
post-processing sugar and needs matplotlib (install extra: unet[plots])."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Union


def plot_metrics_csv(csv_path: Union[str, Path], out_dir: Union[str, Path]) -> list[Path]:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise RuntimeError("plotting needs matplotlib; pip install 'unet[plots]'") from exc

    series: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    units: dict[str, str] = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["metric"], row["labels"])
            series[key].append((float(row["time_ms"]), float(row["value"])))
            units[row["metric"]] = row["unit"]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    by_metric: dict[str, list[tuple[str, list]]] = defaultdict(list)
    for (metric, labels), points in sorted(series.items()):
        by_metric[metric].append((labels, points))
    for metric, groups in by_metric.items():
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for labels, points in groups:
            points.sort()
            xs = [p[0] / 1000.0 for p in points]
            ys = [p[1] for p in points]
            if len(points) > 1:
                ax.plot(xs, ys, label=labels or metric, linewidth=1.2)
            else:
                ax.scatter(xs, ys, label=labels or metric)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(f"{metric} [{units.get(metric, '')}]")
        ax.grid(True, alpha=0.3)
        if len(groups) <= 12:
            ax.legend(fontsize=7)
        path = out / f"{metric.lower()}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
