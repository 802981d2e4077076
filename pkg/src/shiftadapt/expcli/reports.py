"""Report emission: loss curves (CSV + rendered plot), metric tables
(aligned text + CSV), and the tuning-grid table.

Every number emitted here is read from the persisted record; no metric is
recomputed or derived at formatting time.
"""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ConfigError
from ..metrics import METRIC_KEYS

FORMATS = ("csv", "text", "plot", "all")


def write_loss_curve_csv(curve, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, value in enumerate(curve, start=1):
            writer.writerow([i, repr(float(value))])


def render_loss_curve(curves: dict, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in curves.items():
        ax.plot(range(1, len(curve) + 1), curve, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def metrics_table_text(metric_blocks: dict) -> str:
    """Aligned text table: one column per report, one row per metric."""
    names = list(metric_blocks)
    rows = []
    for key in METRIC_KEYS:
        if any(key in metric_blocks[n]["metrics"] or key in metric_blocks[n]["undefined"]
               for n in names):
            row = [key]
            for n in names:
                block = metric_blocks[n]
                if key in block["metrics"]:
                    row.append(f"{block['metrics'][key]:.5f}")
                elif key in block["undefined"]:
                    row.append("undefined")
                else:
                    row.append("-")
            rows.append(row)
    header = ["metric"] + names
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_metrics_csv(metric_blocks: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["report", "metric", "value"])
        for name, block in metric_blocks.items():
            for key in METRIC_KEYS:
                if key in block["metrics"]:
                    writer.writerow([name, key, repr(block["metrics"][key])])
                elif key in block["undefined"]:
                    writer.writerow([name, key, "undefined"])


def write_grid_csv(grid: dict, path: Path) -> None:
    """Grid table with one section per family: rows = lr, columns = epochs."""
    path.parent.mkdir(parents=True, exist_ok=True)
    budgets = grid["epoch_budgets"]
    cells = {
        (c["family"], c["lr"], c["epochs"]): c["accuracy"] for c in grid["cells"]
    }
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "lr"] + [f"epochs={b}" for b in budgets])
        for family in grid["spec_labels"]:
            for lr in grid["lrs"]:
                row = [family, format(lr, "g")]
                for b in budgets:
                    value = cells.get((family, lr, b))
                    row.append("" if value is None else repr(value))
                writer.writerow(row)
        best = grid["best"]
        writer.writerow([])
        writer.writerow(
            ["best", best["family"], f"lr={best['lr']:g}",
             f"epochs={best['epochs']}", f"accuracy={best['accuracy']!r}"]
        )


def emit_report(record, fmt: str, out_dir) -> dict:
    """Emit the record's tables and curves; returns artifact name -> path."""
    if fmt not in FORMATS:
        raise ConfigError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    out_dir = Path(out_dir)
    emitted = {}

    curves = record.extra.get("curves") or {}
    loss_curve = curves.get("loss_curve")
    if loss_curve:
        if fmt in ("csv", "all"):
            path = out_dir / "loss_curve.csv"
            write_loss_curve_csv(loss_curve, path)
            emitted["loss_curve_csv"] = path.name
        if fmt in ("plot", "all"):
            path = out_dir / "loss_curve.png"
            render_loss_curve(
                {k: v for k, v in curves.items() if v},
                path,
                f"{record.pipeline} training loss",
            )
            emitted["loss_curve_png"] = path.name

    if record.metrics:
        if fmt in ("text", "all"):
            path = out_dir / "metrics_table.txt"
            path.write_text(metrics_table_text(record.metrics), encoding="utf-8")
            emitted["metrics_table_txt"] = path.name
        if fmt in ("csv", "all"):
            path = out_dir / "metrics_table.csv"
            write_metrics_csv(record.metrics, path)
            emitted["metrics_table_csv"] = path.name

    if "grid" in record.extra and fmt in ("csv", "all"):
        path = out_dir / "grid.csv"
        write_grid_csv(record.extra["grid"], path)
        emitted["grid_csv"] = path.name
    return emitted
