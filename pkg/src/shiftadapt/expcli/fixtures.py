"""Recorded reference matrices for grid-selection replay.

Validation accuracies of the four classifier families over the standard
learning-rate x epoch-budget grid, recorded from the reference tuning
runs. Used by the tune pipeline's fixture mode to exercise selection and
report emission without retraining, and by tests as frozen expectations.
"""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import DataError

TUNING_LRS = (2e-4, 2e-5)
TUNING_EPOCHS = (10, 20, 50, 100)

REFERENCE_TUNING_GRID = {
    "residual18": {
        2e-4: {10: 0.75102, 20: 0.76745, 50: 0.78775, 100: 0.81632},
        2e-5: {10: 0.70612, 20: 0.7102, 50: 0.72244, 100: 0.71836},
    },
    "compound_b3": {
        2e-4: {10: 0.67755, 20: 0.7551, 50: 0.75918, 100: 0.77551},
        2e-5: {10: 0.70659, 20: 0.70204, 50: 0.72653, 100: 0.7551},
    },
    "grouped_residual50": {
        2e-4: {10: 0.77142, 20: 0.83265, 50: 0.85306, 100: 0.84489},
        2e-5: {10: 0.72653, 20: 0.70612, 50: 0.7102, 100: 0.70612},
    },
    "residual18_3d": {
        2e-4: {10: 0.6122, 20: 0.53061, 50: 0.66938, 100: 0.59591},
        2e-5: {10: 0.70612, 20: 0.70804, 50: 0.68979, 100: 0.6853},
    },
}

#: Expected selection over the reference grid.
REFERENCE_BEST = ("grouped_residual50", 2e-4, 50, 0.85306)

#: Reference adaptation accuracies by epoch budget (critic lr 1e-5,
#: target lr 1e-6), recorded alongside the tuning grid.
REFERENCE_ADAPTATION_CURVE = {10: 0.75, 20: 0.80125, 30: 0.78874, 50: 0.775, 100: 0.76625}


def load_fixture_grid(path) -> dict:
    """Read a fixture matrix from CSV (family,lr,epochs,accuracy rows)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"fixture grid not found: {path}")
    out: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"family", "lr", "epochs", "accuracy"}
        if set(reader.fieldnames or []) != expected:
            raise DataError(
                f"{path}: fixture header must be {sorted(expected)}, got {reader.fieldnames}"
            )
        for row in reader:
            fam = row["family"].strip()
            out.setdefault(fam, {}).setdefault(float(row["lr"]), {})[int(row["epochs"])] = float(
                row["accuracy"]
            )
    if not out:
        raise DataError(f"{path}: fixture grid is empty")
    return out


def fixture_grid(name_or_path: str) -> tuple[dict, list, list]:
    """Resolve a fixture spec: the literal ``reference`` or a CSV path.

    Returns (matrix, lrs, epoch budgets) with axes in recorded order.
    """
    if name_or_path == "reference":
        return REFERENCE_TUNING_GRID, list(TUNING_LRS), list(TUNING_EPOCHS)
    matrix = load_fixture_grid(name_or_path)
    lrs = sorted({lr for fam in matrix.values() for lr in fam}, reverse=True)
    epochs = sorted({ep for fam in matrix.values() for cells in fam.values() for ep in cells})
    return matrix, lrs, epochs
