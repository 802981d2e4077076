"""Subject manifests: CSV ingestion with CDR-based labeling.

Manifest format: UTF-8 CSV with header ``subject_id,domain,cdr,age``. The
cdr column is a decimal from {0, 0.5, 1, 2, 3} or empty; rows with a missing
or unparsable cdr are quarantined (kept, flagged, reported) rather than
silently dropped, so ingestion stays auditable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError

MANIFEST_HEADER = ["subject_id", "domain", "cdr", "age"]

#: Admissible clinical rating values.
VALID_CDR = (0.0, 0.5, 1.0, 2.0, 3.0)

LABEL_NORMAL = 0
LABEL_DEMENTED = 1


@dataclass(frozen=True)
class SubjectRecord:
    """One manifest row.

    ``cdr`` is None exactly when the record is quarantined; quarantined
    records never enter labeled splits.
    """

    subject_id: str
    domain: str
    cdr: float | None
    age: float | None = None
    quarantined: bool = False

    @property
    def label(self) -> int:
        """Binary label: 0 for cdr == 0 (normal), 1 for cdr > 0 (demented)."""
        if self.cdr is None:
            raise DataError(
                f"subject {self.subject_id!r} is quarantined (no cdr); it has no label"
            )
        return LABEL_NORMAL if self.cdr == 0 else LABEL_DEMENTED


def load_manifest(path) -> list[SubjectRecord]:
    """Parse a manifest CSV into SubjectRecords.

    Raises DataError on a missing file, malformed header, or duplicate
    subject_id. Rows with an empty/unparsable cdr are returned quarantined.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"manifest is empty: {path}") from None
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise DataError(
                f"malformed manifest header {header!r}; expected {MANIFEST_HEADER}"
            )
        records = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            subject_id, domain, cdr_raw, age_raw = (cell.strip() for cell in row)
            if not subject_id:
                raise DataError(f"{path}:{lineno}: empty subject_id")
            if subject_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate subject_id {subject_id!r}")
            seen.add(subject_id)

            cdr = None
            quarantined = True
            if cdr_raw:
                try:
                    value = float(cdr_raw)
                except ValueError:
                    value = None
                if value is not None and value in VALID_CDR:
                    cdr, quarantined = value, False
            age = None
            if age_raw:
                try:
                    age = float(age_raw)
                except ValueError:
                    age = None

            records.append(
                SubjectRecord(
                    subject_id=subject_id,
                    domain=domain,
                    cdr=cdr,
                    age=age,
                    quarantined=quarantined,
                )
            )
    return records


def write_manifest(path, records) -> None:
    """Write SubjectRecords back out in the documented CSV format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for rec in records:
            cdr = "" if rec.cdr is None else format(rec.cdr, "g")
            age = "" if rec.age is None else format(rec.age, "g")
            writer.writerow([rec.subject_id, rec.domain, cdr, age])


def admitted(records) -> list[SubjectRecord]:
    """Records eligible for labeled splits (non-quarantined)."""
    return [r for r in records if not r.quarantined]


def quarantine_count(records) -> int:
    return sum(1 for r in records if r.quarantined)
