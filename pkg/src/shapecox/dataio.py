"""CSV ingestion for the command-line tools.

The expected layout is a header row followed by one subject per line:
``time`` (positive decimal), ``event`` (0/1), then covariate columns.
Rows missing a value in any used column are dropped and counted; malformed
numbers are reported with their line number.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .survival import SurvivalDataset

MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class CsvFormatError(ValueError):
    """Input CSV does not satisfy the documented layout."""


@dataclass
class LoadedSurvivalData:
    dataset: SurvivalDataset
    n_dropped_missing: int
    n_rows: int


def _is_missing(token):
    return token.strip().lower() in MISSING_TOKENS


def _parse_number(token, line_number, column):
    try:
        return float(token)
    except ValueError:
        raise CsvFormatError(
            f"line {line_number}: column {column!r} has non-numeric value {token!r}"
        ) from None


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("CSV file is empty") from None
        header = [h.strip() for h in header]
        rows = [(i, row) for i, row in enumerate(reader, start=2) if row and any(c.strip() for c in row)]
    return header, rows


def load_survival_csv(path, covariate_names):
    """Read a survival CSV, keeping only the named covariate columns.

    Returns the dataset plus the count of rows dropped for missing values.
    """
    header, rows = _read_rows(path)
    for required in ("time", "event"):
        if required not in header:
            raise CsvFormatError(f"CSV is missing the required column {required!r}")
    for name in covariate_names:
        if name not in header:
            raise CsvFormatError(f"CSV has no column named {name!r}")
    used = ["time", "event", *covariate_names]
    positions = {name: header.index(name) for name in used}

    times, events, rows_out = [], [], []
    dropped = 0
    for line_number, row in rows:
        if len(row) < len(header):
            raise CsvFormatError(
                f"line {line_number}: expected {len(header)} fields, found {len(row)}"
            )
        cells = {name: row[positions[name]] for name in used}
        if any(_is_missing(cells[name]) for name in used):
            dropped += 1
            continue
        time = _parse_number(cells["time"], line_number, "time")
        if time <= 0:
            raise CsvFormatError(f"line {line_number}: time must be positive, got {time!r}")
        event = cells["event"].strip()
        if event not in ("0", "1"):
            raise CsvFormatError(f"line {line_number}: event must be 0 or 1, got {event!r}")
        times.append(time)
        events.append(event == "1")
        rows_out.append([_parse_number(cells[n], line_number, n) for n in covariate_names])

    if not times:
        raise CsvFormatError("no usable data rows in CSV")
    dataset = SurvivalDataset(
        np.asarray(times), np.asarray(events), np.asarray(rows_out),
        names=tuple(covariate_names),
    )
    return LoadedSurvivalData(dataset=dataset, n_dropped_missing=dropped, n_rows=len(rows))


def load_covariate_csv(path, covariate_names):
    """Read covariate rows for prediction; time/event columns are optional."""
    header, rows = _read_rows(path)
    for name in covariate_names:
        if name not in header:
            raise CsvFormatError(f"CSV has no column named {name!r}")
    positions = {name: header.index(name) for name in covariate_names}
    out = []
    dropped = 0
    for line_number, row in rows:
        if len(row) < len(header):
            raise CsvFormatError(
                f"line {line_number}: expected {len(header)} fields, found {len(row)}"
            )
        cells = [row[positions[n]] for n in covariate_names]
        if any(_is_missing(c) for c in cells):
            dropped += 1
            continue
        out.append([
            _parse_number(c, line_number, n) for c, n in zip(cells, covariate_names)
        ])
    if not out:
        raise CsvFormatError("no usable data rows in CSV")
    return np.asarray(out), dropped
