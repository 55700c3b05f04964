"""Manifest and CSV loading with schema checks."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import EmptyInput, MissingColumn


def load_manifest(path: str | Path) -> tuple[dict, Path]:
    """Parse manifest.json; returns (manifest, directory of the run)."""
    p = Path(path)
    if not p.is_file():
        raise EmptyInput(f"manifest not found: {p}")
    try:
        manifest = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise EmptyInput(f"manifest is not valid JSON: {exc}") from exc
    return manifest, p.parent


def load_csv(run_dir: Path, name: str, columns: tuple[str, ...],
             required: bool = True) -> list[dict] | None:
    """Rows of run_dir/name as dicts, validated against the needed columns.

    Returns None for an absent optional file; raises EmptyInput for an
    absent or row-less required file and MissingColumn when the header
    lacks a needed column.
    """
    p = run_dir / name
    if not p.is_file():
        if required:
            raise EmptyInput(f"required file missing from run: {name}")
        return None
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise MissingColumn(f"{name}: missing column {col!r} "
                                    f"(header: {','.join(header)})")
        rows = list(reader)
    if not rows:
        raise EmptyInput(f"{name}: no data rows")
    return rows


def column(rows: list[dict], name: str, as_float: bool = True) -> list:
    vals = [r[name] for r in rows]
    return [float(v) for v in vals] if as_float else vals
