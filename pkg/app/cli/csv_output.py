"""
Deterministic CSV and summary writers.

Floats use Python's shortest round-trip repr, which switches to scientific
notation below 1e-4, so identical runs produce byte-identical files.
"""

import csv
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from app.core.logging import get_logger

logger = get_logger("cli.csv_output")


def format_value(value) -> str:
    """Deterministic text for one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        raise TypeError("split complex values into real and imaginary columns")
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a header and rows, creating the directory if needed."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def write_summary(path: Path, lines: List[str]) -> Path:
    """Write the summary lines to a text file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
