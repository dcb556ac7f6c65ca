"""
Reading count tables and sample sheets; writing and re-reading result tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .model import CountMatrix

__all__ = [
    "load_counts",
    "load_conditions",
    "load_size_factors",
    "load_dispersion_table",
    "TotalsSummary",
    "summarize_totals",
    "format_float",
    "write_table",
    "read_results",
]


def _delimiter(path) -> str:
    return "," if Path(path).suffix.lower() == ".csv" else "\t"


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=_delimiter(path)) if row and any(c.strip() for c in row)]
    return rows


def _parse_count(cell: str, gene: str, sample: str) -> int:
    text = cell.strip()
    try:
        value = int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise ParseError(f"non-numeric count {cell!r} for gene {gene!r}, sample {sample!r}") from None
        if not math.isfinite(f) or not f.is_integer():
            raise ParseError(f"fractional count {cell!r} for gene {gene!r}, sample {sample!r}") from None
        value = int(f)
    if value < 0:
        raise ParseError(f"negative count {cell!r} for gene {gene!r}, sample {sample!r}")
    return value


def load_counts(path) -> CountMatrix:
    """Parse a genes x samples table (TSV, or CSV by extension).

    The header row names the samples after a leading gene-id column; every
    following row is a gene id followed by one nonnegative integer per sample.
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty counts file")
    samples = [s.strip() for s in rows[0][1:]]
    if not samples:
        raise ParseError(f"{path}: header names no samples")
    genes, data = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        gene = row[0].strip()
        if len(row) != len(samples) + 1:
            raise ParseError(f"{path}:{lineno}: gene {gene!r} has {len(row) - 1} values, expected {len(samples)}")
        genes.append(gene)
        data.append([_parse_count(c, gene, s) for c, s in zip(row[1:], samples)])
    counts = np.array(data, dtype=np.int64).reshape(len(genes), len(samples))
    try:
        return CountMatrix(tuple(genes), tuple(samples), counts)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _two_column(path, what: str) -> dict[str, str]:
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty {what} file")
    out: dict[str, str] = {}
    for lineno, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise ParseError(f"{path}:{lineno}: expected two columns")
        key, val = row[0].strip(), row[1].strip()
        if lineno == 1 and key.lower() in ("sample", "sample_id", "samples"):
            continue
        if key in out:
            raise ValidationError(f"{path}:{lineno}: duplicate sample {key!r}")
        out[key] = val
    return out


def load_conditions(path) -> dict[str, str]:
    """Sample id -> condition label, in file order (which fixes condition order)."""
    return _two_column(path, "conditions")


def load_size_factors(path) -> dict[str, float]:
    raw = _two_column(path, "size-factor")
    try:
        return {k: float(v) for k, v in raw.items()}
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_dispersion_table(path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Two numeric columns q, nu(q); an optional non-numeric header is skipped."""
    rows = _read_rows(path)
    q, nu = [], []
    for lineno, row in enumerate(rows, start=1):
        try:
            q.append(float(row[0]))
            nu.append(float(row[1]))
        except (ValueError, IndexError):
            if lineno == 1:
                continue
            raise ParseError(f"{path}:{lineno}: expected two numbers") from None
    return tuple(q), tuple(nu)


@dataclass(frozen=True)
class TotalsSummary:
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.min, self.q1, self.median, self.mean, self.q3, self.max)


def summarize_totals(counts) -> TotalsSummary:
    """Six-number summary of per-gene total counts.

    Quartiles use linear interpolation between order statistics
    (x[(n-1)p], the default of numpy and R). The mean is computed from the
    exact integer sum.
    """
    totals = counts.totals() if isinstance(counts, CountMatrix) else np.asarray(counts, dtype=np.int64)
    if totals.size == 0:
        raise ValidationError("no genes to summarise")
    q1, med, q3 = np.quantile(totals, [0.25, 0.5, 0.75], method="linear")
    mean = int(sum(int(t) for t in totals)) / totals.size
    return TotalsSummary(float(totals.min()), float(q1), float(med), mean, float(q3), float(totals.max()))


def format_float(x, digits: int = 17) -> str:
    """Full-precision decimal; NaN/None become an empty cell."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.{digits}g}"


def write_table(path, columns, rows) -> None:
    """Write dict rows as TSV with the given column order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row.get(c, "") for c in columns])


_INT_COLUMNS = ("k_total",)
_BOOL_COLUMNS = ("significant", "p_floored")
_STR_COLUMNS = ("gene", "method", "error")


def read_results(path) -> list[dict]:
    """Read a results TSV back into typed dicts (blank numeric cells -> NaN)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        out = []
        for row in reader:
            typed = {}
            for key, val in row.items():
                if key in _STR_COLUMNS:
                    typed[key] = val
                elif key in _BOOL_COLUMNS:
                    typed[key] = val == "true"
                elif key in _INT_COLUMNS or key.startswith("k_"):
                    typed[key] = int(val)
                else:
                    typed[key] = float(val) if val != "" else float("nan")
            out.append(typed)
    return out
