"""Per-point error tables, CSV output and log10 histograms."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ErrorTable",
    "ERROR_COLUMNS",
    "TIMING_COLUMNS",
    "format_real",
    "emit_csv",
    "read_csv",
    "write_rows",
    "log10_histogram",
]

ERROR_COLUMNS = ("e_u", "e_u_ref", "e_u_lf")
TIMING_COLUMNS = ("t_online", "t_lf", "t_hf", "t_ref")


def format_real(x):
    """Shortest-safe decimal: 17 significant digits round-trip any f64."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class ErrorTable:
    rows: list
    param_dim: int
    config: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)
    means: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.means:
            self.means = self.recompute_means()

    @property
    def columns(self):
        mu = [f"mu_{j + 1}" for j in range(self.param_dim)]
        return mu + ["N_rb", *ERROR_COLUMNS, *TIMING_COLUMNS]

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def recompute_means(self):
        if not self.rows:
            return {c: math.nan for c in (*ERROR_COLUMNS, *TIMING_COLUMNS)}
        return {c: float(np.mean(self.column(c))) for c in (*ERROR_COLUMNS, *TIMING_COLUMNS)}

    def medians(self):
        return {c: float(np.median(self.column(c))) if self.rows else math.nan for c in TIMING_COLUMNS}

    def summary(self):
        """Means, medians and speedup ratios (mean-based and median-based)."""
        med = self.medians()
        out = dict(self.config)
        out["n_points"] = len(self.rows)
        out["n_excluded"] = len(self.excluded)
        out.update({f"mean_{k}": v for k, v in self.means.items()})
        out.update({f"median_{k}": v for k, v in med.items()})
        out["speedup_mean"] = self.means["t_hf"] / self.means["t_online"] if self.rows else math.nan
        out["speedup_median"] = med["t_hf"] / med["t_online"] if self.rows else math.nan
        return out


def write_rows(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_real(r[c]) if isinstance(r[c], (int, float, np.number)) else r[c] for c in columns])


def emit_csv(table, path, columns=None):
    """One row per test point; header-only when the table is empty."""
    write_rows(path, list(columns or table.columns), table.rows)


def read_csv(path):
    """Rows as dicts with numeric fields converted to float."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
            out.append(row)
    return out


def log10_histogram(values, width=0.5):
    """Counts of ``log10(values)`` in bins ``[k*width, (k+1)*width)``.

    Returns a list of ``(lo, hi, count)`` covering the data range; zero
    values are ignored.
    """
    v = np.asarray(values, dtype=float)
    v = v[v > 0]
    if v.size == 0:
        return []
    lg = np.log10(v)
    k = np.floor(lg / width).astype(int)
    out = []
    for b in range(k.min(), k.max() + 1):
        out.append((b * width, (b + 1) * width, int(np.sum(k == b))))
    return out
