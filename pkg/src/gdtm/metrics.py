"""Scalar error metrics for predicted-vs-true series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_HEADER = "nmse,r2,pe_pct,n"


def _pair(y_true, y_pred, min_len=1):
    t = np.ravel(np.asarray(y_true, dtype=float))
    p = np.ravel(np.asarray(y_pred, dtype=float))
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} vs {p.size}")
    if t.size < min_len:
        raise ValueError(f"need at least {min_len} samples, got {t.size}")
    return t, p


def _ratio(num, den, predictions_zero):
    # zero truth: exact zero prediction scores 0, anything else is unbounded
    if den == 0:
        return 0.0 if predictions_zero else np.inf
    return num / den


def nmse(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    return float(_ratio(np.sum((t - p) ** 2), np.sum(t ** 2), not np.any(p)))


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination with ``mean(y_pred)`` in the denominator.

    The conventional form (``mean(y_true)``) is :func:`r_squared_conventional`.
    A zero denominator returns ``nan``.
    """
    t, p = _pair(y_true, y_pred, 2)
    den = np.sum((t - p.mean()) ** 2)
    if den == 0:
        return float("nan")
    return float(1.0 - np.sum((t - p) ** 2) / den)


def r_squared_conventional(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred, 2)
    den = np.sum((t - t.mean()) ** 2)
    if den == 0:
        return float("nan")
    return float(1.0 - np.sum((t - p) ** 2) / den)


def peak_error(y_true, y_pred) -> float:
    """Largest absolute error relative to the largest absolute truth, in percent."""
    t, p = _pair(y_true, y_pred)
    return float(_ratio(100.0 * np.max(np.abs(t - p)), np.max(np.abs(t)), not np.any(p)))


def mac(phi_i, phi_j) -> float:
    a = np.ravel(np.asarray(phi_i, dtype=float))
    b = np.ravel(np.asarray(phi_j, dtype=float))
    if a.shape != b.shape or a.size == 0:
        raise ValueError("mode shapes must be non-empty and of equal length")
    na, nb = a @ a, b @ b
    if na == 0 or nb == 0:
        raise ValueError("mode shape has zero norm")
    return float(min((a @ b) ** 2 / (na * nb), 1.0))


@dataclass(frozen=True)
class MetricReport:
    nmse: float
    r_squared: float
    peak_error_pct: float
    sample_count: int

    @classmethod
    def compute(cls, y_true, y_pred) -> "MetricReport":
        t, p = _pair(y_true, y_pred)
        r2 = r_squared(t, p) if t.size >= 2 else float("nan")
        return cls(nmse(t, p), r2, peak_error(t, p), int(t.size))

    def csv_row(self) -> str:
        return f"{self.nmse:.17g},{self.r_squared:.17g},{self.peak_error_pct:.17g},{self.sample_count}"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(METRIC_HEADER + "\n" + self.csv_row() + "\n")

    @classmethod
    def from_csv(cls, path) -> "MetricReport":
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != METRIC_HEADER:
            raise ValueError(f"{path}: expected header {METRIC_HEADER!r}")
        a, b, c, n = lines[1].split(",")
        return cls(float(a), float(b), float(c), int(n))
