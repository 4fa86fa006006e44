"""Multi-dimensional dynamic time warping over sensor residuals.

The distance between two K-feature sequences is the classic dynamic program
over the L1 point cost delta(a, b) = sum_k |a_k - b_k|, allowing monotone
non-linear alignment.  Corridor-level similarity is the average of window
DTW distances over a rolling window, restricted to high-interaction windows
when a window activity mask is supplied.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _as_feature_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"sequence must be (N,) or (N, K), got shape {x.shape}")
    if x.shape[0] == 0:
        raise DataError("empty sequence")
    return x


def _znorm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    out = np.zeros_like(x)
    nz = sd > 0
    out[:, nz] = (x[:, nz] - mean[nz]) / sd[nz]
    return out


def dtw_distance(x, y, normalize: bool = False) -> float:
    """Minimum cumulative L1 cost over all monotone alignments of x and y.

    With `normalize`, each feature dimension of each sequence is
    z-normalized first (constant dimensions map to zero).
    """
    x = _as_feature_matrix(x)
    y = _as_feature_matrix(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"feature counts differ: {x.shape[1]} vs {y.shape[1]}")
    if normalize:
        x, y = _znorm(x), _znorm(y)
    delta = np.abs(x[:, None, :] - y[None, :, :]).sum(axis=2)
    n, m = delta.shape
    c = np.empty((n, m))
    c[0, :] = np.cumsum(delta[0, :])
    c[:, 0] = np.cumsum(delta[:, 0])
    for i in range(1, n):
        ci, cp = c[i], c[i - 1]
        di = delta[i]
        for j in range(1, m):
            ci[j] = min(cp[j], ci[j - 1], cp[j - 1]) + di[j]
    return float(c[n - 1, m - 1])


@dataclass
class DistanceTable:
    """Symmetric sparse pair distances restricted to a neighbor set."""

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    window_count: int = 0

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i <= j else (j, i)

    def set(self, i: int, j: int, value: float) -> None:
        if value < 0:
            raise ValueError("distances must be nonnegative")
        self.entries[self._key(i, j)] = float(value)

    def get(self, i: int, j: int) -> float | None:
        if i == j:
            return 0.0
        return self.entries.get(self._key(i, j))

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.entries)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "distance"])
            for (i, j) in self.pairs():
                writer.writerow([i, j, repr(self.entries[(i, j)])])

    @classmethod
    def from_csv(cls, path: str) -> "DistanceTable":
        table = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["i", "j", "distance"]:
                raise DataError("distance table header must be i,j,distance")
            for row in reader:
                if row:
                    table.set(int(row[0]), int(row[1]), float(row[2]))
        return table


def window_starts(n_steps: int, window_len: int, stride: int) -> list[int]:
    if window_len > n_steps:
        raise ValueError(f"window of {window_len} steps exceeds series length {n_steps}")
    return list(range(0, n_steps - window_len + 1, stride))


def active_windows_by_occupancy(occupancy: np.ndarray, window_len: int, stride: int,
                                quantile: float = 0.75) -> np.ndarray:
    """Flag high-interaction windows: mean occupancy above the given quantile.

    The quantile is taken over the window means themselves, so by default the
    top quarter of windows is active.
    """
    occupancy = np.asarray(occupancy, dtype=np.float64)
    starts = window_starts(occupancy.shape[-1], window_len, stride)
    means = np.array([occupancy[..., s:s + window_len].mean() for s in starts])
    if len(means) == 0:
        return np.zeros(0, dtype=bool)
    return means > np.quantile(means, quantile)


def rolling_dtw_matrix(residuals: np.ndarray, neighbors, window_len: int, stride: int,
                       active_mask: np.ndarray | None = None,
                       normalize: bool = False) -> DistanceTable:
    """Average window DTW distance for every neighboring sensor pair.

    `residuals` is (sensors, steps) or (sensors, steps, features).  Inactive
    windows are skipped; if the mask disables every window, all windows are
    used instead.
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.ndim == 2:
        residuals = residuals[:, :, None]
    starts = window_starts(residuals.shape[1], window_len, stride)
    if active_mask is not None:
        active_mask = np.asarray(active_mask, dtype=bool)
        if len(active_mask) != len(starts):
            raise ValueError(f"mask covers {len(active_mask)} windows, expected {len(starts)}")
        if active_mask.any():
            starts = [s for s, a in zip(starts, active_mask) if a]
    table = DistanceTable(window_count=len(starts))
    n = residuals.shape[0]
    for i, j in neighbors:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"neighbor pair ({i},{j}) out of range for {n} sensors")
        dists = [dtw_distance(residuals[i, s:s + window_len], residuals[j, s:s + window_len],
                              normalize=normalize) for s in starts]
        table.set(i, j, float(np.mean(dists)))
    return table
