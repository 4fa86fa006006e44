"""Additive seasonal/trend/residual decomposition and stationarization.

The split is the classical moving-average decomposition: the trend is a
centered moving average over one season (half-weighted ends when the period
is even), the seasonal component is the cycle-averaged detrended series
re-centered to sum to zero over one period, and the residual absorbs the
rest, so S + T + R reconstructs the input exactly everywhere.  The trend is
undefined in the half-window at either edge; there it is extended with the
nearest valid value and the residual keeps the identity exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .panel import Panel


@dataclass
class Decomposition:
    """Seasonal, trend and residual blocks, same shape as their source.

    For a whole panel the arrays are (sensors, steps, features) with time on
    axis 1; for a single series they are 1-D.  The seasonal block repeats
    exactly with the stored period.
    """

    seasonal: np.ndarray
    trend: np.ndarray
    residual: np.ndarray
    period: int


def _trend_moving_average(series: np.ndarray, period: int) -> tuple[np.ndarray, int]:
    """Centered moving average and the edge offset where it is undefined."""
    if period % 2 == 0:
        weights = np.full(period + 1, 1.0 / period)
        weights[0] = weights[-1] = 0.5 / period
        offset = period // 2
    else:
        weights = np.full(period, 1.0 / period)
        offset = (period - 1) // 2
    valid = np.convolve(series, weights[::-1], mode="valid")
    trend = np.empty_like(series)
    trend[offset:len(series) - offset] = valid
    trend[:offset] = valid[0]
    trend[len(series) - offset:] = valid[-1]
    return trend, offset


def decompose_additive(series: np.ndarray, period: int) -> Decomposition:
    """Decompose one series into S + T + R with the given steps-per-season."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("decompose_additive expects a 1-D series")
    if period < 2:
        raise ValueError(f"period must be >= 2, got {period}")
    t = len(series)
    if t < 2 * period:
        raise InsufficientDataError(f"series length {t} < 2*period = {2 * period}")
    trend, offset = _trend_moving_average(series, period)
    detrended = series - trend
    phases = np.arange(t) % period
    valid = slice(offset, t - offset)
    cycle = np.zeros(period)
    for j in range(period):
        sel = detrended[valid][phases[valid] == j]
        cycle[j] = sel.mean()
    cycle -= cycle.mean()
    seasonal = cycle[phases]
    residual = series - trend - seasonal
    return Decomposition(seasonal, trend, residual, period)


def decompose_panel(p: Panel, period: int) -> Decomposition:
    """Decompose every (sensor, feature) series of a panel."""
    n, t, k = p.values.shape
    seasonal = np.empty_like(p.values)
    trend = np.empty_like(p.values)
    residual = np.empty_like(p.values)
    for si in range(n):
        for fi in range(k):
            d = decompose_additive(p.values[si, :, fi], period)
            seasonal[si, :, fi] = d.seasonal
            trend[si, :, fi] = d.trend
            residual[si, :, fi] = d.residual
    return Decomposition(seasonal, trend, residual, period)


def daily_period(step_minutes: float) -> int:
    """Steps per day for the panel's sampling interval."""
    period = 1440.0 / step_minutes
    if abs(period - round(period)) > 1e-9:
        raise ValueError(f"step of {step_minutes} minutes does not divide a day")
    return int(round(period))


def stationarize_window(s_win: np.ndarray, t_win: np.ndarray, r_win: np.ndarray,
                        anchor_index: int, time_axis: int = -1):
    """Shift a (w+h)-step window so its last input step becomes the origin.

    Seasonal and trend channels have their value at `anchor_index` subtracted;
    residuals pass through unchanged.  Returns the shifted channels plus the
    (seasonal, trend) anchor values needed to undo the shift.
    """
    s_win = np.asarray(s_win, dtype=np.float64)
    t_win = np.asarray(t_win, dtype=np.float64)
    r_win = np.asarray(r_win, dtype=np.float64)
    if s_win.shape != t_win.shape or s_win.shape != r_win.shape:
        raise ValueError("component windows must share a shape")
    anchor_s = np.take(s_win, anchor_index, axis=time_axis)
    anchor_t = np.take(t_win, anchor_index, axis=time_axis)
    seasonal_in = s_win - np.expand_dims(anchor_s, axis=time_axis)
    trend_in = t_win - np.expand_dims(anchor_t, axis=time_axis)
    return seasonal_in, trend_in, r_win, (anchor_s, anchor_t)


def recover_forecast(pred: np.ndarray, anchors, horizon_axis: int = -1) -> np.ndarray:
    """Undo stationarization: add the anchor seasonal + trend back onto a forecast."""
    anchor_s, anchor_t = anchors
    anchor_s = np.asarray(anchor_s, dtype=np.float64)
    anchor_t = np.asarray(anchor_t, dtype=np.float64)
    if anchor_s.shape != anchor_t.shape:
        raise ValueError(f"anchor shapes disagree: {anchor_s.shape} vs {anchor_t.shape}")
    base = np.expand_dims(anchor_s + anchor_t, axis=horizon_axis)
    try:
        return pred + base
    except ValueError:
        raise ValueError(
            f"anchors of shape {anchor_s.shape} do not broadcast onto forecast "
            f"{pred.shape}") from None


def dump_components_csv(path: str, d: Decomposition, sensor_index: int,
                        feature_index: int = 0) -> None:
    """Write one sensor's (t, S, T, R) columns for inspection."""
    s = d.seasonal[sensor_index, :, feature_index]
    t = d.trend[sensor_index, :, feature_index]
    r = d.residual[sensor_index, :, feature_index]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "S", "T", "R"])
        for i in range(len(s)):
            writer.writerow([i, repr(float(s[i])), repr(float(t[i])), repr(float(r[i]))])
