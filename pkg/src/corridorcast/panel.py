"""Data model and ingestion for corridor sensor panels.

A panel is a dense (sensors, steps, features) block on a fixed-step time
grid, with a boolean mask marking which cells were actually observed.
Sensors live on a 1-D corridor and are ordered by milepost, so geographic
neighborhoods are index-contiguous.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum

import numpy as np

from .errors import (
    EmptyPanelError,
    EmptySeriesError,
    FormatError,
    UnknownSensorError,
)

FEATURES = ("flow", "occupancy", "speed")

DATA_HEADER = ["sensor_id", "timestamp", "flow", "occupancy", "speed"]
META_HEADER = ["sensor_id", "milepost", "kind"]


class SensorKind(str, Enum):
    MAINLINE = "mainline"
    ON_RAMP = "on_ramp"
    OFF_RAMP = "off_ramp"


@dataclass(frozen=True)
class SensorMeta:
    id: str
    position: float  # milepost, miles along the corridor
    kind: SensorKind = SensorKind.MAINLINE

    def __post_init__(self):
        if not np.isfinite(self.position):
            raise FormatError(f"sensor {self.id!r} has non-finite milepost")


@dataclass
class Panel:
    """Dense value block (n sensors, t steps, k features) plus observation mask."""

    values: np.ndarray
    time_index: np.ndarray  # datetime64[s], strictly increasing, fixed step
    features: tuple[str, ...]
    missing_mask: np.ndarray  # True where observed
    sensors: tuple[SensorMeta, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != self.missing_mask.shape:
            raise FormatError("values and mask shapes disagree")
        n, t, k = self.values.shape
        if len(self.sensors) != n or len(self.time_index) != t or len(self.features) != k:
            raise FormatError("panel axis metadata disagrees with the value block")
        if t > 1:
            deltas = np.diff(self.time_index.astype("datetime64[s]").astype(np.int64))
            if np.any(deltas <= 0) or np.any(deltas != deltas[0]):
                raise FormatError("time index must be strictly increasing at a fixed step")

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def step_minutes(self) -> float:
        if len(self.time_index) < 2:
            raise FormatError("cannot infer a step from fewer than two timestamps")
        d = (self.time_index[1] - self.time_index[0]).astype("timedelta64[s]").astype(np.int64)
        return d / 60.0

    def observed_fraction(self) -> np.ndarray:
        """Per-sensor fraction of observed cells."""
        return self.missing_mask.reshape(self.n_sensors, -1).mean(axis=1)

    def sensor_ids(self) -> list[str]:
        return [s.id for s in self.sensors]

    def copy(self) -> "Panel":
        return Panel(self.values.copy(), self.time_index.copy(), self.features,
                     self.missing_mask.copy(), self.sensors)


@dataclass
class ScalingParams:
    """Per (sensor, feature) min/max taken from the training span.

    Degenerate series (max == min) map to constant zero and are flagged so
    callers can report them.
    """

    lo: np.ndarray  # (n, k)
    hi: np.ndarray  # (n, k)
    degenerate: np.ndarray = field(default=None)  # bool (n, k)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if np.any(self.hi < self.lo):
            raise ValueError("scaling max must be >= min")
        if self.degenerate is None:
            self.degenerate = self.hi == self.lo
        self.degenerate = np.asarray(self.degenerate, dtype=bool)


def _parse_timestamp(text: str) -> np.datetime64:
    try:
        return np.datetime64(datetime.fromisoformat(text), "s")
    except ValueError as exc:
        raise FormatError(f"bad timestamp {text!r}: {exc}") from None


def load_sensor_meta(meta_path: str) -> list[SensorMeta]:
    metas: list[SensorMeta] = []
    seen: set[str] = set()
    with open(meta_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != META_HEADER:
            raise FormatError(f"metadata header must be {','.join(META_HEADER)}")
        for row in reader:
            if not row:
                continue
            sid, milepost, kind = row[0].strip(), row[1], row[2].strip()
            if sid in seen:
                raise FormatError(f"duplicate sensor id {sid!r} in metadata")
            seen.add(sid)
            try:
                metas.append(SensorMeta(sid, float(milepost), SensorKind(kind)))
            except ValueError as exc:
                raise FormatError(f"bad metadata row for {sid!r}: {exc}") from None
    return metas


def load_csv(path: str, meta_path: str) -> Panel:
    """Read a long-format data CSV plus sensor metadata into a Panel.

    The data file has one row per (sensor, timestamp); the step is inferred
    from the smallest timestamp gap and every timestamp must sit on that
    grid.  Rows absent from the grid become mask=False cells.  Sensors are
    ordered by milepost.
    """
    metas = sorted(load_sensor_meta(meta_path), key=lambda m: (m.position, m.id))
    known = {m.id: i for i, m in enumerate(metas)}

    records: dict[str, list[tuple[np.datetime64, float, float, float]]] = {m.id: [] for m in metas}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DATA_HEADER:
            raise FormatError(f"data header must be {','.join(DATA_HEADER)}")
        for row in reader:
            if not row:
                continue
            sid = row[0].strip()
            if sid not in known:
                raise UnknownSensorError(f"data references unknown sensor {sid!r}")
            ts = _parse_timestamp(row[1].strip())
            try:
                vals = (float(row[2]), float(row[3]), float(row[4]))
            except ValueError as exc:
                raise FormatError(f"bad numeric field in row {row!r}: {exc}") from None
            records[sid].append((ts, *vals))

    all_ts: list[np.datetime64] = []
    for sid, rows in records.items():
        ts = [r[0] for r in rows]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise FormatError(f"timestamps for sensor {sid!r} are not strictly increasing")
        all_ts.extend(ts)
    if not all_ts:
        raise EmptyPanelError("data file contains no rows")

    times = np.array(sorted(set(np.datetime64(t, "s") for t in all_ts)))
    if len(times) > 1:
        gaps = np.diff(times.astype(np.int64))
        step = int(gaps.min())
        if step <= 0:
            raise FormatError("degenerate timestamp grid")
        lo = int(times[0].astype(np.int64))
        if np.any((times.astype(np.int64) - lo) % step != 0):
            raise FormatError("timestamps do not sit on a fixed-step grid")
        grid = lo + step * np.arange((int(times[-1].astype(np.int64)) - lo) // step + 1)
        time_index = grid.astype("datetime64[s]")
    else:
        time_index = times
    slot = {int(t.astype(np.int64)): i for i, t in enumerate(time_index)}

    n, t, k = len(metas), len(time_index), len(FEATURES)
    values = np.zeros((n, t, k))
    mask = np.zeros((n, t, k), dtype=bool)
    for sid, rows in records.items():
        si = known[sid]
        for ts, flow, occ, speed in rows:
            ti = slot[int(np.datetime64(ts, "s").astype(np.int64))]
            values[si, ti] = (flow, occ, speed)
            mask[si, ti] = True
    if not np.all(np.isfinite(values[mask])):
        raise FormatError("observed values must be finite")
    return Panel(values, time_index, FEATURES, mask, tuple(metas))


def filter_complete(p: Panel, min_fraction: float) -> Panel:
    """Keep exactly the sensors whose observed fraction exceeds `min_fraction`."""
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError(f"min_fraction must lie in [0, 1], got {min_fraction}")
    keep = np.flatnonzero(p.observed_fraction() > min_fraction)
    if keep.size == 0:
        raise EmptyPanelError(f"no sensor exceeds completeness {min_fraction}")
    return Panel(p.values[keep], p.time_index, p.features, p.missing_mask[keep],
                 tuple(p.sensors[i] for i in keep))


def fit_scale(p: Panel, train_range: tuple[int, int]) -> ScalingParams:
    """Min/max per (sensor, feature) over observed cells of steps [start, stop)."""
    start, stop = train_range
    if not 0 <= start < stop <= p.n_steps:
        raise ValueError(f"train range {train_range} is empty or out of bounds")
    vals = p.values[:, start:stop, :]
    mask = p.missing_mask[:, start:stop, :]
    masked = np.ma.masked_array(vals, mask=~mask)
    lo = masked.min(axis=1).filled(0.0)
    hi = masked.max(axis=1).filled(0.0)
    return ScalingParams(lo=lo, hi=hi)


def apply_scale(p: Panel, s: ScalingParams) -> Panel:
    span = np.where(s.degenerate, 1.0, s.hi - s.lo)
    scaled = (p.values - s.lo[:, None, :]) / span[:, None, :]
    scaled = np.where(s.degenerate[:, None, :], 0.0, scaled)
    return replace(p.copy(), values=scaled)


def invert_scale(p: Panel, s: ScalingParams) -> Panel:
    span = np.where(s.degenerate, 1.0, s.hi - s.lo)
    raw = p.values * span[:, None, :] + s.lo[:, None, :]
    raw = np.where(s.degenerate[:, None, :], s.lo[:, None, :], raw)
    return replace(p.copy(), values=raw)


def invert_scale_values(values: np.ndarray, s: ScalingParams, feature: int) -> np.ndarray:
    """Undo scaling for one feature on an arbitrary (n, ...) value block."""
    lo = s.lo[:, feature]
    hi = s.hi[:, feature]
    degen = s.degenerate[:, feature]
    span = np.where(degen, 1.0, hi - lo)
    shape = (values.shape[0],) + (1,) * (values.ndim - 1)
    out = values * span.reshape(shape) + lo.reshape(shape)
    return np.where(degen.reshape(shape), lo.reshape(shape), out)


def impute_forward(p: Panel) -> Panel:
    """Fill unobserved cells with the last observed value of the same series.

    Leading gaps take the first observed value.  A series with no observed
    value at all is an error.
    """
    values = p.values.copy()
    n, t, k = values.shape
    for si in range(n):
        for fi in range(k):
            obs = p.missing_mask[si, :, fi]
            if not obs.any():
                raise EmptySeriesError(
                    f"sensor {p.sensors[si].id!r} feature {p.features[fi]!r} has no observations")
            idx = np.where(obs, np.arange(t), -1)
            np.maximum.accumulate(idx, out=idx)
            first = np.argmax(obs)
            idx[idx < 0] = first
            values[si, :, fi] = values[si, idx, fi]
    return replace(p.copy(), values=values)


def neighbor_pairs(sensors, radius_miles: float = 2.0,
                   kinds=(SensorKind.MAINLINE,)) -> list[tuple[int, int]]:
    """Index pairs of milepost-consecutive sensors within `radius_miles`.

    Only the listed kinds participate (clustering runs on mainline sensors).
    Gaps wider than the radius split the corridor, so clusters can never
    bridge them.
    """
    eligible = [i for i, m in enumerate(sensors) if m.kind in kinds]
    pairs: list[tuple[int, int]] = []
    for a, b in zip(eligible, eligible[1:]):
        if abs(sensors[b].position - sensors[a].position) <= radius_miles:
            pairs.append((a, b))
    return pairs
