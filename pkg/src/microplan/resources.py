"""Weather and load series, their CSV formats, and per-unit availability.

Weather CSV columns: ``timestamp, ghi_wm2, wind_ms``. Load CSV columns:
``timestamp, load_kw``. Power-curve CSV columns: ``speed_ms, power_kw``.
Timestamps are either integer hour indices or ISO-8601 instants.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from importlib import resources as _pkg_resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    MissingFileError,
    NegativeValueError,
    RaggedLengthError,
    ScenarioError,
    TimestampError,
)

STC_IRRADIANCE = 1000.0  # W/m2

WEATHER_COLUMNS = ("timestamp", "ghi_wm2", "wind_ms")
LOAD_COLUMNS = ("timestamp", "load_kw")
CURVE_COLUMNS = ("speed_ms", "power_kw")


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ScenarioError(f"{name} must be one-dimensional")
    bad = np.flatnonzero(~np.isfinite(arr) | (arr < 0))
    if bad.size:
        raise NegativeValueError(name, int(bad[0]), float(arr[bad[0]]))
    arr.setflags(write=False)
    return arr


def _step_hours(timestamps: np.ndarray) -> float:
    if timestamps.size < 2:
        return 1.0
    if np.issubdtype(timestamps.dtype, np.datetime64):
        diffs = np.diff(timestamps).astype("timedelta64[s]").astype(np.int64) / 3600.0
    else:
        diffs = np.diff(timestamps).astype(float)
    if not np.all(diffs > 0):
        row = int(np.flatnonzero(diffs <= 0)[0]) + 1
        raise TimestampError(f"timestamps are not strictly increasing at row {row}")
    if not np.all(diffs == diffs[0]):
        row = int(np.flatnonzero(diffs != diffs[0])[0]) + 1
        raise TimestampError(f"timestamps are not uniformly spaced at row {row}")
    return float(diffs[0])


@dataclass(frozen=True, eq=False)
class ScenarioSeries:
    """Aligned irradiance, wind speed and load for one evaluation horizon."""

    timestamps: np.ndarray
    ghi: np.ndarray
    wind_speed: np.ndarray
    load: np.ndarray

    def __post_init__(self):
        ghi = _as_float_array(self.ghi, "ghi_wm2")
        wind = _as_float_array(self.wind_speed, "wind_ms")
        load = _as_float_array(self.load, "load_kw")
        ts = np.asarray(self.timestamps)
        if not (np.issubdtype(ts.dtype, np.datetime64) or np.issubdtype(ts.dtype, np.integer)):
            raise TimestampError("timestamps must be integer hour indices or datetime64")
        lengths = {len(ts), len(ghi), len(wind), len(load)}
        if len(lengths) != 1:
            raise RaggedLengthError(
                f"series lengths differ: timestamps={len(ts)}, ghi={len(ghi)}, "
                f"wind={len(wind)}, load={len(load)}"
            )
        if len(ts) == 0:
            raise ScenarioError("series must contain at least one step")
        _step_hours(ts)
        ts = ts.copy()
        ts.setflags(write=False)
        for name, value in (("timestamps", ts), ("ghi", ghi), ("wind_speed", wind), ("load", load)):
            object.__setattr__(self, name, value)

    @classmethod
    def hourly(cls, ghi, wind_speed, load, start: int = 0) -> "ScenarioSeries":
        n = len(np.asarray(load))
        return cls(np.arange(start, start + n, dtype=np.int64), ghi, wind_speed, load)

    def __len__(self) -> int:
        return len(self.load)

    @property
    def step_hours(self) -> float:
        return _step_hours(self.timestamps)

    def slice(self, start: int, stop: int) -> "ScenarioSeries":
        return ScenarioSeries(
            self.timestamps[start:stop], self.ghi[start:stop],
            self.wind_speed[start:stop], self.load[start:stop],
        )

    def equals(self, other: "ScenarioSeries") -> bool:
        return (
            self.timestamps.dtype == other.timestamps.dtype
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.ghi, other.ghi)
            and np.array_equal(self.wind_speed, other.wind_speed)
            and np.array_equal(self.load, other.load)
        )


@dataclass(frozen=True, eq=False)
class PowerCurve:
    speeds: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        speeds = np.array(self.speeds, dtype=float)
        powers = np.array(self.powers, dtype=float)
        if speeds.ndim != 1 or speeds.shape != powers.shape or speeds.size < 2:
            raise ScenarioError("power curve needs at least two (speed, power) points")
        if not np.all(np.isfinite(speeds)) or not np.all(np.isfinite(powers)):
            raise ScenarioError("power curve contains non-finite values")
        if not np.all(np.diff(speeds) > 0):
            raise ScenarioError("power curve speeds must be strictly increasing")
        if np.any(powers < 0) or speeds[0] < 0:
            raise ScenarioError("power curve values must be non-negative")
        if powers[0] != 0:
            raise ScenarioError("power curve must start at zero power (at or below cut-in)")
        speeds.setflags(write=False)
        powers.setflags(write=False)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "powers", powers)

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]]) -> "PowerCurve":
        speeds, powers = zip(*points)
        return cls(np.array(speeds), np.array(powers))

    @property
    def cut_in(self) -> float:
        positive = np.flatnonzero(self.powers > 0)
        return float(self.speeds[positive[0] - 1]) if positive.size else float(self.speeds[-1])

    @property
    def survival_speed(self) -> float:
        return float(self.speeds[-1])

    @property
    def max_power(self) -> float:
        return float(self.powers.max())

    def __call__(self, speed) -> np.ndarray:
        # Zero outside the tabulated range: below the first point and past survival speed.
        return np.interp(np.asarray(speed, dtype=float), self.speeds, self.powers, left=0.0, right=0.0)


@dataclass(frozen=True, eq=False)
class AvailabilitySeries:
    """Per-step available output: kW per installed PV kW, and kW per turbine."""

    pv_per_kw: np.ndarray
    wt_per_unit: np.ndarray

    def __post_init__(self):
        pv = _as_float_array(self.pv_per_kw, "pv_per_kw")
        wt = _as_float_array(self.wt_per_unit, "wt_per_unit")
        if pv.shape != wt.shape:
            raise RaggedLengthError("pv and wt availability lengths differ")
        object.__setattr__(self, "pv_per_kw", pv)
        object.__setattr__(self, "wt_per_unit", wt)

    def __len__(self) -> int:
        return len(self.pv_per_kw)

    def slice(self, start: int, stop: int) -> "AvailabilitySeries":
        return AvailabilitySeries(self.pv_per_kw[start:stop], self.wt_per_unit[start:stop])


def pv_availability(series: ScenarioSeries, derate: float = 1.0) -> np.ndarray:
    if not 0 < derate <= 1.2:
        raise ValueError("derate must lie in (0, 1.2]")
    return np.maximum(derate * series.ghi / STC_IRRADIANCE, 0.0)


def wt_availability(series: ScenarioSeries, curve: PowerCurve | None = None) -> np.ndarray:
    curve = default_power_curve() if curve is None else curve
    return curve(series.wind_speed)


def availability(
    series: ScenarioSeries, derate: float = 1.0, curve: PowerCurve | None = None
) -> AvailabilitySeries:
    return AvailabilitySeries(pv_availability(series, derate), wt_availability(series, curve))


# -- load synthesis -------------------------------------------------------

def window_for_daily_energy(base_kw: float, peak_kw: float, daily_kwh: float) -> float:
    """Length in hours of the peak window giving ``daily_kwh`` per day."""
    if peak_kw <= base_kw:
        raise ValueError("peak_kw must exceed base_kw to solve for a window")
    hours = (daily_kwh - 24.0 * base_kw) / (peak_kw - base_kw)
    if not 0 <= hours <= 24:
        raise ValueError(f"no window in [0, 24] h gives {daily_kwh} kWh/day")
    return hours


def synthesize_load(
    base_kw: float = 0.43,
    peak_kw: float = 1.33,
    window: tuple[float, float] = (8.0, 17.66),
    days: int = 1,
) -> np.ndarray:
    """Rectangular daily profile: ``base_kw`` all day, ``peak_kw`` inside ``window``.

    The window is given in fractional hours of the day. An hour that is only
    partly covered gets the matching fraction of the extra power, so the
    hourly profile integrates to ``24*base + len(window)*(peak - base)``.
    """
    start, stop = window
    if base_kw < 0 or peak_kw < base_kw:
        raise ValueError("need 0 <= base_kw <= peak_kw")
    if not 0 <= start <= stop <= 24:
        raise ValueError("window must satisfy 0 <= start <= stop <= 24")
    hours = np.arange(24, dtype=float)
    overlap = np.clip(np.minimum(hours + 1, stop) - np.maximum(hours, start), 0.0, 1.0)
    day = base_kw + (peak_kw - base_kw) * overlap
    return np.tile(day, days)


def daily_energy(base_kw: float, peak_kw: float, window: tuple[float, float]) -> float:
    return 24.0 * base_kw + (window[1] - window[0]) * (peak_kw - base_kw)


# -- synthetic weather ----------------------------------------------------

def synthesize_weather(
    days: int = 365,
    seed: int = 2018,
    latitude_deg: float = 26.0,
    mean_wind_ms: float = 3.3,
    dust_events_per_year: float = 10.0,
    load: np.ndarray | None = None,
) -> ScenarioSeries:
    """Hourly desert-like year: strong summer sun, light wind, occasional dust days.

    Irradiance follows a clear-sky elevation model scaled by a daily
    clearness index; multi-day dust/cloud events cut it to 25-55 %. Wind is
    Weibull (k=2) with a winter maximum and an afternoon bump. ``load``
    defaults to the bundled 19.01 kWh/day profile.
    """
    rng = np.random.default_rng(seed)
    n = 24 * days
    hour = np.arange(n) % 24 + 0.5
    doy = np.arange(n) // 24 % 365 + 1

    lat = math.radians(latitude_deg)
    decl = np.radians(23.45) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    hour_angle = np.radians(15.0 * (hour - 12.0))
    sin_el = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(hour_angle)
    clear_sky = 1050.0 * np.clip(sin_el, 0.0, None) ** 1.15

    clearness = rng.uniform(0.82, 0.98, size=days)
    n_events = rng.poisson(dust_events_per_year * days / 365.0)
    for _ in range(n_events):
        # Events cluster in the cooler half of the year.
        start = int(rng.choice(days, p=_winter_weights(days)))
        length = int(rng.integers(1, 4))
        clearness[start:start + length] = rng.uniform(0.25, 0.55, size=len(clearness[start:start + length]))
    ghi = clear_sky * np.repeat(clearness, 24)

    seasonal = 1.0 + 0.3 * np.cos(2 * np.pi * (doy - 15) / 365.0)
    diurnal = 1.0 + 0.25 * np.sin(2 * np.pi * (hour - 9.0) / 24.0)
    scale = mean_wind_ms / math.gamma(1.5) * seasonal * diurnal
    daily_calm = np.repeat(rng.uniform(0.6, 1.3, size=days), 24)
    wind = scale * daily_calm * rng.weibull(2.0, size=n)

    if load is None:
        window = (8.0, 8.0 + window_for_daily_energy(0.43, 1.33, 19.01))
        load = synthesize_load(0.43, 1.33, window, days)
    return ScenarioSeries.hourly(np.round(ghi, 3), np.round(wind, 3), load)


def _winter_weights(days: int) -> np.ndarray:
    d = np.arange(days) % 365
    w = 1.0 + 0.8 * np.cos(2 * np.pi * (d - 15) / 365.0)
    return w / w.sum()


def with_renewable_gap(series: ScenarioSeries, start_step: int, steps: int) -> ScenarioSeries:
    """Copy of ``series`` with zero irradiance and wind over ``[start, start+steps)``."""
    ghi = series.ghi.copy()
    wind = series.wind_speed.copy()
    ghi[start_step:start_step + steps] = 0.0
    wind[start_step:start_step + steps] = 0.0
    return ScenarioSeries(series.timestamps, ghi, wind, series.load)


# -- CSV io ---------------------------------------------------------------

def _read_table(path: str | Path, required: Sequence[str], mapping: Mapping[str, str]) -> dict[str, list[str]]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        cols = {key: mapping.get(key, key) for key in required}
        missing = [col for col in cols.values() if col not in header]
        if missing:
            raise ScenarioError(f"{path}: missing column(s) {missing}; header is {header}")
        table: dict[str, list[str]] = {key: [] for key in required}
        for row in reader:
            for key, col in cols.items():
                table[key].append(row[col])
    return table


def _parse_numbers(raw: list[str], name: str, path: Path) -> np.ndarray:
    out = np.empty(len(raw))
    for i, text in enumerate(raw):
        try:
            out[i] = float(text)
        except (TypeError, ValueError):
            raise ScenarioError(f"{path}: {name} row {i} is not a number: {text!r}") from None
        if not math.isfinite(out[i]) or out[i] < 0:
            raise NegativeValueError(name, i, out[i])
    return out


def _parse_timestamps(raw: list[str], path: Path) -> np.ndarray:
    try:
        return np.array([int(x) for x in raw], dtype=np.int64)
    except ValueError:
        pass
    try:
        return np.array([np.datetime64(x.strip().rstrip("Z"), "s") for x in raw])
    except ValueError as exc:
        raise TimestampError(f"{path}: unparseable timestamp ({exc})") from None


def read_scenario(
    weather_path: str | Path,
    load_path: str | Path | None = None,
    columns: Mapping[str, str] | None = None,
) -> ScenarioSeries:
    """Load weather (and load) CSVs into a validated series.

    If ``load_path`` is omitted the weather file must also carry a
    ``load_kw`` column. ``columns`` renames canonical columns to the file's
    own header names.
    """
    mapping = dict(columns or {})
    weather_path = Path(weather_path)
    if load_path is None:
        table = _read_table(weather_path, WEATHER_COLUMNS + ("load_kw",), mapping)
        load_raw, load_ts = table["load_kw"], table["timestamp"]
    else:
        table = _read_table(weather_path, WEATHER_COLUMNS, mapping)
        load_table = _read_table(load_path, LOAD_COLUMNS, mapping)
        load_raw, load_ts = load_table["load_kw"], load_table["timestamp"]
        if len(load_raw) != len(table["ghi_wm2"]):
            raise RaggedLengthError(
                f"weather has {len(table['ghi_wm2'])} rows but load has {len(load_raw)}"
            )
        if [t.strip() for t in load_ts] != [t.strip() for t in table["timestamp"]]:
            raise TimestampError("weather and load timestamps do not match")

    ts = _parse_timestamps(table["timestamp"], weather_path)
    ghi = _parse_numbers(table["ghi_wm2"], "ghi_wm2", weather_path)
    wind = _parse_numbers(table["wind_ms"], "wind_ms", weather_path)
    load = _parse_numbers(load_raw, "load_kw", Path(load_path or weather_path))
    return ScenarioSeries(ts, ghi, wind, load)


def read_load(path: str | Path) -> np.ndarray:
    """Load column of a ``timestamp,load_kw`` CSV."""
    table = _read_table(path, LOAD_COLUMNS, {})
    return _parse_numbers(table["load_kw"], "load_kw", Path(path))


def _format_ts(ts: np.ndarray) -> list[str]:
    if np.issubdtype(ts.dtype, np.datetime64):
        return list(np.datetime_as_string(ts, unit="s"))
    return [str(int(x)) for x in ts]


def write_scenario(series: ScenarioSeries, weather_path: str | Path, load_path: str | Path | None = None) -> None:
    """Write ``series`` in the format :func:`read_scenario` reads back exactly."""
    stamps = _format_ts(series.timestamps)
    with Path(weather_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(WEATHER_COLUMNS) + ([] if load_path else ["load_kw"])
        writer.writerow(header)
        for i, ts in enumerate(stamps):
            row = [ts, repr(float(series.ghi[i])), repr(float(series.wind_speed[i]))]
            if not load_path:
                row.append(repr(float(series.load[i])))
            writer.writerow(row)
    if load_path:
        write_load(stamps, series.load, load_path)


def write_load(timestamps, load, path: str | Path) -> None:
    stamps = timestamps if isinstance(timestamps, list) else _format_ts(np.asarray(timestamps))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOAD_COLUMNS)
        for ts, value in zip(stamps, load):
            writer.writerow([ts, repr(float(value))])


def read_power_curve(path: str | Path) -> PowerCurve:
    table = _read_table(path, CURVE_COLUMNS, {})
    path = Path(path)
    return PowerCurve(
        _parse_numbers(table["speed_ms"], "speed_ms", path),
        _parse_numbers(table["power_kw"], "power_kw", path),
    )


def write_power_curve(curve: PowerCurve, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for s, p in zip(curve.speeds, curve.powers):
            writer.writerow([repr(float(s)), repr(float(p))])


@functools.lru_cache(maxsize=1)
def default_power_curve() -> PowerCurve:
    """Bundled GV-2kW table; an editable default rather than measured data."""
    ref = _pkg_resources.files("microplan.data").joinpath("gv2kw_curve.csv")
    with _pkg_resources.as_file(ref) as path:
        return read_power_curve(path)
