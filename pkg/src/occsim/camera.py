"""Rolling-shutter camera model over a binary LED waveform.

Each frame exposes its rows sequentially; a row's luminance is the exact
time average of the piecewise-constant chip waveform over that row's
exposure window (computed from a prefix integral, so conservation holds to
float precision).  Frame-to-frame timing follows a varying frame rate:
interval_k = 1 / (mean_fps + delta_k * delta_fps) with delta_k drawn i.i.d.
from a bounded deviation process.

Distance enters through a single ratio: at ``reference_distance`` the LED
footprint spans exactly the rows of one sub-packet, and the footprint
shrinks proportionally to 1/distance.  Rows outside the footprint read
background (zero) luminance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rll import ChipStream


@dataclass(frozen=True)
class CameraConfig:
    rows: int
    row_period_s: float
    row_exposure_s: float
    mean_fps: float
    delta_fps: float = 0.0
    delta_process: str = "uniform"  # or "truncated_gaussian"
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1:
            raise ValueError("rows must be positive")
        if self.row_period_s <= 0 or self.row_exposure_s <= 0:
            raise ValueError("row timing must be positive")
        if self.delta_fps < 0:
            raise ValueError("delta_fps must be non-negative")
        if self.mean_fps - self.delta_fps <= 0:
            raise ValueError("mean_fps - delta_fps must stay positive")
        if self.delta_process not in ("uniform", "truncated_gaussian"):
            raise ValueError(f"unknown delta_process {self.delta_process!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        fastest_interval = 1.0 / (self.mean_fps + self.delta_fps)
        if self.capture_time_s > fastest_interval + 1e-12:
            raise ValueError(
                "rolling exposure time exceeds the shortest frame interval; "
                "frames would overlap"
            )

    @property
    def capture_time_s(self) -> float:
        """First-row-start to last-row-end: the rolling exposure time."""
        return self.rows * self.row_period_s


@dataclass(frozen=True)
class GeometryConfig:
    """LED footprint geometry reduced to the ratio reference_distance/distance.

    ``reference_distance`` is the distance at which the footprint spans the
    rows of exactly one sub-packet; focal length and LED size are retained
    as the optics that produced it (footprint rows scale with
    focal_length * led_size / distance).
    """

    distance: float
    reference_distance: float
    focal_length: float | None = None
    led_size: float | None = None

    def __post_init__(self):
        if self.distance <= 0 or self.reference_distance <= 0:
            raise ValueError("distances must be positive")


def reference_distance_from_optics(focal_length: float, led_size: float,
                                   rows_per_subpacket: int) -> float:
    """Distance at which one sub-packet's rows exactly fill the footprint."""
    if focal_length <= 0 or led_size <= 0 or rows_per_subpacket <= 0:
        raise ValueError("optics parameters must be positive")
    return focal_length * led_size / rows_per_subpacket


def covered_rows(geometry: GeometryConfig, rows_per_subpacket: int,
                 max_rows: int | None = None) -> int:
    """Rows of the sensor the LED footprint spans at the configured distance."""
    rows = round(rows_per_subpacket * geometry.reference_distance
                 / geometry.distance)
    if max_rows is not None:
        rows = min(rows, max_rows)
    return max(0, rows)


@dataclass(frozen=True)
class FrameSample:
    """One simulated image: per-row luminance plus capture metadata."""

    index: int
    start_time_s: float
    row_luma: np.ndarray
    covered_rows: int

    @property
    def covered_start(self) -> int:
        return (len(self.row_luma) - self.covered_rows) // 2

    def covered_slice(self) -> np.ndarray:
        start = self.covered_start
        return self.row_luma[start:start + self.covered_rows]


def _draw_deltas(config: CameraConfig, count: int,
                 rng: np.random.Generator) -> np.ndarray:
    if config.delta_process == "uniform":
        deltas = rng.uniform(-1.0, 1.0, size=count)
    else:
        deltas = rng.normal(0.0, 0.5, size=count)
    # keep the instantaneous rate strictly inside the open deviation band
    return np.clip(deltas, -1.0 + 1e-9, 1.0 - 1e-9)


def frame_intervals(config: CameraConfig, count: int) -> np.ndarray:
    """Inter-frame intervals (seconds) realized by the varying frame rate."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(config.seed)
    deltas = _draw_deltas(config, count, rng)
    rates = config.mean_fps + deltas * config.delta_fps
    return 1.0 / rates


def _prefix_integral(stream: ChipStream) -> np.ndarray:
    # cumulative on-time in seconds at each chip boundary
    return np.concatenate(([0.0], np.cumsum(stream.chips, dtype=np.float64))) \
        / stream.clock_hz


def _integral_at(prefix: np.ndarray, chips: np.ndarray, clock_hz: float,
                 times: np.ndarray) -> np.ndarray:
    """On-time integral of the waveform from 0 to each time (0 past the end)."""
    if len(chips) == 0:
        return np.zeros_like(np.asarray(times, dtype=np.float64))
    positions = np.clip(times, 0.0, None) * clock_hz
    idx = np.minimum(positions.astype(np.int64), len(chips))
    frac = positions - idx
    inside = idx < len(chips)
    partial = np.where(inside, chips[np.minimum(idx, len(chips) - 1)] * frac, 0.0)
    return prefix[idx] + partial / clock_hz


def sample_frames(waveform: ChipStream, camera: CameraConfig,
                  geometry: GeometryConfig | None = None,
                  duration_s: float | None = None,
                  rows_per_subpacket: int | None = None) -> list[FrameSample]:
    """Simulate frames over the waveform; deterministic for a given seed.

    When geometry is given, rows_per_subpacket sets the footprint scale;
    without geometry the LED fills the whole sensor.
    """
    duration = waveform.duration_s if duration_s is None else duration_s
    if duration > waveform.duration_s + 1e-12:
        raise ValueError("duration exceeds the waveform duration")

    if geometry is not None:
        if rows_per_subpacket is None:
            raise ValueError("rows_per_subpacket is required with geometry")
        cov = covered_rows(geometry, rows_per_subpacket, max_rows=camera.rows)
    else:
        cov = camera.rows

    max_frames = int(duration * (camera.mean_fps + camera.delta_fps)) + 2
    intervals = frame_intervals(camera, max_frames)
    noise_rng = np.random.default_rng((camera.seed, 1))

    prefix = _prefix_integral(waveform)
    chips = waveform.chips.astype(np.float64)
    row_offsets = np.arange(camera.rows) * camera.row_period_s
    exposure = camera.row_exposure_s
    last_row_end = (camera.rows - 1) * camera.row_period_s + exposure

    frames = []
    start = 0.0
    for k in range(max_frames):
        if start + last_row_end > duration + 1e-12:
            break
        begins = start + row_offsets
        integ = (_integral_at(prefix, chips, waveform.clock_hz, begins + exposure)
                 - _integral_at(prefix, chips, waveform.clock_hz, begins))
        luma = integ / exposure
        if cov < camera.rows:
            mask = np.zeros(camera.rows, dtype=bool)
            begin = (camera.rows - cov) // 2
            mask[begin:begin + cov] = True
            luma = np.where(mask, luma, 0.0)
        if camera.noise_sigma > 0:
            luma = luma + noise_rng.normal(0.0, camera.noise_sigma, camera.rows)
        luma = np.clip(luma, 0.0, 1.0)
        frames.append(FrameSample(k, start, luma, cov))
        start += intervals[k]
    return frames
