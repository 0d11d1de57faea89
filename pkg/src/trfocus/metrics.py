"""Figures of merit extracted from simulated received fields.

All widths are half-power (-3 dB) widths with linear interpolation
between samples; the same definition is used for time and space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBackgroundError, EdgePeakError, ParameterError
from .link import SpaceTimeField, TrdmaResult

_POWER_FLOOR = 1e-300  # keeps dB conversion finite on exact zeros


def _half_power_width(power: np.ndarray, coords: np.ndarray) -> float:
    """Width between the half-power crossings bracketing the global max.

    Ties on the maximum break toward the lowest index; crossings are
    linearly interpolated in the power domain.  Raises EdgePeakError when
    a crossing is missing on either side.
    """
    peak = int(np.argmax(power))
    half = power[peak] / 2.0

    left = None
    for i in range(peak - 1, -1, -1):
        if power[i] < half:
            frac = (half - power[i]) / (power[i + 1] - power[i])
            left = coords[i] + frac * (coords[i + 1] - coords[i])
            break
    right = None
    for i in range(peak + 1, power.size):
        if power[i] < half:
            frac = (half - power[i - 1]) / (power[i] - power[i - 1])
            right = coords[i - 1] + frac * (coords[i] - coords[i - 1])
            break
    if left is None or right is None:
        raise EdgePeakError("peak has no bracketing half-power crossing")
    return float(right - left)


def temporal_fwhm(y, sample_rate_hz: float) -> float:
    """Half-power width, in seconds, of |y[n]|^2 around its global peak."""
    samples = np.asarray(y, dtype=np.complex128)
    if samples.ndim != 1 or samples.size < 3:
        raise ParameterError("need a 1-D record of at least 3 samples")
    power = np.abs(samples) ** 2
    return _half_power_width(power, np.arange(samples.size) / sample_rate_hz)


@dataclass(frozen=True)
class SpatialProfile:
    positions_m: np.ndarray
    power_db: np.ndarray  # normalized to the spatial peak
    fwhm_m: float


def spatial_profile(field: SpaceTimeField, peak_time_index: int) -> SpatialProfile:
    """Per-position power at the focusing time index, plus spatial FWHM.

    Power is normalized to the spatial peak; the width uses the same
    interpolated half-power rule as the temporal metric, in meters.
    A peak on the first or last grid position raises EdgePeakError.
    """
    if not 0 <= peak_time_index < field.field.shape[1]:
        raise ParameterError("peak_time_index outside the record")
    power = np.abs(field.field[:, peak_time_index]) ** 2
    fwhm = _half_power_width(power, field.positions_m)
    norm = np.maximum(power, _POWER_FLOOR) / max(power.max(), _POWER_FLOOR)
    return SpatialProfile(
        positions_m=field.positions_m,
        power_db=10.0 * np.log10(norm),
        fwhm_m=fwhm,
    )


def focusing_gain(
    field: SpaceTimeField,
    target_index: int,
    guard_samples: int | None = None,
) -> float:
    """Peak power at the target over the mean off-target background, in dB.

    Background: every sample whose spatial index differs from the target
    and whose time offset from the target's peak exceeds the guard
    (default 2 * oversample samples).
    """
    n_rx, n_time = field.field.shape
    if not 0 <= target_index < n_rx:
        raise ParameterError("target_index outside the grid")
    if guard_samples is None:
        guard_samples = 2 * field.oversample
    power = np.abs(field.field) ** 2
    target_row = power[target_index]
    peak_n = int(np.argmax(target_row))
    peak = float(target_row[peak_n])
    time_mask = np.abs(np.arange(n_time) - peak_n) > guard_samples
    row_mask = np.ones(n_rx, dtype=bool)
    row_mask[target_index] = False
    background = power[np.ix_(row_mask, time_mask)]
    if background.size == 0:
        raise DegenerateBackgroundError("no background samples outside the guard")
    mean_bg = float(background.mean())
    if mean_bg == 0.0:
        raise DegenerateBackgroundError("background power is identically zero")
    return 10.0 * math.log10(peak / mean_bg)


def sir(trdma: TrdmaResult) -> np.ndarray:
    """Per-user signal-to-interference ratio in dB at the focusing instant.

    SIR_u = |rx[u,u,L-1]|^2 / sum_{v != u} |rx[v,u,L-1]|^2. A zero
    interference denominator yields the +inf sentinel.
    """
    n_users = trdma.n_users
    if n_users < 2:
        raise ParameterError("SIR needs at least two users")
    at_peak = np.abs(trdma.per_user_rx[:, :, trdma.peak_index]) ** 2  # (v, u)
    out = np.empty(n_users)
    for u in range(n_users):
        signal = at_peak[u, u]
        interference = float(at_peak[:, u].sum() - signal)
        out[u] = math.inf if interference == 0.0 else 10.0 * math.log10(signal / interference)
    return out


def isi_ratio(trdma: TrdmaResult) -> np.ndarray:
    """Per-user peak power over summed own-stream power at other symbol
    instants (multiples of the symbol period away from the peak), in dB.

    +inf sentinel when no other symbol instant falls inside the record.
    """
    n_users = trdma.n_users
    peak_n = trdma.peak_index
    period = trdma.symbol_period_samples
    n_time = trdma.per_user_rx.shape[2]
    offsets = []
    m = 1
    while peak_n + m * period < n_time or peak_n - m * period >= 0:
        if peak_n + m * period < n_time:
            offsets.append(peak_n + m * period)
        if peak_n - m * period >= 0:
            offsets.append(peak_n - m * period)
        m += 1
    out = np.empty(n_users)
    for u in range(n_users):
        own = np.abs(trdma.per_user_rx[u, u]) ** 2
        peak = float(own[peak_n])
        leak = float(own[offsets].sum()) if offsets else 0.0
        out[u] = math.inf if leak == 0.0 else 10.0 * math.log10(peak / leak)
    return out


@dataclass(frozen=True)
class FocusingReport:
    """Metrics for one experiment trial, plus the configuration echo."""

    peak_power_db: float
    temporal_fwhm_s: float | None
    spatial_fwhm_m: float | None
    focusing_gain_db: float | None
    isi_ratio_db: float | None
    sir_db: list[float] | None
    carrier_hz: float
    bandwidth_hz: float
    n_tx: int
    seed: int
    trial: int = 0

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "peak_power_db": self.peak_power_db,
            "temporal_fwhm_s": self.temporal_fwhm_s,
            "spatial_fwhm_m": self.spatial_fwhm_m,
            "focusing_gain_db": self.focusing_gain_db,
            "isi_ratio_db": self.isi_ratio_db,
            "sir_db": self.sir_db,
            "fc_hz": self.carrier_hz,
            "b_hz": self.bandwidth_hz,
            "nt": self.n_tx,
            "seed": self.seed,
        }
