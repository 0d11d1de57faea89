"""Time-reversal transmit filters and their frequency-domain twin.

A TR filter bank re-emits the conjugated, time-flipped CIR of each
antenna; maximum-ratio weights conjugate the channel per frequency bin.
Both are normalized jointly across antennas to one total transmit energy,
and agree bin-by-bin up to a pure delay of L-1 samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateChannelError, DimensionMismatchError, ParameterError
from .signalops import Cir


def _stack_cirs(cirs: Sequence[Cir]) -> tuple[np.ndarray, float]:
    if len(cirs) == 0:
        raise ParameterError("need at least one CIR")
    length = len(cirs[0])
    rate = cirs[0].sample_rate_hz
    for c in cirs:
        if len(c) != length:
            raise DimensionMismatchError("CIR tap counts differ across antennas")
        if c.sample_rate_hz != rate:
            raise DimensionMismatchError("CIR sample rates differ across antennas")
    return np.stack([c.taps for c in cirs]), rate


def _joint_scale(taps: np.ndarray, total_energy: float) -> float:
    if total_energy <= 0:
        raise ParameterError("total_energy must be positive")
    total = float(np.sum(np.abs(taps) ** 2))
    if total == 0.0:
        raise DegenerateChannelError("all CIRs are zero")
    return float(np.sqrt(total / total_energy))


@dataclass(frozen=True)
class TrFilterBank:
    """Per-antenna TR filters sharing one transmit energy budget."""

    filters: np.ndarray  # complex, shape (n_tx, L)
    total_energy: float
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.filters, dtype=np.complex128)
        if arr.ndim != 2:
            raise DimensionMismatchError("filters must have shape (n_tx, L)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "filters", arr)

    @property
    def n_tx(self) -> int:
        return self.filters.shape[0]

    @property
    def filter_length(self) -> int:
        return self.filters.shape[1]


@dataclass(frozen=True)
class MrtWeights:
    """Per-(antenna, bin) conjugate channel weights."""

    weights: np.ndarray  # complex, shape (n_tx, n_bins)
    n_bins: int

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[1] != self.n_bins:
            raise DimensionMismatchError("weights must have shape (n_tx, n_bins)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)


def tr_filters(cirs: Sequence[Cir], total_energy: float = 1.0) -> TrFilterBank:
    """Build TR filters w_a[n] = conj(h_a[L-1-n]) / c.

    c = sqrt(sum_a ||h_a||^2 / total_energy), so the bank's summed filter
    energy equals total_energy exactly.
    """
    taps, rate = _stack_cirs(cirs)
    scale = _joint_scale(taps, total_energy)
    return TrFilterBank(np.conj(taps[:, ::-1]) / scale, total_energy, rate)


def mrt_weights(cirs: Sequence[Cir], n_bins: int, total_energy: float = 1.0) -> MrtWeights:
    """Conjugate per-bin weights W_a[k] = conj(H_a[k]) / c.

    Uses the same joint normalization constant as :func:`tr_filters`, so
    by Parseval the bank and the weights carry the same total energy.
    """
    taps, _ = _stack_cirs(cirs)
    if n_bins < taps.shape[1]:
        raise ParameterError("n_bins must be at least the CIR length")
    scale = _joint_scale(taps, total_energy)
    spectra = np.fft.fft(taps, n_bins, axis=1)
    return MrtWeights(np.conj(spectra) / scale, n_bins)


def equivalence_residual(bank: TrFilterBank, cirs: Sequence[Cir]) -> float:
    """How far the bank is from conjugate per-bin precoding.

    Transforms the TR filters on an n_bins = 2L-1 grid, removes the pure
    delay of L-1 samples, and returns the larger of the complex residual
    max |W_tr e^{+j 2 pi k (L-1)/N} - W_mrt| and the per-bin magnitude
    residual max ||W_tr| - |W_mrt||, both relative to max |W_mrt|.
    Exact TR banks built from the same CIRs give < 1e-10.
    """
    taps, _ = _stack_cirs(cirs)
    if taps.shape[0] != bank.n_tx or taps.shape[1] != bank.filter_length:
        raise DimensionMismatchError("bank and CIR dimensions differ")
    length = bank.filter_length
    n_bins = 2 * length - 1
    w_tr = np.fft.fft(bank.filters, n_bins, axis=1)
    w_mrt = mrt_weights(cirs, n_bins, bank.total_energy).weights
    ref = float(np.max(np.abs(w_mrt)))
    if ref == 0.0:
        raise DegenerateChannelError("all CIRs are zero")
    k = np.arange(n_bins)
    undelayed = w_tr * np.exp(2j * np.pi * k * (length - 1) / n_bins)
    complex_resid = float(np.max(np.abs(undelayed - w_mrt))) / ref
    mag_resid = float(np.max(np.abs(np.abs(w_tr) - np.abs(w_mrt)))) / ref
    return max(complex_resid, mag_resid)
