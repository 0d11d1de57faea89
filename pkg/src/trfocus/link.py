"""Propagation of precoded transmissions through a channel ensemble.

Produces the space-time received field of a TR bank over the whole grid,
the U x U cross-received table for multi-user (TRDMA) operation, and an
empirical bit error rate for the single-tap non-coherent OOK receiver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft

from .channel import ChannelEnsemble
from .errors import DimensionMismatchError, InvalidTargetError, ParameterError
from .precoding import TrFilterBank


@dataclass(frozen=True)
class SpaceTimeField:
    """Received complex field indexed by (rx grid position, time sample)."""

    field: np.ndarray  # complex, shape (n_rx, 2L-1)
    positions_m: np.ndarray
    peak_index: int  # nominal focusing instant, L-1
    sample_rate_hz: float
    oversample: int

    def __post_init__(self):
        arr = np.asarray(self.field, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != np.asarray(self.positions_m).size:
            raise DimensionMismatchError("field must have shape (n_rx, n_time)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "field", arr)

    @property
    def n_positions(self) -> int:
        return self.field.shape[0]


@dataclass(frozen=True)
class TrdmaResult:
    """per_user_rx[v, u] = field at user u's position from user v's precoder."""

    per_user_rx: np.ndarray  # complex, shape (U, U, 2L-1)
    symbol_period_samples: int
    peak_index: int
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.per_user_rx, dtype=np.complex128)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError("per_user_rx must have shape (U, U, n_time)")
        object.__setattr__(self, "per_user_rx", arr)

    @property
    def n_users(self) -> int:
        return self.per_user_rx.shape[0]


def _bank_through_channel(bank: TrFilterBank, cirs: np.ndarray) -> np.ndarray:
    """sum_a w_a * h_{a,x} for every position x; rows of length 2L-1.

    cirs has shape (n_tx, n_rx, L); the filters share the same L.
    """
    length = bank.filter_length
    n_out = 2 * length - 1
    nfft = scipy.fft.next_fast_len(n_out)
    spec_w = np.fft.fft(bank.filters, nfft, axis=1)  # (n_tx, nfft)
    spec_h = np.fft.fft(cirs, nfft, axis=2)  # (n_tx, n_rx, nfft)
    spec_y = np.einsum("af,arf->rf", spec_w, spec_h)
    return np.fft.ifft(spec_y, axis=1)[:, :n_out]


def focus_field(
    bank: TrFilterBank,
    ensemble: ChannelEnsemble,
    noise_snr_db: float | None = None,
    rng=None,
) -> SpaceTimeField:
    """Transmit the bank through every probed CIR of the ensemble.

    y_x[n] = sum_a (w_a * h_{a,x})[n].  With perfect CSI for target x0 the
    sample at the focusing instant L-1 is sqrt(E_tx * sum_a ||h_{a,x0}||^2),
    real and positive.  If noise_snr_db is given, complex AWGN is added at
    that SNR relative to the spatial-peak power.
    """
    if bank.filter_length != ensemble.cir_length:
        raise DimensionMismatchError("filter length differs from CIR length")
    if bank.n_tx != ensemble.n_tx:
        raise DimensionMismatchError("antenna counts differ")
    field = _bank_through_channel(bank, ensemble.cirs)
    if noise_snr_db is not None:
        if rng is None:
            raise ParameterError("noise injection requires an rng")
        gen = np.random.default_rng(rng)
        peak_power = float(np.max(np.abs(field) ** 2))
        sigma2 = peak_power * 10.0 ** (-noise_snr_db / 10.0)
        noise = gen.standard_normal(field.shape) + 1j * gen.standard_normal(field.shape)
        field = field + np.sqrt(sigma2 / 2.0) * noise
    return SpaceTimeField(
        field=field,
        positions_m=ensemble.grid.positions_m,
        peak_index=bank.filter_length - 1,
        sample_rate_hz=ensemble.sample_rate_hz,
        oversample=ensemble.params.oversample,
    )


def trdma_link(
    banks: Sequence[TrFilterBank],
    ensemble: ChannelEnsemble,
    targets: Sequence[int],
    symbol_period_samples: int,
) -> TrdmaResult:
    """Cross-received table for U users precoded towards their own targets.

    Each user transmits a unit impulse shaped by its own TR bank; entry
    [v, u] is the resulting field at user u's grid position.  Downstream
    SIR/ISI metrics consume this table.
    """
    n_users = len(banks)
    if n_users != len(targets):
        raise DimensionMismatchError("one target index per bank required")
    if len(set(int(t) for t in targets)) != n_users:
        raise InvalidTargetError("TRDMA targets must be distinct grid indices")
    if symbol_period_samples < 1:
        raise ParameterError("symbol_period_samples must be >= 1")
    n_rx = len(ensemble.grid)
    for t in targets:
        if not 0 <= int(t) < n_rx:
            raise InvalidTargetError(f"target index {t} outside the grid")
    length = ensemble.cir_length
    for bank in banks:
        if bank.filter_length != length or bank.n_tx != ensemble.n_tx:
            raise DimensionMismatchError("bank dimensions differ from ensemble")
    target_cirs = ensemble.cirs[:, [int(t) for t in targets], :]  # (n_tx, U, L)
    table = np.empty((n_users, n_users, 2 * length - 1), dtype=np.complex128)
    for v, bank in enumerate(banks):
        table[v] = _bank_through_channel(bank, target_cirs)
    return TrdmaResult(
        per_user_rx=table,
        symbol_period_samples=int(symbol_period_samples),
        peak_index=length - 1,
        sample_rate_hz=ensemble.sample_rate_hz,
    )


def ook_link(
    bank: TrFilterBank,
    ensemble: ChannelEnsemble,
    target: int,
    snr_db: float,
    n_symbols: int,
    symbol_period_samples: int,
    rng,
) -> float:
    """Empirical BER of ON/OFF keying with a single-tap energy receiver.

    Each symbol scales the TR bank; the receiver samples
    |y[L-1 + k*symbol_period]|^2 and thresholds at half the noiseless ON
    level.  Noise is complex AWGN at snr_db relative to the noiseless
    focusing-peak power.
    """
    if n_symbols < 100:
        raise ParameterError("n_symbols must be at least 100")
    if symbol_period_samples < 1:
        raise ParameterError("symbol_period_samples must be >= 1")
    n_rx = len(ensemble.grid)
    if not 0 <= int(target) < n_rx:
        raise InvalidTargetError(f"target index {target} outside the grid")
    gen = np.random.default_rng(rng)
    length = ensemble.cir_length
    pulse = _bank_through_channel(bank, ensemble.cirs[:, [int(target)], :])[0]
    peak = pulse[length - 1]
    on_level = float(np.abs(peak) ** 2)

    bits = gen.integers(0, 2, n_symbols)
    # Sampled value at instant L-1 + k*T collects pulse[L-1 + (k-j)*T] from
    # symbol j; build the ISI kernel over the lags that stay in the record.
    period = int(symbol_period_samples)
    m_lo = -((length - 1) // period)
    m_hi = (length - 1) // period
    lags = np.arange(m_lo, m_hi + 1)
    kernel = pulse[length - 1 + lags * period]
    sampled = np.convolve(bits.astype(np.complex128), kernel)[-m_lo : -m_lo + n_symbols]

    sigma2 = on_level * 10.0 ** (-snr_db / 10.0)
    noise = gen.standard_normal(n_symbols) + 1j * gen.standard_normal(n_symbols)
    sampled = sampled + np.sqrt(sigma2 / 2.0) * noise

    decided = (np.abs(sampled) ** 2 > on_level / 2.0).astype(np.int64)
    return float(np.mean(decided != bits))
