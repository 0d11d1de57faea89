"""Tests for TR filter construction and the MRT equivalence."""

import numpy as np
import pytest

from trfocus.errors import (
    DegenerateChannelError,
    DimensionMismatchError,
    ParameterError,
)
from trfocus.precoding import equivalence_residual, mrt_weights, tr_filters
from trfocus.signalops import Cir


def random_cirs(rng, n_tx, length, rate=1.0, carrier=1.0):
    return [
        Cir(
            (rng.standard_normal(length) + 1j * rng.standard_normal(length))
            / np.sqrt(2 * length),
            rate,
            carrier,
        )
        for _ in range(n_tx)
    ]


class TestTrFilters:
    def test_flat_channel_moves_delta_to_last_tap(self):
        length = 16
        taps = np.zeros(length, dtype=complex)
        taps[0] = 1.0
        bank = tr_filters([Cir(taps, 1.0, 1.0)], total_energy=1.0)
        expected = np.zeros(length, dtype=complex)
        expected[length - 1] = 1.0
        np.testing.assert_allclose(bank.filters[0], expected, atol=1e-15)

    def test_symmetric_split_across_two_antennas(self):
        rng = np.random.default_rng(0)
        cirs = []
        for _ in range(2):
            taps = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            taps /= np.linalg.norm(taps)  # unit energy each
            cirs.append(Cir(taps, 1.0, 1.0))
        bank = tr_filters(cirs, total_energy=1.0)
        energies = np.sum(np.abs(bank.filters) ** 2, axis=1)
        np.testing.assert_allclose(energies, [0.5, 0.5], rtol=1e-12)

    def test_total_energy_exact(self):
        rng = np.random.default_rng(1)
        for e_tx in (1.0, 0.25, 7.5):
            bank = tr_filters(random_cirs(rng, 4, 16), total_energy=e_tx)
            total = np.sum(np.abs(bank.filters) ** 2)
            assert abs(total - e_tx) < 1e-12 * e_tx

    def test_energy_scaling_scales_filters_by_sqrt(self):
        rng = np.random.default_rng(2)
        cirs = random_cirs(rng, 3, 12)
        base = tr_filters(cirs, total_energy=1.0)
        scaled = tr_filters(cirs, total_energy=4.0)
        np.testing.assert_allclose(scaled.filters, 2.0 * base.filters, rtol=1e-12)

    def test_degenerate_channel(self):
        zeros = [Cir(np.zeros(8), 1.0, 1.0)]
        with pytest.raises(DegenerateChannelError):
            tr_filters(zeros)

    def test_mismatched_lengths(self):
        rng = np.random.default_rng(3)
        cirs = random_cirs(rng, 1, 8) + random_cirs(rng, 1, 9)
        with pytest.raises(DimensionMismatchError):
            tr_filters(cirs)


class TestMrtWeights:
    def test_flat_channel_gives_constant_magnitude(self):
        taps = np.zeros(8, dtype=complex)
        taps[0] = 1.0
        w = mrt_weights([Cir(taps, 1.0, 1.0)], n_bins=16).weights[0]
        np.testing.assert_allclose(np.abs(w), np.abs(w[0]), rtol=1e-12)

    def test_conjugation_makes_product_real_nonnegative(self):
        rng = np.random.default_rng(4)
        cirs = random_cirs(rng, 2, 10)
        n_bins = 32
        w = mrt_weights(cirs, n_bins).weights
        for a, cir in enumerate(cirs):
            spectrum = np.fft.fft(cir.taps, n_bins)
            product = w[a] * spectrum
            assert np.max(np.abs(product.imag)) < 1e-12 * np.max(product.real)
            assert product.real.min() >= -1e-15

    def test_magnitude_matches_channel_up_to_global_constant(self):
        rng = np.random.default_rng(5)
        cirs = random_cirs(rng, 3, 10)
        n_bins = 32
        w = mrt_weights(cirs, n_bins).weights
        spectra = np.stack([np.fft.fft(c.taps, n_bins) for c in cirs])
        ratio = np.abs(w) / np.abs(spectra)
        assert np.max(np.abs(ratio - ratio[0, 0])) < 1e-12

    def test_bins_must_cover_taps(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ParameterError):
            mrt_weights(random_cirs(rng, 1, 16), n_bins=8)


class TestEquivalenceResidual:
    def test_exact_identity_many_draws(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n_tx = int(rng.integers(1, 5))
            length = int(rng.integers(2, 48))
            cirs = random_cirs(rng, n_tx, length)
            bank = tr_filters(cirs, total_energy=float(rng.uniform(0.5, 2.0)))
            assert equivalence_residual(bank, cirs) < 1e-10

    def test_single_tap_is_exact(self):
        cirs = [Cir(np.array([0.3 + 0.4j]), 1.0, 1.0)]
        bank = tr_filters(cirs)
        assert equivalence_residual(bank, cirs) < 1e-14

    def test_perturbation_is_detected(self):
        rng = np.random.default_rng(8)
        cirs = random_cirs(rng, 2, 16)
        bank = tr_filters(cirs)
        filters = bank.filters.copy()
        filters[0, 5] *= 1.10
        from trfocus.precoding import TrFilterBank

        broken = TrFilterBank(filters, bank.total_energy, bank.sample_rate_hz)
        assert equivalence_residual(broken, cirs) > 1e-3

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(9)
        cirs = random_cirs(rng, 2, 16)
        bank = tr_filters(cirs)
        with pytest.raises(DimensionMismatchError):
            equivalence_residual(bank, cirs[:1])


class TestPeakOptimality:
    def test_no_equal_energy_bank_beats_tr(self):
        # Cauchy-Schwarz: the TR bank maximizes the focusing-instant
        # amplitude among all banks with the same total energy.
        rng = np.random.default_rng(10)
        n_tx, length, e_tx = 4, 24, 1.0
        cirs = random_cirs(rng, n_tx, length)
        taps = np.stack([c.taps for c in cirs])
        tr_peak = np.sqrt(e_tx * np.sum(np.abs(taps) ** 2))
        flipped = taps[:, ::-1]
        draws = 1000
        competitors = rng.standard_normal((draws, n_tx, length)) + 1j * rng.standard_normal(
            (draws, n_tx, length)
        )
        norms = np.sqrt(np.sum(np.abs(competitors) ** 2, axis=(1, 2), keepdims=True))
        competitors *= np.sqrt(e_tx) / norms
        peaks = np.abs(np.einsum("dan,an->d", competitors, flipped))
        assert np.all(peaks <= tr_peak + 1e-9)
