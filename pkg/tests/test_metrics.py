"""Tests for the focusing figures of merit."""

import math

import numpy as np
import pytest

from trfocus.channel import RxGrid, build_ensemble
from trfocus.errors import (
    DegenerateBackgroundError,
    EdgePeakError,
    ParameterError,
)
from trfocus.link import SpaceTimeField, TrdmaResult, trdma_link
from trfocus.metrics import (
    focusing_gain,
    isi_ratio,
    sir,
    spatial_profile,
    temporal_fwhm,
)
from trfocus.precoding import tr_filters

from test_link import rich_params


def make_field(field, positions=None, peak_index=None, fs=1.0, oversample=2):
    field = np.asarray(field, dtype=complex)
    if positions is None:
        positions = np.arange(field.shape[0], dtype=float)
    if peak_index is None:
        peak_index = field.shape[1] // 2
    return SpaceTimeField(
        field=field,
        positions_m=np.asarray(positions, dtype=float),
        peak_index=peak_index,
        sample_rate_hz=fs,
        oversample=oversample,
    )


class TestTemporalFwhm:
    def test_sinc_squared_width_is_0p886_over_b(self):
        bandwidth = 100e6
        fs = 4 * bandwidth
        n = np.arange(1024)
        y = np.sinc(bandwidth * (n / fs - 512 / fs))
        measured = temporal_fwhm(y, fs)
        assert measured == pytest.approx(0.886 / bandwidth, rel=0.02)

    def test_plateau_tie_break(self):
        y = np.sqrt(np.array([0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]))
        assert temporal_fwhm(y, 1.0) == pytest.approx(3.0)

    def test_edge_peak_raises(self):
        y = np.arange(1.0, 9.0)  # max at the last sample
        with pytest.raises(EdgePeakError):
            temporal_fwhm(y, 1.0)

    def test_scale_invariant(self):
        rng = np.random.default_rng(0)
        y = np.sinc(0.2 * (np.arange(256) - 128.0)) + 0.01 * rng.standard_normal(256)
        assert temporal_fwhm(3j * y, 1.0) == pytest.approx(temporal_fwhm(y, 1.0))


class TestSpatialProfile:
    def test_jinc_free_width(self):
        # |sin(u)/u|^2 profile: full width at half power is 0.443 lambda.
        lam = 0.12
        positions = np.linspace(-lam, lam, 201)
        k = 2 * math.pi / lam
        u = k * positions
        amps = np.ones_like(u)
        nz = u != 0
        amps[nz] = np.sin(u[nz]) / u[nz]
        field = np.zeros((positions.size, 5), dtype=complex)
        field[:, 2] = amps
        profile = spatial_profile(make_field(field, positions, peak_index=2), 2)
        assert profile.fwhm_m == pytest.approx(0.443 * lam, rel=0.03)

    def test_single_position_grid_is_edge_peak(self):
        field = np.ones((1, 9), dtype=complex)
        with pytest.raises(EdgePeakError):
            spatial_profile(make_field(field, [0.0]), 4)

    def test_normalized_to_peak(self):
        field = np.zeros((7, 3), dtype=complex)
        field[:, 1] = np.array([0.1, 0.5, 1.0, 2.0, 1.0, 0.5, 0.1])
        profile = spatial_profile(make_field(field), 1)
        assert profile.power_db.max() == pytest.approx(0.0)

    def test_global_scaling_leaves_profile_unchanged(self):
        rng = np.random.default_rng(1)
        base = np.zeros((11, 3), dtype=complex)
        base[:, 1] = np.exp(-0.5 * (np.arange(11) - 5.0) ** 2) + 0.01 * rng.random(11)
        a = spatial_profile(make_field(base), 1)
        b = spatial_profile(make_field(base * (2.0 - 1.0j)), 1)
        assert b.fwhm_m == pytest.approx(a.fwhm_m, rel=1e-12)
        np.testing.assert_allclose(b.power_db, a.power_db, atol=1e-9)


class TestFocusingGain:
    def test_flat_field_is_zero_db(self):
        field = np.ones((4, 40), dtype=complex)
        assert focusing_gain(make_field(field), 0) == pytest.approx(0.0, abs=1e-12)

    def test_known_ratio(self):
        field = np.ones((3, 64), dtype=complex)
        field[1, 30] = 10.0  # peak power 100 over background 1
        gain = focusing_gain(make_field(field), 1)
        assert gain == pytest.approx(20.0, abs=1e-9)

    def test_guard_excludes_mainlobe_columns(self):
        field = np.ones((2, 64), dtype=complex)
        field[0, 30] = 10.0
        field[1, 28:33] = 50.0  # inside the guard of the other row
        gain = focusing_gain(make_field(field, oversample=2), 0)
        assert gain == pytest.approx(20.0, abs=1e-9)

    def test_single_position_degenerate(self):
        field = np.ones((1, 16), dtype=complex)
        with pytest.raises(DegenerateBackgroundError):
            focusing_gain(make_field(field), 0)

    def test_zero_background_degenerate(self):
        field = np.zeros((2, 32), dtype=complex)
        field[0, 16] = 1.0
        with pytest.raises(DegenerateBackgroundError):
            focusing_gain(make_field(field), 0)

    def test_nt_scaling_adds_9db_and_is_monotone(self):
        # Peak grows like Nt at fixed E_tx while the speckle background
        # does not: gain(Nt=8) - gain(Nt=1) ~ 10 log10(8), and the
        # ensemble-mean gain increases across Nt in {1, 2, 8}.
        params = rich_params(n_paths=300)
        lam = params.wavelength_m
        grid = RxGrid(np.array([0.0, 3 * lam, 6 * lam, 9 * lam, 12 * lam]))
        gains = {}
        for n_tx in (1, 2, 8):
            rng = np.random.default_rng(40)
            vals = []
            for _ in range(60):
                ens = build_ensemble(params, grid, n_tx, rng)
                from trfocus.link import focus_field

                bank = tr_filters(ens.cirs_at(2), 1.0)
                vals.append(focusing_gain(focus_field(bank, ens), 2))
            gains[n_tx] = np.mean(vals)
        assert gains[1] < gains[2] < gains[8]
        assert gains[8] - gains[1] == pytest.approx(10 * math.log10(8), abs=1.5)


class TestSirAndIsi:
    def orthogonal_trdma(self):
        # Two single-tap channels with disjoint support: no interference.
        length = 16
        rx = np.zeros((2, 2, 2 * length - 1), dtype=complex)
        rx[0, 0, length - 1] = 1.0
        rx[1, 1, length - 1] = 1.0
        rx[0, 1, 3] = 0.5  # off the focusing instant
        return TrdmaResult(
            per_user_rx=rx,
            symbol_period_samples=8,
            peak_index=length - 1,
            sample_rate_hz=1.0,
        )

    def test_orthogonal_channels_have_infinite_sir(self):
        vals = sir(self.orthogonal_trdma())
        assert np.all(np.isinf(vals))

    def test_identical_cirs_give_zero_db(self):
        params = rich_params(n_paths=100)
        ens = build_ensemble(params, RxGrid(np.array([0.0, 0.02])), 1, 30)
        cirs = ens.cirs.copy()
        cirs[:, 1, :] = cirs[:, 0, :]  # both users see the same channel
        from trfocus.channel import ChannelEnsemble

        twin = ChannelEnsemble(
            cirs=cirs, params=ens.params, grid=ens.grid, n_tx=ens.n_tx
        )
        banks = [tr_filters(twin.cirs_at(0), 1.0), tr_filters(twin.cirs_at(1), 1.0)]
        res = trdma_link(banks, twin, [0, 1], symbol_period_samples=8)
        vals = sir(res)
        np.testing.assert_allclose(vals, [0.0, 0.0], atol=1e-9)

    def test_needs_two_users(self):
        length = 8
        rx = np.ones((1, 1, 2 * length - 1), dtype=complex)
        res = TrdmaResult(rx, 4, length - 1, 1.0)
        with pytest.raises(ParameterError):
            sir(res)

    def test_isi_ratio_counts_symbol_instants(self):
        length = 16
        rx = np.zeros((2, 2, 2 * length - 1), dtype=complex)
        rx[0, 0, length - 1] = 2.0
        rx[0, 0, length - 1 + 8] = 1.0  # one symbol period later
        rx[0, 0, length - 1 - 8] = 1.0  # one earlier
        rx[1, 1, length - 1] = 1.0
        res = TrdmaResult(rx, 8, length - 1, 1.0)
        vals = isi_ratio(res)
        assert vals[0] == pytest.approx(10 * math.log10(4.0 / 2.0))
        assert np.isinf(vals[1])

    def test_mean_sir_exceeds_10db_at_2lambda(self):
        params = rich_params(n_paths=300)
        lam = params.wavelength_m
        grid = RxGrid(np.array([0.0, 2.5 * lam]))
        rng = np.random.default_rng(31)
        vals = []
        for _ in range(100):
            ens = build_ensemble(params, grid, 8, rng)
            banks = [tr_filters(ens.cirs_at(0), 1.0), tr_filters(ens.cirs_at(1), 1.0)]
            res = trdma_link(banks, ens, [0, 1], symbol_period_samples=16)
            vals.extend(sir(res))
        assert np.mean(vals) >= 10.0
