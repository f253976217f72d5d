import numpy as np
import pytest

from hetnet_tuner.radio import (AntennaConfig, RadioParams, antenna_gain,
                                horizontal_gain, macro_rx_dbm, path_loss,
                                pico_rx_dbm, sinr, vertical_gain)


class TestHorizontalGain:
    def test_boresight(self):
        assert horizontal_gain(0.0, 70.0) == 0.0

    def test_half_beamwidth_is_minus_3db(self):
        assert horizontal_gain(35.0, 70.0) == pytest.approx(-3.0, abs=1e-12)

    def test_floor_is_25db(self):
        assert horizontal_gain(200.0, 70.0) == -25.0

    def test_symmetry(self):
        phis = np.linspace(-180, 180, 721)
        np.testing.assert_allclose(horizontal_gain(phis, 65.0),
                                   horizontal_gain(-phis, 65.0), atol=0)

    def test_monotone_in_abs_angle(self):
        phis = np.linspace(0, 180, 1000)
        g = horizontal_gain(phis, 55.0)
        assert np.all(np.diff(g) <= 1e-12)

    def test_invalid_beamwidth(self):
        with pytest.raises(ValueError, match="invalid beamwidth"):
            horizontal_gain(10.0, 0.0)


class TestVerticalGain:
    def test_at_tilt(self):
        assert vertical_gain(6.0, 6.0, 10.0) == 0.0

    def test_half_beamwidth(self):
        assert vertical_gain(6.0 + 5.0, 6.0, 10.0) == pytest.approx(-3.0, abs=1e-12)

    def test_floor_is_20db(self):
        assert vertical_gain(90.0, 0.0, 4.4) == -20.0

    def test_invalid_beamwidth(self):
        with pytest.raises(ValueError):
            vertical_gain(1.0, 1.0, -2.0)


class TestAntennaGain:
    CFG = AntennaConfig(6.0, 10.0, 70.0)

    def test_boresight_at_tilt(self):
        assert antenna_gain(0.0, 6.0, self.CFG) == 0.0

    def test_combined_clip(self):
        # Ah = -25 and Av = -20 individually, combined clips at -25
        assert antenna_gain(200.0, 90.0, self.CFG) == -25.0

    def test_double_half_power_point(self):
        got = antenna_gain(35.0, 6.0 + 5.0, self.CFG)
        assert got == pytest.approx(-6.0, abs=1e-12)

    def test_bounds_random(self):
        rng = np.random.default_rng(7)
        phi = rng.uniform(-180, 180, 5000)
        theta = rng.uniform(-90, 90, 5000)
        for cfg in (self.CFG, AntennaConfig(15.0, 4.4, 45.0)):
            g = antenna_gain(phi, theta, cfg)
            assert np.all(g <= 0.0) and np.all(g >= -25.0)

    def test_widening_hbw_never_reduces_gain_in_beam(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            narrow = rng.uniform(30, 70)
            wide = narrow + rng.uniform(1, 30)
            phi = rng.uniform(-narrow / 2, narrow / 2)
            theta = rng.uniform(-20, 40)
            g1 = antenna_gain(phi, theta, AntennaConfig(6.0, 10.0, narrow))
            g2 = antenna_gain(phi, theta, AntennaConfig(6.0, 10.0, wide))
            assert g2 >= g1 - 1e-12


class TestPathLoss:
    def test_macro_reference_1km(self):
        assert path_loss("macro", 1.0) == pytest.approx(128.1, abs=1e-12)

    def test_pico_reference_1m(self):
        assert path_loss("pico", 1.0) == pytest.approx(38.0, abs=1e-12)

    def test_macro_decade(self):
        assert path_loss("macro", 0.1) == pytest.approx(90.5, abs=1e-9)

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate link"):
            path_loss("macro", 0.0)
        with pytest.raises(ValueError):
            path_loss("pico", -1.0)


class TestSinr:
    RADIO = RadioParams()

    def test_signal_equals_noise(self):
        ls = sinr(self.RADIO.noise_mw, [], [], self.RADIO)
        assert ls.sinr_db == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_interferer_limit(self):
        # one interferer with an identical link budget, noise << signal
        p = self.RADIO.noise_mw * 1e9
        ls = sinr(p, [p], [], self.RADIO)
        assert ls.sinr_db == pytest.approx(0.0, abs=1e-6)

    def test_three_cell_toy_against_hand_sum(self):
        # serving -60 dBm; macro interferers -75 and -82 dBm; pico -90 dBm.
        # Independent spreadsheet-style recomputation of every term.
        s = 10 ** (-60 / 10)
        i1, i2 = 10 ** (-75 / 10), 10 ** (-82 / 10)
        p1 = 10 ** (-90 / 10)
        ls = sinr(s, [i1, i2], [p1], self.RADIO)
        n = 10 ** (self.RADIO.noise_power_dbm / 10)
        expect = 10 * np.log10(s / (i1 + i2 + p1 + n))
        assert ls.sinr_db == pytest.approx(expect, abs=1e-12)
        assert ls.i_macro_mw == pytest.approx(i1 + i2, rel=1e-12)
        assert ls.i_small_mw == pytest.approx(p1, rel=1e-12)

    def test_composition_recompute(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s = 10 ** rng.uniform(-12, -4)
            im = 10 ** rng.uniform(-14, -6, size=3)
            ismall = 10 ** rng.uniform(-16, -8, size=2)
            ls = sinr(s, im, ismall, self.RADIO)
            back = 10 * np.log10(
                ls.serving_mw / (ls.i_macro_mw + ls.i_small_mw + self.RADIO.noise_mw))
            assert ls.sinr_db == back  # exact per the stored fields


class TestLinkBudget:
    def test_pico_vs_macro_association_example(self):
        radio = RadioParams()
        # pico 10 m away: 24 - (38 + 30*log10(10)) = -44 dBm
        assert pico_rx_dbm(radio, 10.0) == pytest.approx(-44.0, abs=1e-9)
        # macro 2 km away at best pattern gain: 46 + 15 - (128.1 + 37.6*log10 2)
        cfg = AntennaConfig(6.0, 10.0, 70.0)
        got = macro_rx_dbm(radio, cfg, 0.0, 6.0, 2.0)
        assert got == pytest.approx(61 - 128.1 - 37.6 * np.log10(2.0), abs=1e-9)
        assert got < -44.0

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            RadioParams(macro_shadow_sigma_db=-1.0)
