import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from npathsim import metrics
from npathsim.blocks import HR2_INJECT_PORT, build_receiver
from npathsim.circuit import Netlist, capacitor, extract_segments, isource, resistor, vsource
from npathsim.clocks import PwmWaveform, fourier_coefficient
from npathsim.engine import periodic_steady_state
from npathsim.errors import NoPeakError

F_LO = 500e6
T = 1 / F_LO
SQ2 = (1.0, math.sqrt(2), 1.0)


# --------------------------------------------------------------------------
# harmonic response curves
# --------------------------------------------------------------------------


def test_normalisation_exact(bands_off, bands_on):
    for curve in (bands_off, bands_on):
        for p in curve.probes:
            assert curve.peak(1, p) == 0.0


def test_offsets_avoid_harmonic():
    offs = metrics._offset_grid(30e6, 271)
    assert len(offs) == 272
    assert np.min(np.abs(offs)) > 0
    assert np.allclose(offs, -offs[::-1])


def test_harmonic_curve_csv(bands_off):
    text = bands_off.to_csv()
    assert "# reference_db_bb=" in text
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header == "probe,band,f_in_hz,offset_hz,response_db"


def test_offsets_reject_dc(rx_off):
    with pytest.raises(ValueError):
        metrics.baseband_harmonic_response(rx_off, offsets=[-1e6, 0.0, 1e6])


# --------------------------------------------------------------------------
# RF node
# --------------------------------------------------------------------------


def test_loop_off_odd_passbands(rf_off):
    # each odd band rises above the response at the neighbouring even harmonic
    for m in (1, 3, 5, 7):
        i = int(np.argmin(np.abs(rf_off.grid - (m - 1 if m == 7 else m + 1) * F_LO)))
        assert rf_off.band_peaks[m] > rf_off.vrf_db[i] + 1.0
    peaks = [rf_off.band_peaks[m] for m in (1, 3, 5, 7)]
    assert np.all(np.diff(peaks) < 0)


def test_ron_sets_floor(cfg):
    grid = np.linspace(300e6, 3e9, 55)
    floors = []
    for r_on in (10.0, 5.0, 1.0):
        c = cfg.with_(loop_enabled=False, npath={"r_on": r_on})
        floors.append(metrics.rf_node_response(build_receiver(c), grid, bands=()).floor_db)
    assert floors[0] > floors[1] > floors[2]


# --------------------------------------------------------------------------
# HRR
# --------------------------------------------------------------------------


def test_two_stage_composition(hrr_result):
    for m in (3, 5):
        assert hrr_result.proposed[m] >= hrr_result.single_stage[m] + hrr_result.rf_suppression[m] - 3.0


def test_iq_symmetry(hrr_result):
    for m in (3, 5):
        assert abs(hrr_result.proposed[m] - hrr_result.q_proposed[m]) < 0.1


def test_hrr_oracle_closed_form(cfg):
    # spatial gain 17 + 24 cos(m pi/4) times the window sinc sin(m pi/8) / m
    for m in (3, 5):
        g1 = 17 + 24 * math.cos(math.pi / 4)
        gm = 17 + 24 * math.cos(m * math.pi / 4)
        expected = 20 * math.log10(abs(g1) / abs(gm) * m * math.sin(math.pi / 8) / abs(math.sin(m * math.pi / 8)))
        assert metrics.hrr_oracle(cfg, m) == pytest.approx(expected, abs=1e-9)


@pytest.mark.slow
def test_ideal_ratios_reach_numerical_floor(cfg):
    ideal = cfg.with_(hr1={"ratios": SQ2}, hr2={"ratios": SQ2})
    res = metrics.hrr(ideal)
    for m in (3, 5):
        assert res.proposed[m] > 100.0
        assert res.single_stage[m] > 100.0


def test_loop_gain_magnitudes(cfg):
    L3, L5 = metrics.loop_gain(cfg, 3), metrics.loop_gain(cfg, 5)
    assert abs(L3) > 2 and abs(L5) > 2
    assert L3.real > 0 and L5.real > 0


# --------------------------------------------------------------------------
# peak shift
# --------------------------------------------------------------------------


def test_peak_at_lo_without_parasitics(peak_shift):
    c_in, c_x, f = peak_shift.table[0]
    assert c_in == 0 and c_x == 0
    assert abs(f / F_LO - 1) <= 1e-4


def test_peak_shift_monotone(peak_shift):
    rows = peak_shift.table[1:]
    by_cin = [f for c_in, c_x, f in rows if c_x == 0]
    by_cx = [f for c_in, c_x, f in rows if c_in == 0]
    assert np.all(np.diff(by_cin) < 0)
    assert np.all(np.diff(by_cx) > 0)


def test_recentering(peak_shift):
    assert len(peak_shift.recentered) == 5
    for c_in, c_x, f in peak_shift.recentered:
        assert 0 <= c_x
        assert abs(f / F_LO - 1) <= 2e-3


def test_no_peak_on_lowpass():
    net = Netlist([vsource("vs", "in", "0", "u"), resistor("r", "in", "out", 1e3),
                   capacitor("c", "out", "0", 1e-12)])
    net.probe("out", "out")
    with pytest.raises(NoPeakError):
        metrics.find_peak(extract_segments(net, period=T), F_LO, probe="out", port="u")


# --------------------------------------------------------------------------
# impedance
# --------------------------------------------------------------------------


def _one_port(r):
    net = Netlist([isource("i", "a", "0", "i"), resistor("r", "a", "0", r)])
    net.probe("a", "a")
    return extract_segments(net, period=T)


def test_matched_resistor():
    res = metrics.impedance(_one_port(50.0), [1e8, 5e8], "i", "a")
    assert np.all(res.gamma_db < -200)
    assert np.allclose(res.z, 50.0)


def test_open_circuit():
    res = metrics.impedance(_one_port(1e12), [5e8], "i", "a")
    assert abs(res.gamma_db[0]) < 1e-6


def test_input_impedance_default(cfg):
    res = metrics.input_impedance(cfg, [F_LO])
    assert res.z[0].real > 50.0  # open baseband: high impedance at f_lo
    assert "s11=" in res.summary()


@pytest.mark.slow
def test_tuned_match(cfg):
    r_bb, res = metrics.tune_input_match(cfg)
    assert res.gamma_db[0] < -10.0
    assert 10.0 < r_bb < 1e4


# --------------------------------------------------------------------------
# compression
# --------------------------------------------------------------------------


@given(p=st.floats(-80, 40))
def test_power_round_trip(p):
    assert metrics.available_power_dbm(float(metrics.amplitude_for_dbm(p))) == pytest.approx(p, abs=1e-9)


def test_power_reference():
    # 0 dBm available from 50 ohm: 1 mW = A^2 / (8 R)
    assert float(metrics.amplitude_for_dbm(0.0)) == pytest.approx(math.sqrt(0.4), rel=1e-12)


@pytest.mark.slow
def test_compression_sanity(compression):
    for res in compression.values():
        assert res.gain_db[0] == pytest.approx(res.linear_gain_db, abs=0.1)
        assert res.linear_gain_db == pytest.approx(res.small_signal_gain_db, abs=0.1)
        assert np.all(np.diff(res.gain_db) <= 1e-6)
        assert np.isfinite(res.b3db_dbm)


def test_b3db_interpolation():
    p = np.array([0.0, 1.0, 2.0, 3.0])
    assert metrics._b3db(p, np.array([0.0, -1.0, -5.0, -9.0])) == pytest.approx(1.5)
    assert metrics._b3db(p, np.zeros(4)) == math.inf


# --------------------------------------------------------------------------
# noise translation surrogate
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def translation(cfg):
    return metrics.noise_translation_test(cfg)


def test_translation_suppressed(translation):
    assert translation.ratio_db <= -30.0
    assert abs(translation.c1_square) == pytest.approx(2 / math.pi, rel=1e-12)


def test_translation_matches_referred_prediction(translation):
    assert abs(translation.ratio_db - translation.referred_prediction_db) < 1.0


def test_translation_tracks_c1(translation):
    assert abs(translation.ratio_db - translation.c1_prediction_db) <= 3.0


def test_referred_fundamental_window_constant():
    sq = PwmWaveform.from_values(F_LO, [1] * 32 + [-1] * 32)
    stair = PwmWaveform.from_values(F_LO, np.repeat([1, 1, 0, -1, -1, -1, 0, 1], 8))
    for w in (sq, stair):
        c1 = fourier_coefficient(w, 1)
        assert metrics.npath_referred_fundamental(w) == pytest.approx(c1 / np.sinc(1 / 8), abs=1e-14)


def test_cout_pole_attenuates_near_2flo(cfg):
    """Tone injected near 2 f_lo: the HR2 output pole attenuates it before translation."""
    fp = F_LO / 5
    expected = 20 * math.log10(abs(1 + 1j * 1e6 / fp) / abs(1 + 1j * (2 * F_LO - 1e6) / fp))
    rx = build_receiver(cfg.with_(hr2={"gm_unit": 0.0}))
    h = [abs(periodic_steady_state(rx.system, d, ["hdiff"], HR2_INJECT_PORT)["hdiff"].component(0))
         for d in (1e6, 2 * F_LO - 1e6)]
    assert 20 * math.log10(h[1] / h[0]) == pytest.approx(expected, abs=1e-6)
    # at the RF node other LO harmonics add a little; the square LO is dominated by c_1
    near = metrics.noise_translation_test(cfg, delta=2 * F_LO - 1e6, k=-1)
    base = metrics.noise_translation_test(cfg, delta=1e6, k=1)
    got = 20 * math.log10(abs(near.v_square) / abs(base.v_square))
    assert got == pytest.approx(expected, abs=1.0)


def test_translation_csv(translation):
    lines = translation.to_csv().splitlines()
    assert lines[0].startswith("delta_hz,")
    assert len(lines) == 2
