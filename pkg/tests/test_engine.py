import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npathsim.blocks import HR2_INJECT_PORT, NPathParams, ReceiverConfig, build_receiver
from npathsim.circuit import Netlist, Tone, capacitor, extract_segments, isource, resistor, vsource
from npathsim.engine import (LiftedSolver, floquet_multipliers, harmonic_sweep, nonlinear_transient_dft,
                             periodic_steady_state, transient, transient_dft)
from npathsim.errors import InsufficientSettlingError, ResonanceSingularityError
from npathsim.metrics import _npath_system

F_LO = 500e6
T = 1 / F_LO
RC = 1e3 * 1e-12


@pytest.fixture(scope="module")
def rc_sys():
    net = Netlist()
    net.add(vsource("vs", "in", "0", "u"))
    net.add(resistor("r1", "in", "out", 1e3))
    net.add(capacitor("c1", "out", "0", 1e-12))
    net.probe("out", "out")
    return extract_segments(net, period=T)


@pytest.fixture(scope="module")
def wide_npath():
    return _npath_system(ReceiverConfig(npath=NPathParams(bandwidth=100e6)), 0.0, 0.0)


@pytest.fixture(scope="module")
def integrator():
    net = Netlist([capacitor("c1", "a", "0", 1e-12), isource("i1", "a", "0", "i")])
    net.probe("a", "a")
    return extract_segments(net, period=T)


def rc_closed_form(f):
    return 1 / (1 + 2j * np.pi * f * RC)


# --------------------------------------------------------------------------
# closed forms on a static RC
# --------------------------------------------------------------------------


@pytest.mark.parametrize("f", [1e6, 159.15e6, 1.3e9])
def test_static_rc_lifted(rc_sys, f):
    r = periodic_steady_state(rc_sys, f, ["out"])["out"]
    assert r.component(0) == pytest.approx(rc_closed_form(f), rel=1e-9)
    others = [abs(v) for k, v in r.components.items() if k != 0]
    assert max(others) < 1e-12


def test_transient_zero_input(rc_sys):
    t, out = transient(rc_sys, [], 5 * T, ["out"])
    assert np.all(out["out"] == 0.0)
    assert len(t) == 5 * 256


def test_rc_charging_dc_limit(rc_sys):
    t, out = transient(rc_sys, [Tone("u", 1.0)], 10 * T, ["out"])
    assert np.allclose(out["out"], 1 - np.exp(-t / RC), atol=1e-6)


def test_transient_dft_rc(rc_sys):
    f = F_LO * 13 / 40
    r = transient_dft(rc_sys, f, ["out"], settle_periods=40, analysis_periods=40)["out"]
    assert r.method == "transient_dft"
    assert r.component(0) == pytest.approx(rc_closed_form(f), rel=1e-6)


# --------------------------------------------------------------------------
# lifted solver against the real-valued transient route
# --------------------------------------------------------------------------


@pytest.mark.parametrize("n", [37, 123])
def test_transient_dft_matches_lifted_npath(plain_npath, n):
    f = F_LO * n / 40
    ks = range(-5, 6)
    ref = transient_dft(plain_npath, f, ["vrf", "bb"], settle_periods=250, analysis_periods=40, harmonics=ks)
    got = periodic_steady_state(plain_npath, f, ["vrf", "bb"], harmonics=ks)
    for p in ("vrf", "bb"):
        top = max(abs(ref[p].values))
        for k in ks:
            a, b = got[p].component(k), ref[p].component(k)
            if abs(b) < top * 1e-5:
                continue
            assert abs(20 * np.log10(abs(a) / abs(b))) < 1e-3
            assert abs(np.degrees(np.angle(a / b))) < 1e-2


def test_settling_error(plain_npath):
    with pytest.raises(InsufficientSettlingError) as info:
        transient_dft(plain_npath, F_LO * 41 / 40, ["bb"], settle_periods=5, analysis_periods=40)
    assert info.value.delta > 1e-6


def test_half_lo_multiple_rejected(plain_npath):
    with pytest.raises(ValueError):
        transient_dft(plain_npath, 1.5 * F_LO, ["bb"])


@pytest.mark.slow
def test_saturating_small_signal_matches_linear(cfg):
    sat = build_receiver(cfg.with_(hr1={"i_max": 100e-6}, hr2={"i_max": 50e-6})).system
    lin = build_receiver(cfg).system
    assert sat.saturating and not lin.saturating
    a, d = 1e-4, 10e6
    res = nonlinear_transient_dft(sat, [[Tone("in", F_LO + d, a)]], ["I"], [d], 100, 50)
    g_nl = abs(res["I"][0, 0]) / a
    g_lin = abs(periodic_steady_state(lin, F_LO + d, ["I"])["I"].component(-1))
    assert abs(20 * np.log10(g_nl / g_lin)) < 0.2


# --------------------------------------------------------------------------
# error paths
# --------------------------------------------------------------------------


def test_resonance_singularity(integrator):
    with pytest.raises(ResonanceSingularityError) as info:
        periodic_steady_state(integrator, F_LO, ["a"])
    assert info.value.condition > 1e13
    r = periodic_steady_state(integrator, 0.3 * F_LO, ["a"])["a"].component(0)
    assert r == pytest.approx(1 / (2j * np.pi * 0.3 * F_LO * 1e-12), rel=1e-9)


def test_sweep_records_point_errors(integrator):
    res = harmonic_sweep(integrator, [0.3 * F_LO, F_LO, 1.7 * F_LO], ["a"], "i")
    assert list(res.errors) == [1]
    assert "ResonanceSingularityError" in res.errors[1]
    assert res.responses[1] is None and res.responses[0] is not None
    assert "# error point=1" in res.to_csv()


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       n=st.sampled_from([41, 59, 121, 203]))
def test_superposition(rx_on, a, b, n):
    sysm = rx_on.system
    sol = LiftedSolver(sysm)
    f = F_LO * n / 40
    e1, e2 = sysm.port_vector("in"), sysm.port_vector(HR2_INJECT_PORT)
    both = sol.solve(f, ["vrf", "I"], u=a * e1 + b * e2)
    one = sol.solve(f, ["vrf", "I"], "in")
    two = sol.solve(f, ["vrf", "I"], HR2_INJECT_PORT)
    for p in ("vrf", "I"):
        expect = a * one[p].values + b * two[p].values
        scale = max(np.max(np.abs(expect)), 1e-30)
        assert np.max(np.abs(both[p].values - expect)) <= 1e-9 * scale


def test_amplitude_scaling(rx_off):
    f = F_LO + 1e6
    a = periodic_steady_state(rx_off.system, f, ["bb"])["bb"].values
    b = periodic_steady_state(rx_off.system, f, ["bb"], amplitude=2.5 - 1j)["bb"].values
    assert np.allclose(b, (2.5 - 1j) * a, rtol=1e-12, atol=0)


def test_sweep_is_deterministic(rx_off):
    grid = np.linspace(0.9e9, 1.1e9, 7)
    a = harmonic_sweep(rx_off, grid, ["vrf", "bb"]).to_csv()
    b = harmonic_sweep(rx_off, grid, ["vrf", "bb"]).to_csv()
    assert a == b


def test_time_shift_covariance(wide_npath):
    """Delaying the input by tau = 3 T multiplies every component by e^{-j w tau}."""
    f = F_LO * 41 / 40
    w = 2 * np.pi * f
    tau = 3 * T
    ks = (-1, 0, 1)
    comps = []
    for phase in (0.0, -w * tau):
        t, out = transient(wide_npath, [Tone("in", f, 1.0, phase)], 100 * T, ["bb"], samples_per_period=512)
        sel = t >= 60 * T
        x, tt = out["bb"][sel], t[sel]
        comps.append({k: 2 * np.mean(x * np.exp(-2j * np.pi * abs(f + k * F_LO) * tt)) for k in ks})
    lifted = periodic_steady_state(wide_npath, f, ["bb"], harmonics=ks)["bb"]
    for k in ks:
        c0, c1 = comps[0][k], comps[1][k]
        if f + k * F_LO < 0:
            c0, c1 = np.conj(c0), np.conj(c1)
        if abs(lifted.component(k)) < 1e-3 * np.max(np.abs(lifted.values)):
            continue
        assert c1 == pytest.approx(c0 * np.exp(-1j * w * tau), rel=1e-3)
        assert c0 == pytest.approx(lifted.component(k), rel=1e-2)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def test_sideband_symmetry(rx_off):
    res = harmonic_sweep(rx_off, [F_LO - 1e6, F_LO + 1e6], ["bb"])
    lo, hi = (abs(v) for v in res.curve("bb", "bb"))
    assert abs(20 * np.log10(lo / hi)) < 0.5


def test_exact_harmonic_flag(rx_off):
    res = harmonic_sweep(rx_off, [0.9e9, 1e9, 1.1e9], ["bb"])
    assert list(res.flags) == [1]
    assert "exact harmonic 2" in res.flags[1]
    assert "# flag point=1" in res.to_csv()


@pytest.mark.slow
def test_full_grid_smoke(rx_on):
    grid = np.linspace(300e6, 3e9, 271)
    assert np.allclose(np.diff(grid), 10e6)
    res = harmonic_sweep(rx_on, grid, ["vrf", "bb"], harmonics=(-1, 0, 1), metadata={"study": "smoke"})
    assert not res.errors
    lines = res.to_csv().splitlines()
    assert lines[0] == "# study=smoke"
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "f_in_hz,probe,k,mag_db,phase_deg,method"
    assert len(body) == 1 + 271 * 2 * 3
    assert all(np.isfinite(float(ln.split(",")[3])) for ln in body[1:])


def test_sweep_grid_checks(rx_off):
    with pytest.raises(ValueError):
        harmonic_sweep(rx_off, [1e9, 4.5e9], ["bb"])
    with pytest.raises(ValueError):
        harmonic_sweep(rx_off, [1e9, 0.9e9], ["bb"])
    with pytest.raises(ValueError):
        harmonic_sweep(rx_off, [-1e6, 1e9], ["bb"])


def test_parallel_sweep_matches_serial(rx_off):
    grid = np.linspace(0.4e9, 1.6e9, 9)
    a = harmonic_sweep(rx_off, grid, ["bb"], jobs=1)
    b = harmonic_sweep(rx_off, grid, ["bb"], jobs=2)
    assert a.to_csv() == b.to_csv()


def test_floquet_stability(rx_off, rx_on):
    for rx in (rx_off, rx_on):
        rho = np.max(np.abs(floquet_multipliers(rx.system)))
        assert rho < 1.0
