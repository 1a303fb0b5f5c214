import warnings

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from npathsim.blocks import NPathParams, build_npath, build_receiver
from npathsim.circuit import (Netlist, Tone, capacitor, extract_segments, isource, propagate_segment, resistor,
                              stamp, switch, vccs, vsource)
from npathsim.clocks import make_nonoverlap_clocks, split_and_shift, synthesize_pwm_lo
from npathsim.engine import periodic_steady_state
from npathsim.errors import NetlistError, PeriodMismatchError, SingularTopologyError, StiffnessWarning

from oracles import plain_npath_spectrum

F_LO = 500e6
T = 1 / F_LO


def rc_netlist(r=1e3, c=1e-12):
    net = Netlist()
    net.add(vsource("vs", "in", "0", "u"))
    net.add(resistor("r1", "in", "out", r))
    net.add(capacitor("c1", "out", "0", c))
    net.probe("out", "out")
    return net


# --------------------------------------------------------------------------
# netlist text
# --------------------------------------------------------------------------


NETLIST_TEXT = """\
# one switched path
V  vs  in 0 u
R  rs  in rf 50
SW s1  rf bb 10 P1
C  cbb bb 0 2pF
G  g1  out 0 bb 0 1m imax=100u
R  rl  out 0 1k
.probe vbb bb
.probe vd rf bb
"""


def test_netlist_text_round_trip():
    net = Netlist.from_text(NETLIST_TEXT)
    assert [e.kind for e in net.elements] == ["V", "R", "SW", "C", "G", "R"]
    assert net.elements[3].value == pytest.approx(2e-12)
    assert net.elements[4].i_max == pytest.approx(1e-4)
    again = Netlist.from_text(net.to_text())
    assert again.to_text() == net.to_text()
    assert again.probes == {"vbb": ("bb", "0"), "vd": ("rf", "bb")}


@pytest.mark.parametrize("text, line, col", [
    ("R r1 a 0 50\nX x1 a 0 1\n", 2, 1),
    ("R r1 a 0\n", 1, 1),
    ("R r1 a 0 fifty\n", 1, 1),
    ("  C c1 a 0 -1p\n", 1, 3),
    ("G g1 a 0 b 0 1m foo=1\n", 1, 1),
    ("R r1 a 0 1\n.probe p zz\n", None, None),
    ("R r1 a 0 1\nR r1 a 0 2\n", 2, 1),
    ("SW s1 a 0 10\n", 1, 1),
])
def test_netlist_parse_errors(text, line, col):
    with pytest.raises(NetlistError) as info:
        Netlist.from_text(text)
    assert info.value.line == line
    if col is not None:
        assert info.value.column == col


def test_ground_aliases():
    net = Netlist.from_text("R r1 a gnd 1\nR r2 a GND 1\n")
    assert net.nodes == ["a"]


# --------------------------------------------------------------------------
# stamping
# --------------------------------------------------------------------------


def test_single_resistor_stamp():
    net = Netlist([resistor("rs", "a", "0", 50.0)])
    st_ = stamp(net, {})
    assert st_.G.shape == (1, 1)
    assert st_.G[0, 0] == pytest.approx(1 / 50)


def test_series_switch_capacitor_stamp():
    net = Netlist()
    net.add(resistor("rs", "rf_drv", "rf", 50))
    net.add(resistor("rg", "rf_drv", "0", 1e6))
    net.add(switch("s1", "rf", "bb", 10.0, "P1"))
    net.add(capacitor("cbb", "bb", "0", 3e-12))
    s = stamp(net, {"s1": True})
    i, j = net.nodes.index("rf"), net.nodes.index("bb")
    assert s.G[i, j] == pytest.approx(-1 / 10)
    assert s.G[j, i] == pytest.approx(-1 / 10)
    assert s.Cmat[j, j] == pytest.approx(3e-12)
    opened = stamp(net, {"s1": False})
    assert opened.G[i, j] == 0


def test_singular_topology_names_nodes():
    net = Netlist()
    net.add(resistor("r1", "a", "b", 1.0))
    net.add(switch("s1", "b", "0", 1.0, "P1"))
    stamp(net, {"s1": True})
    with pytest.raises(SingularTopologyError) as info:
        stamp(net, {"s1": False})
    assert set(info.value.nodes) == {"a", "b"}


def test_missing_switch_state():
    net = Netlist([resistor("r", "a", "0", 1.0), switch("s", "a", "0", 1.0, "P1")])
    with pytest.raises(NetlistError):
        stamp(net, {})


def test_one_path_rc_charging():
    """Full 8-path netlist frozen in phase 1: one RC branch charging."""
    p = NPathParams(differential=False)
    clocks = make_nonoverlap_clocks(8, F_LO)
    net = build_npath(p, clocks)
    states = {e.name: e.control == "P1" for e in net.switches}
    s = stamp(net, states)
    nodes = net.nodes
    n = len(s.G)
    # solve C dw/dt = -G w + B u for a DC step with exact matrix exponential of the generalised system
    keep = [nodes.index("bb1")]
    bb1 = keep[0]
    # eliminate algebraic unknowns by hand (rf node and source branch)
    caps = [nodes.index(f"bb{k}") for k in range(1, 9)]
    alg = [i for i in range(n) if i not in caps]
    Gcc = s.G[np.ix_(caps, caps)]
    Gca = s.G[np.ix_(caps, alg)]
    Gac = s.G[np.ix_(alg, caps)]
    Gaa = s.G[np.ix_(alg, alg)]
    Bc, Ba = s.B[caps, 0], s.B[alg, 0]
    Cc = s.Cmat[np.ix_(caps, caps)]
    A = -np.linalg.solve(Cc, Gcc - Gca @ np.linalg.solve(Gaa, Gac))
    B = np.linalg.solve(Cc, Bc - Gca @ np.linalg.solve(Gaa, Ba))
    tau = (p.r_s + p.r_on) * p.resolved_c_bb
    aug = np.zeros((9, 9))
    aug[:8, :8], aug[:8, 8] = A, B
    for t in (0.2 * tau, tau, 3 * tau):
        x = la.expm(aug * t)[:8, 8]  # zero initial state, unit step
        assert x[caps.index(bb1)] == pytest.approx(1 - np.exp(-t / tau), rel=1e-9)
        others = np.delete(x, caps.index(bb1))
        assert np.all(np.abs(others) < 1e-12)


# --------------------------------------------------------------------------
# segment extraction
# --------------------------------------------------------------------------


def test_eight_phase_segments(plain_npath):
    assert len(plain_npath.segments) == 8
    starts = [s.start for s in plain_npath.segments]
    ends = [s.end for s in plain_npath.segments]
    assert starts[0] == 0 and ends[-1] == pytest.approx(T)
    assert np.allclose(starts[1:], ends[:-1], rtol=0, atol=1e-24)
    dims = {s.A.shape for s in plain_npath.segments}
    assert len(dims) == 1


def test_pwm_bank_segment_count(rx_on):
    sysm = rx_on.system
    bank = rx_on.bank
    edges = set()
    for seq in bank.positive_sequences + bank.negative_sequences:
        edges.update(round(t / seq.resolution) for t in seq.edges())
    clock_edges = {round(t / (T / 64)) % 64 for t in rx_on.clocks.edges()}
    expected = len(edges | clock_edges)
    assert len(sysm.segments) == expected
    assert 8 <= len(sysm.segments) <= 64 + 8


def test_always_closed_is_lti():
    net = Netlist()
    net.add(vsource("vs", "in", "0", "u"))
    net.add(resistor("r1", "in", "a", 100.0))
    net.add(switch("s1", "a", "b", 10.0, "ON"))
    net.add(capacitor("c1", "a", "0", 1e-12))
    net.add(capacitor("c2", "b", "0", 2e-12))
    net.add(resistor("r2", "b", "0", 1e3))
    sysm = extract_segments(net, period=T)
    assert len(sysm.segments) == 1
    G = np.array([[1 / 100 + 1 / 10, -1 / 10], [-1 / 10, 1 / 10 + 1 / 1e3]])
    C = np.diag([1e-12, 2e-12])
    ref = np.sort(la.eigvals(-G, C).real)
    assert np.allclose(np.sort(np.linalg.eigvals(sysm.segments[0].A).real), ref, rtol=1e-10)


def test_period_mismatch():
    net = rc_netlist()
    net.add(switch("s1", "out", "0", 1.0, "P1"))
    net.add(switch("s2", "out", "0", 1.0, "X"))
    other = synthesize_pwm_lo(2 * F_LO, 64)
    with pytest.raises(PeriodMismatchError):
        extract_segments(net, make_nonoverlap_clocks(8, F_LO), controls={"X": other})


def test_unresolved_control():
    net = rc_netlist()
    net.add(switch("s1", "out", "0", 1.0, "Q7"))
    with pytest.raises(NetlistError):
        extract_segments(net, make_nonoverlap_clocks(8, F_LO))


def test_pwm_switch_closed_when_sequence_nonzero():
    pwm = synthesize_pwm_lo(F_LO, 64)
    bank = split_and_shift(pwm, 8)
    net = rc_netlist()
    net.add(switch("sp", "out", "0", 5.0, "PWMp1"))
    sysm = extract_segments(net, pwm_banks=bank)
    seq = bank.positive_sequences[0]
    for seg in sysm.segments:
        mid = 0.5 * (seg.start + seg.end)
        assert seg.states["sp"] == bool(seq.gate(mid))


# --------------------------------------------------------------------------
# propagation
# --------------------------------------------------------------------------


def _rc_system(r=1e3, c=1e-12):
    return extract_segments(rc_netlist(r, c), period=1e-6)


def test_scalar_exponential_decay():
    sysm = _rc_system()
    seg = sysm.segments[0]
    rc = 1e3 * 1e-12
    x, method = propagate_segment([1.0], seg, [], 0.0, rc, sysm)
    assert method == "exact"
    assert x[0] == pytest.approx(np.exp(-1), rel=1e-12)


def test_zero_duration_is_identity():
    sysm = _rc_system()
    x, _ = propagate_segment([0.3], sysm.segments[0], [Tone("u", 1e9)], 1e-7, 1e-7, sysm)
    assert x[0] == 0.3


def test_rc_pole_magnitude():
    sysm = _rc_system()
    rc = 1e-9
    f = 1 / (2 * np.pi * rc)
    seg = sysm.segments[0]
    x, _ = propagate_segment([0.0], seg, [Tone("u", f)], 0.0, 40 * rc, sysm)
    t = 40 * rc + np.linspace(0, 1 / f, 400, endpoint=False)
    samples = []
    for t1 in t:
        y, _ = propagate_segment(x, seg, [Tone("u", f)], 40 * rc, t1, sysm)
        samples.append(y[0])
    assert max(np.abs(samples)) == pytest.approx(1 / np.sqrt(2), rel=1e-4)


def test_saturating_falls_back_to_rk4():
    net = rc_netlist()
    net.add(vccs("g", "o2", "0", "out", "0", 1e-3, i_max=1e-3))
    net.add(resistor("rl", "o2", "0", 1e3))
    net.add(capacitor("cl", "o2", "0", 1e-12))
    sysm = extract_segments(net, period=1e-6)
    seg = sysm.segments[0]
    x_nl, method = propagate_segment([0.1, 0.0], seg, [], 0.0, 2e-9, sysm)
    assert method == "rk4"
    x_lin, _ = propagate_segment([0.1, 0.0], seg, [], 0.0, 2e-9, None)
    # the linearised step ignores saturation; small-amplitude only differs a little
    assert np.allclose(x_nl, x_lin, rtol=2e-3, atol=1e-6)


def test_stiffness_warning():
    sysm = _rc_system(1.0, 1e-15)
    with pytest.warns(StiffnessWarning):
        propagate_segment([1.0], sysm.segments[0], [], 0.0, 1e-9, sysm)


def test_charge_conservation_when_isolated():
    net = Netlist()
    net.add(capacitor("c1", "a", "0", 1e-12))
    net.add(capacitor("c2", "b", "0", 2e-12))
    net.add(switch("s1", "a", "b", 1.0, "P1"))
    net.add(resistor("rb", "a", "0", 1e12))
    sysm = extract_segments(net, make_nonoverlap_clocks(8, F_LO))
    seg = next(s for s in sysm.segments if not s.states["s1"])
    x0 = np.array([0.7, -0.2])
    x, _ = propagate_segment(x0, seg, [], seg.start, seg.end, sysm)
    c = np.array([1e-12, 2e-12])
    assert np.allclose(c * x, c * x0, rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_passivity_random_rc_switch_network(seed):
    rng = np.random.default_rng(seed)
    n = 4
    net = Netlist()
    for k in range(n):
        net.add(capacitor(f"c{k}", f"n{k}", "0", rng.uniform(0.5, 5) * 1e-12))
        net.add(resistor(f"r{k}", f"n{k}", "0", rng.uniform(1e2, 1e4)))
    for k in range(n):
        j = (k + 1) % n
        net.add(switch(f"s{k}", f"n{k}", f"n{j}", rng.uniform(1, 100), f"P{k % 8 + 1}"))
    sysm = extract_segments(net, make_nonoverlap_clocks(8, F_LO))
    cvals = np.array([e.value for e in net.elements if e.kind == "C"])
    x = rng.normal(size=n)
    energy = 0.5 * np.sum(cvals * x ** 2)
    for _ in range(3):
        for seg in sysm.segments:
            x, _ = propagate_segment(x, seg, [], seg.start, seg.end, sysm)
            e = 0.5 * np.sum(cvals * x ** 2)
            assert e <= energy * (1 + 1e-12)
            energy = e


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), f1=st.floats(1e6, 2e9), f2=st.floats(1e6, 2e9))
def test_propagation_linearity(a, b, f1, f2):
    sysm = _rc_system()
    seg = sysm.segments[0]
    x0 = np.array([0.25])
    both, _ = propagate_segment(x0 * (a + b), seg, [Tone("u", f1, a), Tone("u", f2, b)], 0.0, 3e-9, sysm)
    one, _ = propagate_segment(x0 * a, seg, [Tone("u", f1, a)], 0.0, 3e-9, sysm)
    two, _ = propagate_segment(x0 * b, seg, [Tone("u", f2, b)], 0.0, 3e-9, sysm)
    assert both[0] == pytest.approx(one[0] + two[0], rel=1e-9, abs=1e-12)


# --------------------------------------------------------------------------
# lifted model vs a fine-step integration written from the circuit equations
# --------------------------------------------------------------------------


def test_lifted_matches_fine_step_plain_npath():
    p = NPathParams(bandwidth=100e6)
    from npathsim.blocks import ReceiverConfig
    from npathsim.metrics import _npath_system
    sysm = _npath_system(ReceiverConfig(npath=p), 0.0, 0.0)
    f_in = F_LO * 41 / 40
    ks = range(-5, 6)
    ref = plain_npath_spectrum(f_in, F_LO, p.r_s, p.r_on, p.resolved_c_bb, ks)
    got = periodic_steady_state(sysm, f_in, ["vrf", "bb"], harmonics=ks)
    for probe in ("vrf", "bb"):
        top = max(abs(v) for v in ref[probe].values())
        for k in ks:
            r = ref[probe][k]
            if abs(r) < top * 1e-3:
                continue
            g = got[probe].component(k)
            assert abs(20 * np.log10(abs(g) / abs(r))) < 0.1
            assert abs(np.degrees(np.angle(g / r))) < 1.0


def test_receiver_state_dimension(rx_off, rx_on):
    assert rx_off.system.state_dim == rx_on.system.state_dim
    assert len(rx_off.system.segments) == 8
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_receiver(rx_on.config)
