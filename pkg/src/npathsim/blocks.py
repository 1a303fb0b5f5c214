"""Receiver building blocks assembled from circuit primitives.

Node naming used throughout (differential receiver):

* ``in_p``/``in_n`` source nodes, ``rf_p``/``rf_n`` N-path RF nodes
* ``bb1..bb8`` baseband capacitors (``bbk`` samples ``rf_p`` in phase k and
  ``rf_n`` in phase k+4)
* ``h1..h8`` HR2 outputs, ``tia_ip/tia_in/tia_qp/tia_qn`` HR1 TIA outputs

Probes: ``vrf`` (rf_p - rf_n), ``bb`` (bb1 - bb5), ``vb1..vb8``, ``I``,
``Q``, ``h1`` and ``hdiff`` (h1 - h5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .circuit import (Netlist, PiecewiseLtiSystem, capacitor, extract_segments, isource, resistor,
                      switch, vccs, vsource)
from .clocks import (ClockScheme, PwmBank, PwmWaveform, make_nonoverlap_clocks, split_and_shift,
                     square_lo_waveform, synthesize_pwm_lo)

__all__ = ["NPathParams", "Hr2Params", "Hr1Params", "PwmParams", "UpconverterParams",
           "ReceiverConfig", "Receiver", "build_npath", "build_hr2", "build_pwm_upconverter",
           "build_hr1", "build_receiver", "hr2_weights", "hr1_weights", "spatial_response",
           "default_c_bb"]

INPUT_PORT = "in"
CURRENT_PORT = "iin"
HR2_INJECT_PORT = "hr2_inj"


def default_c_bb(n_paths: int, r_s: float, bandwidth: float, differential: bool = True) -> float:
    """Baseband capacitance giving an RF -3 dB bandwidth ``bandwidth``.

    First-order N-path relation ``BW = 1 / (pi * N * R * C)`` with the
    per-path source resistance ``R``.  In the differential build each
    capacitor is driven from ``r_s/2`` for two of the ``N`` phases, so the
    effective ``N`` halves and ``R = r_s/2``: ``C = 4 / (pi N BW r_s)``.
    Switch resistance is left out (it widens the band slightly).
    """
    if differential:
        return 4.0 / (math.pi * n_paths * bandwidth * r_s)
    return 1.0 / (math.pi * n_paths * bandwidth * r_s)


@dataclass(frozen=True)
class NPathParams:
    n_paths: int = 8
    f_lo: float = 500e6
    r_s: float = 50.0
    r_on: float = 2.0
    c_bb: float | None = None  # None -> default_c_bb(bandwidth)
    bandwidth: float = 20e6
    c_in: float = 0.0
    c_x: float = 0.0
    r_bb: float | None = None  # resistive baseband termination per path; None -> open
    guard: float = 0.0
    differential: bool = True
    gmin: float = 0.0

    def __post_init__(self):
        if self.c_x < 0 or self.c_in < 0:
            raise ValueError("c_x and c_in must be >= 0")
        if self.c_bb is not None and not self.c_bb > 0:
            raise ValueError("c_bb must be > 0")
        if self.r_bb is not None and not self.r_bb > 0:
            raise ValueError("r_bb must be > 0")
        if self.differential and self.n_paths % 2:
            raise ValueError("a differential N-path needs an even number of paths")

    @property
    def resolved_c_bb(self) -> float:
        if self.c_bb is not None:
            return self.c_bb
        return default_c_bb(self.n_paths, self.r_s, self.bandwidth, self.differential)


@dataclass(frozen=True)
class Hr2Params:
    gm_unit: float = 0.5e-3
    ratios: tuple = (5, 7, 5)
    rotation: int = 3  # side inputs at +/- rotation phase steps (3 -> 135 deg for 8 phases)
    r_out: float = 1e3
    c_out: float | None = None  # None -> pole at f_lo / 5
    i_max: float | None = None  # per unit cell; None -> linear

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ValueError("HR2 ratios must be three positive weights")

    def resolved_c_out(self, f_lo: float) -> float:
        if self.c_out is not None:
            return self.c_out
        return 1.0 / (2 * math.pi * self.r_out * f_lo / 5)


@dataclass(frozen=True)
class Hr1Params:
    gm_unit: float = 1e-3
    ratios: tuple = (12, 17, 12)
    tia_gain: float = 1e3
    tia_bandwidth: float = 50e6
    i_max: float | None = None  # per unit cell; None -> linear

    def __post_init__(self):
        if not self.tia_bandwidth > 0:
            raise ValueError("tia_bandwidth must be > 0")
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ValueError("HR1 ratios must be three positive weights")


@dataclass(frozen=True)
class PwmParams:
    grid_size: int = 64
    suppression_db: float = -40.0
    balance_db: float = 0.5
    alias_db: float = 1.0  # |c_1| vs the N-path-referred fundamental
    phase_deg: float = 10.0  # 3rd/5th phase against the first window centre


@dataclass(frozen=True)
class UpconverterParams:
    gm: float = 20e-3
    sign: int = -1  # -1: negative feedback at the 3rd/5th harmonics


@dataclass(frozen=True)
class ReceiverConfig:
    npath: NPathParams = field(default_factory=NPathParams)
    hr2: Hr2Params = field(default_factory=Hr2Params)
    hr1: Hr1Params = field(default_factory=Hr1Params)
    pwm: PwmParams = field(default_factory=PwmParams)
    up: UpconverterParams = field(default_factory=UpconverterParams)
    loop_enabled: bool = True
    upconverter_mode: str = "pwm_lo"

    def __post_init__(self):
        if self.upconverter_mode not in ("pwm_lo", "square_lo"):
            raise ValueError(f"unknown upconverter mode {self.upconverter_mode!r}")

    def with_(self, **sections) -> "ReceiverConfig":
        """Copy with top-level fields or ``section={field: value}`` updates."""
        kw = {}
        for key, val in sections.items():
            if isinstance(val, dict):
                kw[key] = replace(getattr(self, key), **val)
            else:
                kw[key] = val
        return replace(self, **kw)


# --------------------------------------------------------------------------
# weight sequences
# --------------------------------------------------------------------------


def spatial_response(weights, s: int) -> complex:
    """``sum_j w_j exp(j 2 pi s j / N)``: gain of a phase combiner for the
    spatial sequence ``exp(j 2 pi s m / N)`` across its N inputs."""
    w = np.asarray(weights, dtype=float)
    j = np.arange(len(w))
    return complex(np.sum(w * np.exp(2j * np.pi * s * j / len(w))))


def hr2_weights(p: Hr2Params, n: int = 8, side_sign: int | None = None) -> np.ndarray:
    """Single-ended weight sequence of one HR2 output (index = input offset).

    Side weights sit at offsets +/- ``rotation``; their sign is chosen so the
    fundamental spatial harmonic is nulled (for the ideal 1:sqrt2:1 ratios).
    """
    g1, g2, g3 = p.ratios

    def build(sign):
        w = np.zeros(n)
        w[0] += g2
        w[(-p.rotation) % n] += sign * g1
        w[p.rotation % n] += sign * g3
        return w

    if side_sign is None:
        ideal = Hr2Params(ratios=(1.0, math.sqrt(2), 1.0), rotation=p.rotation)
        side_sign = min((+1, -1), key=lambda s: abs(spatial_response(hr2_weights(ideal, n, s), 1)))
        w_ideal = hr2_weights(ideal, n, side_sign)
        if abs(spatial_response(w_ideal, 1)) > 1e-9 * abs(spatial_response(w_ideal, 3)):
            raise ValueError(f"rotation {p.rotation} cannot null the fundamental")
    return build(side_sign)


def _differential(w: np.ndarray) -> np.ndarray:
    n = len(w)
    out = w.copy()
    out -= np.roll(w, n // 2)
    return out


def hr1_weights(p: Hr1Params, channel: str = "I", n: int = 8) -> np.ndarray:
    """Effective weights of the differential I or Q output over bb1..bbN."""
    g1, g2, g3 = p.ratios
    base = np.zeros(n)
    base[0], base[1], base[-1] = g2, g3, g1
    shift = 0 if channel == "I" else n // 4
    return _differential(np.roll(base, shift))


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def build_npath(p: NPathParams, clocks: ClockScheme, drive: str = "voltage",
                netlist: Netlist | None = None) -> Netlist:
    """N-path filter with source, optional input parasitic and C_X toggling.

    ``drive="voltage"``: port ``in`` is the differential source voltage behind
    ``r_s``.  ``drive="current"``: port ``iin`` injects a differential current
    straight into the RF nodes (no source resistance), for impedance studies.
    """
    if clocks.n_phases != p.n_paths:
        raise ValueError(f"{clocks.n_phases} clock phases for {p.n_paths} paths")
    net = netlist if netlist is not None else Netlist()
    net.gmin = p.gmin
    N = p.n_paths
    c_bb = p.resolved_c_bb
    sides = (("p", 0), ("n", N // 2)) if p.differential else (("p", 0),)
    for side, _ in sides:
        rf = f"rf_{side}"
        if drive == "voltage":
            gain = (0.5 if side == "p" else -0.5) if p.differential else 1.0
            r = p.r_s / 2 if p.differential else p.r_s
            net.add(vsource(f"vs_{side}", f"in_{side}", "0", INPUT_PORT, gain))
            net.add(resistor(f"rs_{side}", f"in_{side}", rf, r))
        if p.c_in > 0:
            net.add(capacitor(f"cin_{side}", rf, "0", p.c_in))
    if drive == "current":
        net.add(isource("iin", "rf_p", "rf_n" if p.differential else "0", CURRENT_PORT))
    elif drive != "voltage":
        raise ValueError(f"unknown drive {drive!r}")
    for k in range(1, N + 1):
        net.add(capacitor(f"cbb{k}", f"bb{k}", "0", c_bb))
        if p.r_bb is not None:
            net.add(resistor(f"rbb{k}", f"bb{k}", "0", p.r_bb))
    for side, off in sides:
        for k in range(1, N + 1):
            target = (k - 1 + off) % N + 1
            net.add(switch(f"s{side}{k}", f"rf_{side}", f"bb{target}", p.r_on, f"P{k}"))
        if p.c_x > 0:
            a, b = f"cx{side}_a", f"cx{side}_b"
            net.add(capacitor(f"cx_{side}", a, b, p.c_x))
            for k in range(1, N + 1):
                target = f"bb{(k - 1 + off) % N + 1}"
                hot, cold = (a, b) if k % 2 else (b, a)  # plate orientation flips every phase
                net.add(switch(f"sx{side}{k}h", hot, target, p.r_on, f"P{k}"))
                net.add(switch(f"sx{side}{k}c", cold, "0", p.r_on, f"P{k}"))
    if p.differential:
        net.probe("vrf", "rf_p", "rf_n")
        net.probe("bb", "bb1", f"bb{N // 2 + 1}")
    else:
        net.probe("vrf", "rf_p")
        net.probe("bb", "bb1")
    for k in range(1, N + 1):
        net.probe(f"vb{k}", f"bb{k}")
    return net


def _cell_limit(i_unit, weight):
    # a cell of integer weight w is w unit cells in parallel
    return None if i_unit is None else i_unit * abs(weight)


def build_hr2(p: Hr2Params, f_lo: float, netlist: Netlist, n: int = 8, differential: bool = True) -> Netlist:
    """Add the harmonic-selective combiner: output k = gm * sum_j w_j in_(k+j)."""
    w = hr2_weights(p, n)
    c_out = p.resolved_c_out(f_lo)
    for k in range(1, n + 1):
        net_out = f"h{k}"
        netlist.add(resistor(f"rh{k}", net_out, "0", p.r_out))
        netlist.add(capacitor(f"ch{k}", net_out, "0", c_out))
        for j in np.flatnonzero(w):
            src = (k - 1 + j) % n + 1
            neg = (src - 1 + n // 2) % n + 1 if differential else None
            netlist.add(vccs(f"g2_{k}_{j}", net_out, "0", f"bb{src}", f"bb{neg}" if neg else "0",
                             p.gm_unit * w[j], i_max=_cell_limit(p.i_max, w[j])))
    netlist.probe("h1", "h1")
    netlist.probe("hdiff", "h1", f"h{n // 2 + 1}")
    netlist.add(isource("inj_h", "h1", f"h{n // 2 + 1}" if differential else "0", HR2_INJECT_PORT))
    return netlist


def build_pwm_upconverter(bank: PwmBank, netlist: Netlist, gm: float, sign: int = -1,
                          differential: bool = True) -> Netlist:
    """Gated transconductors: rf_p gets sum_k h_k * PWM_pk, rf_n sum_k h_k * PWM_nk."""
    for k in range(1, bank.n + 1):
        netlist.add(vccs(f"up_p{k}", "rf_p", "0", f"h{k}", "0", sign * gm, control=f"PWMp{k}"))
        if differential:
            netlist.add(vccs(f"up_n{k}", "rf_n", "0", f"h{k}", "0", sign * gm, control=f"PWMn{k}"))
        else:
            netlist.add(vccs(f"up_n{k}", "rf_p", "0", f"h{k}", "0", -sign * gm, control=f"PWMn{k}"))
    return netlist


def build_hr1(p: Hr1Params, netlist: Netlist, n: int = 8) -> Netlist:
    """12:17:12 combiner into four single-pole TIAs (I_P, Q_P, I_N, Q_N)."""
    g1, g2, g3 = p.ratios
    c_tia = 1.0 / (2 * math.pi * p.tia_gain * p.tia_bandwidth)
    outs = (("ip", 0), ("qp", n // 4), ("in", n // 2), ("qn", 3 * n // 4))
    for name, centre in outs:
        node = f"tia_{name}"
        netlist.add(resistor(f"rt_{name}", node, "0", p.tia_gain))
        netlist.add(capacitor(f"ct_{name}", node, "0", c_tia))
        for off, g in ((-1, g1), (0, g2), (1, g3)):
            src = (centre + off) % n + 1
            netlist.add(vccs(f"g1_{name}_{off + 1}", node, "0", f"bb{src}", "0", p.gm_unit * g,
                             i_max=_cell_limit(p.i_max, g)))
    netlist.probe("I", "tia_ip", "tia_in")
    netlist.probe("Q", "tia_qp", "tia_qn")
    return netlist


@dataclass
class Receiver:
    config: ReceiverConfig
    clocks: ClockScheme
    pwm: PwmWaveform
    bank: PwmBank
    netlist: Netlist
    drive: str = "voltage"

    @cached_property
    def system(self) -> PiecewiseLtiSystem:
        return extract_segments(self.netlist, self.clocks, self.bank)

    @property
    def f_lo(self) -> float:
        return self.config.npath.f_lo

    @property
    def input_port(self) -> str:
        return INPUT_PORT if self.drive == "voltage" else CURRENT_PORT


def loop_waveform(cfg: ReceiverConfig) -> PwmWaveform:
    f_lo = cfg.npath.f_lo
    if cfg.upconverter_mode == "square_lo":
        return square_lo_waveform(f_lo, cfg.pwm.grid_size)
    p = cfg.pwm
    return _cached_pwm(f_lo, p.grid_size, p.suppression_db, p.balance_db, p.alias_db, p.phase_deg,
                       cfg.npath.n_paths)


_PWM_CACHE: dict = {}


def _cached_pwm(f_lo, grid, supp, bal, alias, phase, n) -> PwmWaveform:
    key = (f_lo, grid, supp, bal, alias, phase, n)
    if key not in _PWM_CACHE:
        _PWM_CACHE[key] = synthesize_pwm_lo(f_lo, grid, supp, bal, alias_tolerance_db=alias,
                                            phase_tolerance_deg=phase, n_windows=n)
    return _PWM_CACHE[key]


def build_receiver(cfg: ReceiverConfig, drive: str = "voltage") -> Receiver:
    """Assemble N-path + HR2 (+ PWM feedback when ``loop_enabled``) + HR1.

    HR2 is always present so the open-loop path can be observed; with the
    loop disabled its outputs drive nothing.
    """
    p = cfg.npath
    clocks = make_nonoverlap_clocks(p.n_paths, p.f_lo, 1.0 / p.n_paths, p.guard)
    pwm = loop_waveform(cfg)
    bank = split_and_shift(pwm, p.n_paths)
    net = build_npath(p, clocks, drive)
    build_hr2(cfg.hr2, p.f_lo, net, p.n_paths, p.differential)
    if cfg.loop_enabled:
        build_pwm_upconverter(bank, net, cfg.up.gm, cfg.up.sign, p.differential)
    build_hr1(cfg.hr1, net, p.n_paths)
    return Receiver(cfg, clocks, pwm, bank, net, drive)
