"""Receiver-level studies built on the engine.

Every study returns a small result object with ``to_csv()`` and
``summary()``; the CLI writes the former to disk and prints the latter.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .blocks import (CURRENT_PORT, HR2_INJECT_PORT, INPUT_PORT, ReceiverConfig, build_npath,
                     build_receiver, hr1_weights)
from .circuit import Netlist, Tone, extract_segments, isource
from .clocks import fourier_coefficient, make_nonoverlap_clocks, window_referred_fundamental
from .engine import harmonic_sweep, nonlinear_transient_dft, periodic_steady_state
from .errors import NoPeakError

__all__ = [
    "HarmonicResponseCurve", "RfResponse", "HrrResult", "PeakShiftResult", "ImpedanceResult",
    "CompressionResult", "NoiseTranslationResult", "baseband_harmonic_response", "rf_node_response",
    "hrr", "hrr_oracle", "peak_shift_study", "find_peak", "recenter_c_x", "impedance",
    "input_impedance", "tune_input_match", "blocker_compression", "noise_translation_test", "npath_referred_fundamental",
    "loop_gain", "available_power_dbm", "amplitude_for_dbm", "DEFAULT_OFFSET", "BANDS",
]

BANDS = (1, 3, 5, 7)
DEFAULT_OFFSET = 1e6
DEFAULT_SPAN = 30e6
DEFAULT_POINTS = 271
DEFAULT_BAND_POINTS = 120
DEFAULT_C_IN = tuple(np.geomspace(0.2e-12, 2e-12, 5))
DEFAULT_C_X = tuple(np.geomspace(0.2e-12, 2e-12, 5))
DEFAULT_HR1_IMAX = 100e-6  # per unit cell
DEFAULT_HR2_IMAX = 50e-6


def _db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, 20 * np.log10(np.maximum(x, 1e-300)), -400.0)


def _fmt(x) -> str:
    return f"{x:.9g}"


def _as_receiver(obj, drive="voltage"):
    if isinstance(obj, ReceiverConfig):
        return build_receiver(obj, drive)
    return obj


def _offset_grid(span: float, points: int) -> np.ndarray:
    """Symmetric offsets that never land on the harmonic itself (odd counts round up)."""
    points += points % 2
    step = 2 * span / points
    return -span + (np.arange(points) + 0.5) * step


# --------------------------------------------------------------------------
# harmonic response at baseband
# --------------------------------------------------------------------------


@dataclass
class HarmonicResponseCurve:
    f_lo: float
    offsets: np.ndarray
    bands: tuple
    probes: tuple
    curves: dict  # (probe, band) -> dB (relative to the probe's fundamental peak)
    reference_db: dict = field(default_factory=dict)  # probe -> absolute fundamental peak (dB)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if 1 not in self.bands:
            return
        for p in self.probes:
            top = float(np.max(self.curves[(p, 1)]))
            self.reference_db[p] = top
            for b in self.bands:
                self.curves[(p, b)] = self.curves[(p, b)] - top

    def peak(self, band: int, probe: str) -> float:
        return float(np.max(self.curves[(probe, band)]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}={self.metadata[k]}\n")
        for p in self.probes:
            if p in self.reference_db:
                buf.write(f"# reference_db_{p}={self.reference_db[p]:.6f}\n")
        buf.write("probe,band,f_in_hz,offset_hz,response_db\n")
        for p in self.probes:
            for b in self.bands:
                for d, v in zip(self.offsets, self.curves[(p, b)]):
                    buf.write(f"{p},{b},{_fmt(b * self.f_lo + d)},{_fmt(d)},{v:.6f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        parts = [f"{p}.band{b}={self.peak(b, p):.2f}dB" for p in self.probes for b in self.bands if b != 1]
        return "baseband_harmonic_response " + " ".join(parts)


def baseband_harmonic_response(receiver, offsets: Sequence[float] | None = None, span: float = DEFAULT_SPAN,
                               bands: Sequence[int] = BANDS, probes: Sequence[str] = ("bb", "I"),
                               points: int = DEFAULT_BAND_POINTS, jobs: int = 1) -> HarmonicResponseCurve:
    """Baseband output at offset delta for inputs at ``m f_lo + delta`` per band m.

    ``bb`` is the differential HR1 input (bb1 - bb5); ``I`` the HR1 output.
    """
    rx = _as_receiver(receiver)
    f_lo = rx.f_lo
    offs = np.asarray(offsets if offsets is not None else _offset_grid(span, points), dtype=float)
    if np.any(np.abs(offs) < 1e-9 * f_lo):
        raise ValueError("offsets must avoid the exact harmonic (baseband at DC)")
    curves = {}
    for m in bands:
        grid = m * f_lo + offs
        res = harmonic_sweep(rx.system, grid, probes, rx.input_port, jobs=jobs)
        if res.errors:
            raise next(iter(_reraise(res.errors)))
        for p in probes:
            vals = np.array([r[p].component(-m) for r in res.responses])
            curves[(p, m)] = _db(np.abs(vals))
    meta = {"metric": "baseband_harmonic_response", "loop": "on" if rx.config.loop_enabled else "off"}
    return HarmonicResponseCurve(f_lo, offs, tuple(bands), tuple(probes), curves, metadata=meta)


def _reraise(errors):
    from .errors import NPathError
    for i, msg in errors.items():
        yield NPathError(f"sweep point {i}: {msg}")


# --------------------------------------------------------------------------
# RF node response
# --------------------------------------------------------------------------


@dataclass
class RfResponse:
    grid: np.ndarray
    vrf_db: np.ndarray  # |V_rf / V_in| in dB at the input frequency
    band_peaks: dict  # band -> peak dB over a local sweep
    metadata: dict = field(default_factory=dict)

    @property
    def floor_db(self) -> float:
        return float(np.min(self.vrf_db))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}={self.metadata[k]}\n")
        for b in sorted(self.band_peaks):
            buf.write(f"# band_peak_{b}_db={self.band_peaks[b]:.6f}\n")
        buf.write("f_in_hz,vrf_db\n")
        for f, v in zip(self.grid, self.vrf_db):
            buf.write(f"{_fmt(f)},{v:.6f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        pk = " ".join(f"band{b}={v:.2f}dB" for b, v in sorted(self.band_peaks.items()))
        return f"rf_node_response {pk} floor={self.floor_db:.2f}dB"


def rf_node_response(receiver, grid: Sequence[float] | None = None, bands: Sequence[int] = BANDS,
                     span: float = DEFAULT_SPAN, band_points: int = 61, jobs: int = 1) -> RfResponse:
    """|V_rf| at the input frequency over a wide sweep, plus per-band passband peaks."""
    rx = _as_receiver(receiver)
    f_lo = rx.f_lo
    g = np.asarray(grid if grid is not None else np.linspace(300e6, 3e9, DEFAULT_POINTS), dtype=float)
    res = harmonic_sweep(rx.system, g, ["vrf"], rx.input_port, harmonics=(0,), jobs=jobs)
    if res.errors:
        raise next(iter(_reraise(res.errors)))
    vrf = _db(np.abs(res.curve("vrf", 0)))
    peaks = {}
    for m in bands:
        local = m * f_lo + np.linspace(-span, span, band_points)
        r = harmonic_sweep(rx.system, local, ["vrf"], rx.input_port, harmonics=(0,), jobs=jobs)
        peaks[m] = float(np.max(_db(np.abs(r.curve("vrf", 0)))))
    meta = {"metric": "rf_node_response", "loop": "on" if rx.config.loop_enabled else "off",
            "r_on": rx.config.npath.r_on}
    return RfResponse(g, vrf, peaks, meta)


# --------------------------------------------------------------------------
# harmonic rejection
# --------------------------------------------------------------------------


@dataclass
class HrrResult:
    harmonics: tuple
    proposed: dict  # m -> dB
    single_stage: dict
    oracle_single_stage: dict
    q_proposed: dict
    rf_suppression: dict  # m -> dB of loop-on vs loop-off V_rf at m f_lo + delta

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("harmonic,hrr_proposed_db,hrr_single_stage_db,hrr_oracle_db,hrr_proposed_q_db,rf_suppression_db\n")
        for m in self.harmonics:
            buf.write(f"{m},{self.proposed[m]:.6f},{self.single_stage[m]:.6f},{self.oracle_single_stage[m]:.6f},"
                      f"{self.q_proposed[m]:.6f},{self.rf_suppression[m]:.6f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        parts = []
        for m in self.harmonics:
            parts.append(f"HRR{m}={self.proposed[m]:.2f}dB single{m}={self.single_stage[m]:.2f}dB "
                         f"oracle{m}={self.oracle_single_stage[m]:.2f}dB")
        return "hrr " + " ".join(parts)


def hrr_oracle(cfg: ReceiverConfig, m: int, channel: str = "I") -> float:
    """Single-stage HRR from the weight sequence alone.

    The N-path baseband samples the RF waveform over each phase window, so the
    combined output is the input times an equivalent LO that holds weight
    ``w_k`` during window k.  HRR_m = |c_1| / |c_m| of that waveform.
    """
    n = cfg.npath.n_paths
    w = hr1_weights(cfg.hr1, channel, n)
    windows = [(k / n, (k + 1) / n, w[k]) for k in range(n)]
    c1 = fourier_coefficient(windows, 1, period=1.0)
    cm = fourier_coefficient(windows, m, period=1.0)
    return float(20 * np.log10(abs(c1) / abs(cm)))


def _conversion(system, f, probe, m, port):
    return periodic_steady_state(system, f, [probe], port)[probe].component(-m)


def hrr(cfg: ReceiverConfig, harmonics: Sequence[int] = (3, 5), delta: float = DEFAULT_OFFSET) -> HrrResult:
    """HRR_m at the HR1 output for the proposed (loop on) and single-stage (loop off) receivers."""
    f_lo = cfg.npath.f_lo
    on = build_receiver(cfg.with_(loop_enabled=True)).system
    off = build_receiver(cfg.with_(loop_enabled=False)).system
    out = {"proposed": {}, "single": {}, "oracle": {}, "q": {}, "rf": {}}
    g_on = {ch: abs(_conversion(on, f_lo + delta, ch, 1, INPUT_PORT)) for ch in ("I", "Q")}
    g_off = abs(_conversion(off, f_lo + delta, "I", 1, INPUT_PORT))
    for m in harmonics:
        f = m * f_lo + delta
        out["proposed"][m] = float(20 * np.log10(g_on["I"] / abs(_conversion(on, f, "I", m, INPUT_PORT))))
        out["q"][m] = float(20 * np.log10(g_on["Q"] / abs(_conversion(on, f, "Q", m, INPUT_PORT))))
        out["single"][m] = float(20 * np.log10(g_off / abs(_conversion(off, f, "I", m, INPUT_PORT))))
        out["oracle"][m] = hrr_oracle(cfg, m)
        v_on = periodic_steady_state(on, f, ["vrf"], INPUT_PORT)["vrf"].component(0)
        v_off = periodic_steady_state(off, f, ["vrf"], INPUT_PORT)["vrf"].component(0)
        out["rf"][m] = float(20 * np.log10(abs(v_off) / abs(v_on)))
    return HrrResult(tuple(harmonics), out["proposed"], out["single"], out["oracle"], out["q"], out["rf"])


# --------------------------------------------------------------------------
# peak shift and C_X compensation
# --------------------------------------------------------------------------


def _npath_system(cfg: ReceiverConfig, c_in: float, c_x: float):
    p = cfg.npath
    from dataclasses import replace
    p = replace(p, c_in=c_in, c_x=c_x)
    clocks = make_nonoverlap_clocks(p.n_paths, p.f_lo, 1.0 / p.n_paths, p.guard)
    return extract_segments(build_npath(p, clocks), clocks)


def _golden_max(fn, a, b, xtol):
    g = (math.sqrt(5) - 1) / 2
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
    return (a + b) / 2


def find_peak(system, f_center: float, window: float = 0.2, resolution: float = 1e-4,
              coarse_points: int = 41, probe: str = "vrf", port: str = INPUT_PORT) -> float:
    """Frequency of the |probe| maximum within ``f_center * (1 +/- window)``.

    Coarse scan then golden-section refinement to ``resolution * f_center``.
    """
    def mag(f):
        return abs(periodic_steady_state(system, f, [probe], port, harmonics=(0,))[probe].component(0))

    grid = f_center * (1 + np.linspace(-window, window, coarse_points))
    vals = np.array([mag(f) for f in grid])
    i = int(np.argmax(vals))
    if i == 0 or i == len(grid) - 1:
        raise NoPeakError(f"|{probe}| is monotone over {grid[0]:.6g}..{grid[-1]:.6g} Hz")
    return _golden_max(mag, grid[i - 1], grid[i + 1], resolution * f_center / 4)


@dataclass
class PeakShiftResult:
    f_lo: float
    table: list  # (c_in, c_x, f_peak)
    recentered: list  # (c_in, c_x_found, f_peak)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("c_in_f,c_x_f,f_peak_hz,shift_pct,kind\n")
        for c_in, c_x, f in self.table:
            buf.write(f"{_fmt(c_in)},{_fmt(c_x)},{_fmt(f)},{100 * (f / self.f_lo - 1):.6f},grid\n")
        for c_in, c_x, f in self.recentered:
            buf.write(f"{_fmt(c_in)},{_fmt(c_x)},{_fmt(f)},{100 * (f / self.f_lo - 1):.6f},recentered\n")
        return buf.getvalue()

    def summary(self) -> str:
        rc = " ".join(f"c_in={c:.3g}:c_x={x:.3g}" for c, x, _ in self.recentered)
        return f"peak_shift_study points={len(self.table)} {rc}"


def recenter_c_x(cfg: ReceiverConfig, c_in: float, c_x_max: float = 20e-12, tol: float = 2e-4,
                 max_iter: int = 40) -> tuple[float, float]:
    """Bisection on C_X for a peak at f_lo (returns c_x, f_peak)."""
    f_lo = cfg.npath.f_lo

    def err(c_x):
        f = find_peak(_npath_system(cfg, c_in, c_x), f_lo)
        return f / f_lo - 1, f

    lo, hi = 0.0, c_x_max
    e_lo, f_lo_pk = err(lo)
    if abs(e_lo) <= tol:
        return lo, f_lo_pk
    e_hi, f_hi = err(hi)
    if np.sign(e_lo) == np.sign(e_hi):
        raise NoPeakError(f"no C_X in [0, {c_x_max:g}] F recentres the peak for c_in={c_in:g} F")
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        e_mid, f_mid = err(mid)
        if abs(e_mid) <= tol:
            return mid, f_mid
        if np.sign(e_mid) == np.sign(e_lo):
            lo, e_lo = mid, e_mid
        else:
            hi = mid
    return mid, f_mid


def peak_shift_study(cfg: ReceiverConfig, c_in_list: Sequence[float] = DEFAULT_C_IN,
                     c_x_list: Sequence[float] = DEFAULT_C_X, recenter: bool = True) -> PeakShiftResult:
    """Peak frequency of the plain N-path over C_in (at C_X = 0) and C_X (at C_in = 0)."""
    f_lo = cfg.npath.f_lo
    table = [(0.0, 0.0, find_peak(_npath_system(cfg, 0.0, 0.0), f_lo))]
    table += [(c, 0.0, find_peak(_npath_system(cfg, c, 0.0), f_lo)) for c in c_in_list]
    table += [(0.0, x, find_peak(_npath_system(cfg, 0.0, x), f_lo)) for x in c_x_list]
    rec = []
    if recenter:
        for c in c_in_list:
            x, f = recenter_c_x(cfg, c)
            rec.append((c, x, f))
    return PeakShiftResult(f_lo, table, rec)


# --------------------------------------------------------------------------
# input impedance
# --------------------------------------------------------------------------


@dataclass
class ImpedanceResult:
    freqs: np.ndarray
    z: np.ndarray
    z_ref: float

    @property
    def gamma(self) -> np.ndarray:
        return (self.z - self.z_ref) / (self.z + self.z_ref)

    @property
    def gamma_db(self) -> np.ndarray:
        return _db(np.abs(self.gamma))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# z_ref_ohm={self.z_ref:g}\n")
        buf.write("f_hz,z_real_ohm,z_imag_ohm,s11_db\n")
        for f, z, g in zip(self.freqs, self.z, self.gamma_db):
            buf.write(f"{_fmt(f)},{z.real:.6f},{z.imag:.6f},{g:.6f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        return (f"input_impedance f={self.freqs[0]:.6g}Hz z={self.z[0].real:.3f}{self.z[0].imag:+.3f}j "
                f"s11={self.gamma_db[0]:.2f}dB")


def impedance(system, freqs, port: str, probe, z_ref: float = 50.0) -> ImpedanceResult:
    """V(probe) / I(port) at each frequency for a unit current injection."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    z = np.array([periodic_steady_state(system, f, [probe], port, harmonics=(0,))
                  [probe if isinstance(probe, str) else repr(probe)].component(0) for f in freqs])
    return ImpedanceResult(freqs, z, z_ref)


def input_impedance(cfg: ReceiverConfig, freqs, z_ref: float = 50.0) -> ImpedanceResult:
    """Differential impedance seen by the source at the RF nodes.

    The source stays connected (its resistance terminates every translated
    product), and ``Z = V_rf / I`` with ``I = (V_s - V_rf) / R_s``.
    """
    rx = build_receiver(cfg)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    r_s = cfg.npath.r_s
    v = np.array([periodic_steady_state(rx.system, f, ["vrf"], INPUT_PORT, harmonics=(0,))["vrf"].component(0)
                  for f in freqs])
    return ImpedanceResult(freqs, v * r_s / (1.0 - v), z_ref)


def tune_input_match(cfg: ReceiverConfig, f: float | None = None, bounds=(10.0, 1e4),
                     z_ref: float = 50.0) -> tuple[float, ImpedanceResult]:
    """Baseband termination ``npath.r_bb`` minimising |S11| at ``f`` (default f_lo)."""
    from scipy.optimize import minimize_scalar
    f = cfg.npath.f_lo if f is None else f

    def cost(log_r):
        c = cfg.with_(npath={"r_bb": float(np.exp(log_r))})
        return float(np.abs(input_impedance(c, [f], z_ref).gamma[0]))

    res = minimize_scalar(cost, bounds=np.log(bounds), method="bounded", options={"xatol": 1e-4})
    r_bb = float(np.exp(res.x))
    return r_bb, input_impedance(cfg.with_(npath={"r_bb": r_bb}), [f], z_ref)


# --------------------------------------------------------------------------
# blocker compression
# --------------------------------------------------------------------------


def available_power_dbm(amplitude: float, r_s: float = 50.0) -> float:
    return float(10 * np.log10(amplitude ** 2 / (8 * r_s) / 1e-3))


def amplitude_for_dbm(p_dbm, r_s: float = 50.0):
    return np.sqrt(8 * r_s * 1e-3 * 10 ** (np.asarray(p_dbm, dtype=float) / 10))


@dataclass
class CompressionResult:
    blocker_freq: float
    desired_freq: float
    powers_dbm: np.ndarray
    gain_db: np.ndarray
    linear_gain_db: float
    small_signal_gain_db: float  # lifted linear solve, saturation removed
    b3db_dbm: float
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}={self.metadata[k]}\n")
        buf.write(f"# blocker_hz={_fmt(self.blocker_freq)}\n# desired_hz={_fmt(self.desired_freq)}\n")
        buf.write(f"# b3db_dbm={self.b3db_dbm:.4f}\n")
        buf.write("blocker_dbm,gain_db,gain_change_db\n")
        for p, g in zip(self.powers_dbm, self.gain_db):
            buf.write(f"{p:.4f},{g:.6f},{g - self.linear_gain_db:.6f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        return (f"blocker_compression loop={self.metadata.get('loop', '?')} blocker={self.blocker_freq:.6g}Hz "
                f"b3db={self.b3db_dbm:.2f}dBm")


def _b3db(powers, drop):
    """First crossing of a 3 dB drop, interpolated in dB."""
    idx = np.flatnonzero(drop <= -3.0)
    if not len(idx):
        return math.inf
    i = idx[0]
    if i == 0:
        return float(powers[0])
    p0, p1, d0, d1 = powers[i - 1], powers[i], drop[i - 1], drop[i]
    return float(p0 + (-3.0 - d0) * (p1 - p0) / (d1 - d0))


def blocker_compression(cfg: ReceiverConfig, m: int = 3, blocker_offset: float = 20e6,
                        desired_offset: float = 10e6, powers_dbm: Sequence[float] | None = None,
                        desired_amplitude: float = 1e-3, settle_periods: int = 100,
                        analysis_periods: int | None = None, probe: str = "I") -> CompressionResult:
    """Small-signal gain of a desired tone near f_lo versus blocker power near m f_lo.

    HR1 and HR2 saturate (per-unit-cell limits from the config, or the module
    defaults when unset).  The desired tone is measured at baseband.
    """
    hr1_i = cfg.hr1.i_max if cfg.hr1.i_max is not None else DEFAULT_HR1_IMAX
    hr2_i = cfg.hr2.i_max if cfg.hr2.i_max is not None else DEFAULT_HR2_IMAX
    sat = cfg.with_(hr1={"i_max": hr1_i}, hr2={"i_max": hr2_i})
    f_lo = cfg.npath.f_lo
    f_d = f_lo + desired_offset
    f_b = m * f_lo + blocker_offset
    if analysis_periods is None:
        from fractions import Fraction
        r = [Fraction(x / f_lo).limit_denominator(10000) for x in (desired_offset, blocker_offset)]
        analysis_periods = math.lcm(*[x.denominator for x in r])
    P = np.arange(-40.0, 20.5, 1.0) if powers_dbm is None else np.asarray(powers_dbm, dtype=float)
    A = amplitude_for_dbm(P, cfg.npath.r_s)
    system = build_receiver(sat).system
    sets = [[Tone(INPUT_PORT, f_d, desired_amplitude, 0.0), Tone(INPUT_PORT, f_b, a, 0.0)] for a in A]
    sets.append([Tone(INPUT_PORT, f_d, desired_amplitude, 0.0)])
    res = nonlinear_transient_dft(system, sets, [probe], [desired_offset], settle_periods, analysis_periods)
    gains = 20 * np.log10(np.abs(res[probe][:, 0]) / desired_amplitude)
    lin = float(gains[-1])
    lin_sys = build_receiver(cfg.with_(hr1={"i_max": None}, hr2={"i_max": None})).system
    ss = abs(periodic_steady_state(lin_sys, f_d, [probe], INPUT_PORT)[probe].component(-1))
    meta = {"metric": "blocker_compression", "loop": "on" if cfg.loop_enabled else "off",
            "hr1_i_max": hr1_i, "hr2_i_max": hr2_i}
    return CompressionResult(f_b, f_d, P, gains[:-1], lin, float(20 * np.log10(ss)),
                             _b3db(P, gains[:-1] - lin), meta)


# --------------------------------------------------------------------------
# noise translation surrogate
# --------------------------------------------------------------------------


def npath_referred_fundamental(waveform, n_paths: int = 8) -> complex:
    """Fundamental of the LO as seen through N-path sampling.

    The RF node's response near f_lo to a current ``i(t) x(t)`` is carried by
    the per-window averages of ``x``: their first spatial harmonic sums every
    LO harmonic m = 1 (mod N), weighted by the window sinc.
    """
    return window_referred_fundamental(waveform.values, n_paths)


@dataclass
class NoiseTranslationResult:
    delta: float
    v_pwm: complex
    v_square: complex
    c1_pwm: complex
    c1_square: complex
    referred_pwm: complex
    referred_square: complex

    @property
    def ratio_db(self) -> float:
        return float(20 * np.log10(abs(self.v_pwm) / abs(self.v_square)))

    @property
    def c1_prediction_db(self) -> float:
        return float(20 * np.log10(abs(self.c1_pwm) / abs(self.c1_square)))

    @property
    def referred_prediction_db(self) -> float:
        return float(20 * np.log10(abs(self.referred_pwm) / abs(self.referred_square)))

    def to_csv(self) -> str:
        return ("delta_hz,vrf_pwm_db,vrf_square_db,ratio_db,c1_prediction_db,npath_referred_prediction_db\n"
                f"{_fmt(self.delta)},{_db(abs(self.v_pwm)):.6f},{_db(abs(self.v_square)):.6f},"
                f"{self.ratio_db:.6f},{self.c1_prediction_db:.6f},{self.referred_prediction_db:.6f}\n")

    def summary(self) -> str:
        return (f"noise_translation delta={self.delta:.6g}Hz ratio={self.ratio_db:.2f}dB "
                f"c1_pred={self.c1_prediction_db:.2f}dB referred_pred={self.referred_prediction_db:.2f}dB")


def noise_translation_test(cfg: ReceiverConfig, delta: float = DEFAULT_OFFSET,
                           sense: bool = False, k: int = 1) -> NoiseTranslationResult:
    """Tone injected differentially at the HR2 output (h1 - h5) at ``delta``;
    V_rf component at ``delta + k f_lo`` for pwm_lo versus square_lo.

    ``sense=False`` opens the HR2 input cells so only the translation path
    (HR2 output -> upconverter -> RF) is exercised; a square LO closes the
    harmonic loop with the wrong sign at one of the 3rd / 5th.
    """
    base = cfg.with_(loop_enabled=True)
    if not sense:
        base = base.with_(hr2={"gm_unit": 0.0})
    v, c1, ref = {}, {}, {}
    for mode in ("pwm_lo", "square_lo"):
        rx = build_receiver(base.with_(upconverter_mode=mode))
        out = periodic_steady_state(rx.system, delta, ["vrf"], HR2_INJECT_PORT)
        v[mode] = out["vrf"].component(k)
        c1[mode] = fourier_coefficient(rx.pwm, k)
        ref[mode] = npath_referred_fundamental(rx.pwm, cfg.npath.n_paths)
    return NoiseTranslationResult(delta, v["pwm_lo"], v["square_lo"], c1["pwm_lo"], c1["square_lo"],
                                  ref["pwm_lo"], ref["square_lo"])


# --------------------------------------------------------------------------
# loop gain
# --------------------------------------------------------------------------


def loop_gain(cfg: ReceiverConfig, m: int, delta: float = DEFAULT_OFFSET) -> complex:
    """Open-loop gain at the m-th harmonic band, broken at the upconverter output.

    A differential test current at ``m f_lo + delta`` drives the loop-off RF
    nodes (source resistance in place, source voltage zero); the differential
    current the upconverter would return at the same frequency is assembled
    from the HR2 node components and the PWM bank coefficients.  ``L = -i_return / i_test``: negative feedback -> Re L > 0.
    """
    rx = build_receiver(cfg.with_(loop_enabled=False))
    net = Netlist(list(rx.netlist.elements), dict(rx.netlist.probes), rx.netlist.gmin)
    net.add(isource("i_test", "rf_p", "rf_n", "itest"))
    sysm = extract_segments(net, rx.clocks)
    n = cfg.npath.n_paths
    probes = [(f"h{k}", "0") for k in range(1, n + 1)]
    ks = tuple(range(-15, 16))
    res = periodic_steady_state(sysm, m * rx.f_lo + delta, probes, "itest", harmonics=ks)
    bank = build_receiver(cfg.with_(loop_enabled=True)).bank
    T = 1.0 / rx.f_lo
    total = 0j
    for idx, pr in enumerate(probes):
        H = res[repr(pr)]
        seq = bank.differential(idx)
        for j, hk in zip(H.harmonics, H.values):
            total += hk * fourier_coefficient(seq, -j, period=T)
    i_ret = cfg.up.sign * cfg.up.gm * total / 2
    return complex(-i_ret)
