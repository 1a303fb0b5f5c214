"""Steady-state and transient response of lifted periodically switched systems.

Two independent routes to the same harmonic components:

* :func:`periodic_steady_state` -- the Bloch solution ``x(t) = e^{j w t} p(t)``
  of a complex tone, found with one monodromy solve and integrated exactly
  segment by segment in modal coordinates.
* :func:`transient_dft` -- a real-valued time-domain run (a cosine input
  generated by an oscillator appended to the state, propagated with block
  matrix exponentials), sampled and Fourier analysed.

Component ``k`` of a probe is the complex amplitude at ``f_in + k f_lo`` for
a unit input ``exp(j 2 pi f_in t)``; for a real cosine input it is the
amplitude and phase of the output tone at ``|f_in + k f_lo|`` (conjugated
when the frequency is negative).
"""

from __future__ import annotations

import hashlib
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
from scipy.signal import windows

from .circuit.lti import PiecewiseLtiSystem, Tone, nl_correction
from .errors import InsufficientSettlingError, NPathError, ResonanceSingularityError

__all__ = ["ToneResponse", "SweepResult", "LiftedSolver", "periodic_steady_state", "transient",
           "transient_dft", "nonlinear_transient_dft", "harmonic_sweep", "DEFAULT_HARMONICS",
           "floquet_multipliers"]

DEFAULT_HARMONICS = tuple(range(-9, 10))
EIG_COND_LIMIT = 1e9
RESONANCE_COND_LIMIT = 1e13
NEAR_EIG = 1e-4  # |lambda - j w| h below this counts as coincident


# --------------------------------------------------------------------------
# result types
# --------------------------------------------------------------------------


@dataclass
class ToneResponse:
    f_in: float
    probe: str
    f_lo: float
    harmonics: tuple
    values: np.ndarray  # complex, aligned with harmonics
    method: str = "lifted"

    @property
    def components(self) -> dict:
        return dict(zip(self.harmonics, self.values))

    def component(self, k: int) -> complex:
        return complex(self.values[self.harmonics.index(k)])

    def nearest_harmonic(self) -> int:
        return int(round(self.f_in / self.f_lo))

    def baseband(self, m: int | None = None) -> complex:
        """Component landing at ``|f_in - m f_lo|`` (m = nearest harmonic)."""
        m = self.nearest_harmonic() if m is None else m
        return self.component(-m)

    def db(self, k: int) -> float:
        return _db(abs(self.component(k)))


def _db(x: float) -> float:
    return 20 * math.log10(x) if x > 0 else -400.0


@dataclass
class SweepResult:
    grid: np.ndarray
    probes: tuple
    responses: list  # per point: dict probe -> ToneResponse, or None on error
    errors: dict = field(default_factory=dict)  # index -> message
    flags: dict = field(default_factory=dict)  # index -> note
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if len(g) > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("sweep grid must be strictly increasing")
        self.grid = g

    def curve(self, probe: str, k: int | str) -> np.ndarray:
        """Complex component per point; ``k="bb"`` picks the baseband component."""
        out = np.full(len(self.grid), np.nan + 0j)
        for i, r in enumerate(self.responses):
            if r is None:
                continue
            tr = r[probe]
            out[i] = tr.baseband() if k == "bb" else tr.component(k)
        return out

    def to_csv(self, timestamp: str | None = None) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={self.metadata[key]}\n")
        if timestamp:
            buf.write(f"# generated={timestamp}\n")
        for i, note in sorted(self.flags.items()):
            buf.write(f"# flag point={i} f_in_hz={self.grid[i]:.9g} {note}\n")
        for i, msg in sorted(self.errors.items()):
            buf.write(f"# error point={i} f_in_hz={self.grid[i]:.9g} {msg}\n")
        buf.write("f_in_hz,probe,k,mag_db,phase_deg,method\n")
        for i, r in enumerate(self.responses):
            if r is None:
                continue
            for probe in self.probes:
                tr = r[probe]
                for k, v in zip(tr.harmonics, tr.values):
                    mag = abs(v)
                    ph = math.degrees(math.atan2(v.imag, v.real)) if mag > 0 else 0.0
                    buf.write(f"{self.grid[i]:.9g},{probe},{k},{_db(mag):.6f},{ph:.6f},{tr.method}\n")
        return buf.getvalue()


def config_hash(items: dict) -> str:
    text = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# lifted solver
# --------------------------------------------------------------------------


def _e1(z: np.ndarray, h: float) -> np.ndarray:
    """int_0^h exp(z tau) d tau, robust near z = 0."""
    zh = z * h
    out = np.empty_like(zh, dtype=complex)
    small = np.abs(zh) < 1e-8
    big = ~small
    out[big] = np.expm1(zh[big]) / z[big]
    out[small] = h * (1 + zh[small] / 2 + zh[small] ** 2 / 6)
    return out


def _ediff(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """(exp(a h) - exp(b h)) / (a - b), robust as a -> b."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    d = a - b
    out = np.empty(a.shape, dtype=complex)
    small = np.abs(d * h) < 1e-3
    big = ~small
    out[big] = (np.exp(a[big] * h) - np.exp(b[big] * h)) / d[big]
    if np.any(small):
        x = d[small] * h
        phi1 = 1 + x / 2 + x ** 2 / 6 + x ** 3 / 24 + x ** 4 / 120
        out[small] = np.exp(b[small] * h) * h * phi1
    return out


def _e1_divdiff(z1: np.ndarray, z2: np.ndarray, h: float) -> np.ndarray:
    """Divided difference (E1(z1) - E1(z2)) / (z1 - z2) of E1(z) = int_0^h e^{z t} dt."""
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex))
    d = z1 - z2
    out = np.empty(z1.shape, dtype=complex)
    small = np.abs(d * h) < 1e-3
    big = ~small
    out[big] = (_e1(z1[big], h) - _e1(z2[big], h)) / d[big]
    if np.any(small):
        # f[z1, z2] from f(M), M = [[z2, 1], [0, z1]]; E1(M) is the top-right
        # block of expm([[M, I], [0, 0]] h)
        for idx in zip(*np.nonzero(small)):
            M = np.zeros((4, 4), dtype=complex)
            M[0, 0], M[0, 1], M[1, 1] = z2[idx], 1.0, z1[idx]
            M[0, 2] = M[1, 3] = 1.0
            out[idx] = la.expm(M * h)[0, 3]
    return out


class _SegmentModes:
    __slots__ = ("lam", "V", "Vi", "Bm", "ok")

    def __init__(self, seg):
        lam, V = np.linalg.eig(seg.A) if seg.A.size else (np.zeros(0), np.zeros((0, 0)))
        self.ok = seg.A.size == 0 or np.linalg.cond(V) < EIG_COND_LIMIT
        self.lam = lam
        self.V = V
        self.Vi = np.linalg.inv(V) if self.ok and seg.A.size else None
        self.Bm = self.Vi @ seg.B if self.ok and seg.A.size else None


class LiftedSolver:
    """Frequency-independent precomputation for repeated steady-state solves."""

    def __init__(self, system: PiecewiseLtiSystem):
        self.system = system
        self.T = system.period
        self.w0 = 2 * np.pi / self.T
        self._modes = []
        cache = {}
        for seg in system.segments:
            key = id(seg.A)
            if key not in cache:
                cache[key] = _SegmentModes(seg)
            self._modes.append(cache[key])
        self._probe_cache = {}

    def _probe_maps(self, probes):
        key = tuple(p if isinstance(p, str) else repr(p) for p in probes)
        if key not in self._probe_cache:
            P = self.system.probe_matrix(probes)
            maps = []
            for seg, m in zip(self.system.segments, self._modes):
                PC = P @ seg.C
                maps.append((PC @ m.V if m.ok else PC, P @ seg.D))
            self._probe_cache[key] = maps
        return self._probe_cache[key]

    def monodromy(self) -> np.ndarray:
        n = self.system.state_dim
        Phi = np.eye(n)
        for seg in self.system.segments:
            Phi = seg.expA @ Phi
        return Phi

    def solve(self, f_in: float, probes: Sequence, port: str | None = None,
              harmonics: Sequence[int] = DEFAULT_HARMONICS, u: np.ndarray | None = None) -> dict:
        sysm = self.system
        if u is None:
            u = sysm.port_vector(port or sysm.ports[0])
        u = np.asarray(u, dtype=complex)
        w = 2 * np.pi * f_in
        ks = np.asarray(harmonics)
        Om = w + ks * self.w0
        n = sysm.state_dim
        maps = self._probe_maps(probes)

        # forced propagation across the period
        x = np.zeros(n, dtype=complex)
        q_list = []
        Phi = np.eye(n)
        for seg, m in zip(sysm.segments, self._modes):
            q = self._forced(seg, m, u, w)
            x = seg.expA @ x + q
            Phi = seg.expA @ Phi
            q_list.append(q)
        Mb = np.exp(1j * w * self.T) * np.eye(n) - Phi
        # relative to the size of both terms; cond(Mb) alone is blind to a uniformly small Mb
        if n:
            sv = np.linalg.svd(Mb, compute_uv=False)
            cond = (1.0 + np.linalg.norm(Phi, 2)) / max(sv[-1], 1e-300)
        else:
            cond = 1.0
        if cond > RESONANCE_COND_LIMIT:
            raise ResonanceSingularityError(
                f"I - monodromy e^(-jwT) is singular at f_in = {f_in:.6g} Hz (cond {cond:.3g})", cond)
        x0 = np.linalg.solve(Mb, x) if n else x

        Y = np.zeros((len(ks), len(probes)), dtype=complex)
        xs = x0
        for seg, m, q, (PCV, PD) in zip(sysm.segments, self._modes, q_list, maps):
            h = seg.duration
            ts = seg.start
            lin = PD @ u  # direct feedthrough
            Y += np.outer(np.exp(-1j * ks * self.w0 * ts) * _e1(-1j * ks * self.w0, h), lin)
            if n:
                if m.ok:
                    xi = m.Vi @ xs
                    beta = m.Bm @ u
                    Z = m.lam[None, :] - 1j * Om[:, None]
                    term1 = xi[None, :] * _e1(Z, h)
                    dd = _e1_divdiff((-1j * ks * self.w0)[:, None] + 0 * Z, Z, h)
                    term2 = (beta * np.exp(1j * w * ts))[None, :] * dd
                    integ = np.exp(-1j * Om * ts)[:, None] * (term1 + term2)
                    Y += integ @ PCV.T
                else:
                    Y += self._integrals_resolvent(seg, m, xs, u, w, ks) @ PCV.T
            xs = seg.expA @ xs + q
        Y /= self.T
        out = {}
        f_lo = 1.0 / self.T
        for j, p in enumerate(probes):
            name = p if isinstance(p, str) else repr(p)
            out[name] = ToneResponse(f_in, name, f_lo, tuple(int(k) for k in ks), Y[:, j].copy(), "lifted")
        return out

    @staticmethod
    def _forced(seg, m, u, w):
        """State reached from zero over the segment under e^{j w t} input."""
        n = seg.A.shape[0]
        if n == 0:
            return np.zeros(0, dtype=complex)
        if m.ok:
            beta = m.Bm @ u
            return m.V @ (beta * np.exp(1j * w * seg.start) * _ediff(1j * w, m.lam, seg.duration))
        if np.min(np.abs(m.lam - 1j * w)) * seg.duration > NEAR_EIG:
            r = np.linalg.solve(1j * w * np.eye(n) - seg.A, seg.B @ u)
            return np.exp(1j * w * seg.start) * (np.exp(1j * w * seg.duration) * r - seg.expA @ r)
        M = np.zeros((n + 1, n + 1), dtype=complex)
        M[:n, :n] = seg.A
        M[:n, n] = seg.B @ u
        M[n, n] = 1j * w
        return la.expm(M * seg.duration)[:n, n] * np.exp(1j * w * seg.start)

    def _integrals_resolvent(self, seg, m, xs, u, w, ks):
        """int_seg x(t) e^{-j Om_k t} dt for a non-diagonalisable segment matrix.

        With G_k = int_0^h e^{(A - j Om_k) t} dt = (A - j Om_k)^-1 (Phi e^{-j Om_k h} - I)
        and r = (j w - A)^-1 B u the integral is
        e^{-j Om_k t_s} [G_k (x_s - e^{j w t_s} r) + e^{j w t_s} E1(-j k w0) r].
        Pairs with j Om_k on an eigenvalue use a block exponential instead.
        """
        n = seg.A.shape[0]
        h, ts, w0 = seg.duration, seg.start, self.w0
        Om = w + ks * w0
        b = seg.B @ u
        if np.min(np.abs(m.lam - 1j * w)) * h <= NEAR_EIG:
            return np.array([self._integral_expm(seg, xs, b, w, k) for k in ks])
        r = np.linalg.solve(1j * w * np.eye(n) - seg.A, b)
        ew = np.exp(1j * w * ts)
        v = xs - ew * r
        near = np.min(np.abs(m.lam[None, :] - 1j * Om[:, None]), axis=1) * h <= NEAR_EIG
        out = np.empty((len(ks), n), dtype=complex)
        mats = seg.A[None, :, :] - 1j * Om[:, None, None] * np.eye(n)[None]
        rhs = (np.exp(-1j * Om * h)[:, None] * (seg.expA @ v)[None, :] - v[None, :])
        ok = ~near
        if np.any(ok):
            G_v = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
            E = _e1(-1j * ks[ok] * w0, h)
            out[ok] = np.exp(-1j * Om[ok] * ts)[:, None] * (G_v + ew * E[:, None] * r[None, :])
        for i in np.nonzero(near)[0]:
            out[i] = self._integral_expm(seg, xs, b, w, ks[i])
        return out

    def _integral_expm(self, seg, xs, b, w, k):
        """Single harmonic by a block exponential of [y; input; int y]."""
        n = seg.A.shape[0]
        w0, ts = self.w0, seg.start
        # y = x e^{-j Om t}:  y' = (A - j Om) y + b e^{-j k w0 t},  I' = y
        Om = w + k * w0
        M = np.zeros((2 * n + 1, 2 * n + 1), dtype=complex)
        M[:n, :n] = seg.A - 1j * Om * np.eye(n)
        M[:n, n] = b
        M[n, n] = -1j * k * w0
        M[n + 1:, :n] = np.eye(n)
        z0 = np.zeros(2 * n + 1, dtype=complex)
        z0[:n] = xs * np.exp(-1j * Om * ts)
        z0[n] = np.exp(-1j * k * w0 * ts)
        return (la.expm(M * seg.duration) @ z0)[n + 1:]


_SOLVERS: dict = {}


def _solver(system: PiecewiseLtiSystem) -> LiftedSolver:
    key = id(system)
    hit = _SOLVERS.get(key)
    if hit is None or hit.system is not system:
        hit = LiftedSolver(system)
        _SOLVERS[key] = hit
    return hit


def floquet_multipliers(system: PiecewiseLtiSystem) -> np.ndarray:
    return np.linalg.eigvals(_solver(system).monodromy())


def periodic_steady_state(system: PiecewiseLtiSystem, f_in: float, probes: Sequence,
                          port: str | None = None, harmonics: Sequence[int] = DEFAULT_HARMONICS,
                          amplitude: complex = 1.0) -> dict:
    """Steady-state harmonic components of each probe for input ``amplitude e^{j 2 pi f_in t}``.

    Returns ``{probe: ToneResponse}``.  Requires a linear system.
    """
    if system.saturating:
        raise NPathError("periodic_steady_state needs a linear system; use nonlinear_transient_dft")
    if isinstance(probes, str):
        probes = [probes]
    sol = _solver(system)
    res = sol.solve(f_in, probes, port, harmonics)
    if amplitude != 1.0:
        for r in res.values():
            r.values = r.values * amplitude
    return res


# --------------------------------------------------------------------------
# real-valued time-domain route (independent of the modal/phasor solver)
# --------------------------------------------------------------------------


class _AugmentedPropagator:
    """Exact real propagation of [x; oscillators; running integrals].

    Each input tone is generated by a 2-state rotation; integral states
    accumulate x and the oscillator cosines for interval averages.
    """

    def __init__(self, system: PiecewiseLtiSystem, tones: Sequence[Tone]):
        self.system = system
        self.tones = list(tones)
        self.n = system.state_dim
        self.m = len(self.tones)
        n, m = self.n, self.m
        self.dim = n + 2 * m + n + m
        self._cache = {}
        self.io = n + 2 * m  # start of integral block

    def matrix(self, seg) -> np.ndarray:
        n, m = self.n, self.m
        M = np.zeros((self.dim, self.dim))
        M[:n, :n] = seg.A
        for i, tone in enumerate(self.tones):
            w = 2 * np.pi * tone.freq
            c, s = n + 2 * i, n + 2 * i + 1
            M[:n, c] = seg.B[:, self.system.ports.index(tone.port)]
            M[c, s] = -w
            M[s, c] = w
            M[self.io + n + i, c] = 1.0
        M[self.io:self.io + n, :n] = np.eye(n)
        return M

    def step(self, seg_index: int, h: float) -> np.ndarray:
        key = (seg_index, round(h / self.system.period * 2 ** 40))
        if key not in self._cache:
            self._cache[key] = la.expm(self.matrix(self.system.segments[seg_index]) * h)
        return self._cache[key]

    def initial(self, x0=None) -> np.ndarray:
        z = np.zeros(self.dim)
        if x0 is not None:
            z[:self.n] = x0
        for i, tone in enumerate(self.tones):
            z[self.n + 2 * i] = tone.amplitude * np.cos(tone.phase)
            z[self.n + 2 * i + 1] = tone.amplitude * np.sin(tone.phase)
        return z

    def output_rows(self, seg, P, averaged: bool) -> np.ndarray:
        """Rows over z giving probe values (or probe integrals when averaged)."""
        n, m = self.n, self.m
        rows = np.zeros((P.shape[0], self.dim))
        PC = P @ seg.C
        PD = P @ seg.D
        cols = [self.system.ports.index(t.port) for t in self.tones]
        if averaged:
            rows[:, self.io:self.io + n] = PC
            for i, c in enumerate(cols):
                rows[:, self.io + n + i] = PD[:, c]
        else:
            rows[:, :n] = PC
            for i, c in enumerate(cols):
                rows[:, n + 2 * i] = PD[:, c]
        return rows


def _period_sampler(prop: _AugmentedPropagator, P: np.ndarray, samples: int, averaged: bool):
    """Linear maps for one period: (sample_rows [S*q x d], period_map [d x d])."""
    sysm = prop.system
    T = sysm.period
    d = prop.dim
    bounds = [s.start for s in sysm.segments] + [T]
    t_samples = np.arange(samples + 1) * T / samples
    points = sorted(set(np.round(np.concatenate([bounds, t_samples]) / T * 2 ** 40).astype(np.int64)))
    points = [p / 2 ** 40 * T for p in points]
    reset = np.eye(d)
    reset[prop.io:, prop.io:] = 0.0
    Mcur = np.eye(d)
    rows = []
    si = 1
    seg_i = 0
    dt = T / samples
    for a, b in zip(points[:-1], points[1:]):
        while seg_i + 1 < len(sysm.segments) and sysm.segments[seg_i].end <= a + 1e-15 * T:
            seg_i += 1
        if not averaged and abs(a - t_samples[si - 1]) < 1e-12 * T and len(rows) < samples:
            rows.append(prop.output_rows(sysm.segments[seg_i], P, False) @ Mcur)
        Mcur = prop.step(seg_i, b - a) @ Mcur
        if averaged and si <= samples and abs(b - t_samples[si]) < 1e-12 * T:
            rows.append(prop.output_rows(sysm.segments[seg_i], P, True) @ Mcur / dt)
            Mcur = reset @ Mcur
            si += 1
        elif not averaged and si <= samples and abs(b - t_samples[si]) < 1e-12 * T:
            si += 1
    period_map = Mcur
    return np.concatenate(rows, axis=0), period_map


def transient(system: PiecewiseLtiSystem, tones: Sequence[Tone], duration: float, probes: Sequence,
              x0=None, samples_per_period: int = 256, averaged: bool = False):
    """Probe waveforms on a uniform grid over ``[0, duration)``.

    Exact piecewise propagation (block matrix exponentials with tone
    generators).  ``averaged=True`` returns the average over each sample
    interval instead of point samples.  Returns ``(t, {probe: samples})``.
    """
    if system.saturating:
        raise NPathError("transient() is linear; use nonlinear_transient_dft for saturating systems")
    if duration < system.period * (1 - 1e-12):
        raise ValueError("duration must cover at least one period")
    if isinstance(probes, str):
        probes = [probes]
    P = system.probe_matrix(probes)
    prop = _AugmentedPropagator(system, tones)
    rows, pmap = _period_sampler(prop, P, samples_per_period, averaged)
    q = len(probes)
    n_per = int(math.ceil(duration / system.period - 1e-9))
    z = prop.initial(x0)
    out = np.empty((n_per * samples_per_period, q))
    for i in range(n_per):
        out[i * samples_per_period:(i + 1) * samples_per_period] = (rows @ z).reshape(samples_per_period, q)
        z = pmap @ z
        z[prop.io:] = 0.0
    dt = system.period / samples_per_period
    t = np.arange(n_per * samples_per_period) * dt
    keep = t < duration - 1e-12 * system.period
    names = [p if isinstance(p, str) else repr(p) for p in probes]
    return t[keep], {nm: out[keep, j] for j, nm in enumerate(names)}


def _commensurate(f: float, window: float) -> bool:
    cycles = f * window
    return abs(cycles - round(cycles)) < 1e-9 * max(1.0, abs(cycles))


def transient_dft(system: PiecewiseLtiSystem, f_in: float, probes: Sequence, port: str | None = None,
                  settle_periods: int = 100, analysis_periods: int | None = None,
                  harmonics: Sequence[int] = DEFAULT_HARMONICS, samples_per_period: int = 4096,
                  settle_tol: float = 1e-6) -> dict:
    """Harmonic components from a settled real transient (brute-force oracle).

    Cosine input on ``port``; interval-averaged samples (corrected for the
    averaging response).  A commensurate window uses a rectangular DFT; an
    incommensurate one (>= 200 periods) uses a flat-top window evaluated at
    the exact tone frequencies.
    """
    if isinstance(probes, str):
        probes = [probes]
    port = port or system.ports[0]
    T = system.period
    f_lo = 1.0 / T
    if abs(2 * f_in / f_lo - round(2 * f_in / f_lo)) < 1e-9:
        raise ValueError("f_in on a multiple of f_lo/2 folds components together; offset it")
    if analysis_periods is None:
        analysis_periods = _auto_window(f_in, f_lo)
    if system.saturating:
        return _saturating_dft(system, f_in, probes, port, settle_periods, analysis_periods,
                               harmonics, settle_tol)
    W = analysis_periods * T
    coherent = _commensurate(f_in, W)
    if not coherent:
        analysis_periods = max(analysis_periods, _flattop_periods(f_in, f_lo, harmonics))
    P = system.probe_matrix(probes)
    prop = _AugmentedPropagator(system, [Tone(port, f_in, 1.0, 0.0)])
    rows, pmap = _period_sampler(prop, P, samples_per_period, True)
    z = prop.initial()
    for _ in range(settle_periods):
        z = pmap @ z
        z[prop.io:] = 0.0
    x_start = z[:prop.n].copy()
    S = samples_per_period
    q = len(probes)
    data = np.empty((analysis_periods * S, q))
    for i in range(analysis_periods):
        data[i * S:(i + 1) * S] = (rows @ z).reshape(S, q)
        z = pmap @ z
        z[prop.io:] = 0.0
    x_end = z[:prop.n]
    if coherent:
        scale = max(np.linalg.norm(x_end), 1e-300)
        delta = np.linalg.norm(x_end - x_start) / scale
    else:
        rho = np.max(np.abs(np.linalg.eigvals(pmap[:prop.n, :prop.n]))) if prop.n else 0.0
        delta = rho ** settle_periods
    if delta > settle_tol:
        raise InsufficientSettlingError(
            f"residual transient {delta:.3g} after {settle_periods} periods (tolerance {settle_tol:g})", delta)
    dt = T / S
    t_mid = settle_periods * T + (np.arange(analysis_periods * S) + 0.5) * dt
    win = np.ones(len(t_mid)) if coherent else windows.flattop(len(t_mid), sym=False)
    out = {}
    ks = tuple(int(k) for k in harmonics)
    for j, p in enumerate(probes):
        name = p if isinstance(p, str) else repr(p)
        vals = []
        for k in ks:
            f = f_in + k * f_lo
            fa = abs(f)
            X = np.sum(win * data[:, j] * np.exp(-2j * np.pi * fa * t_mid)) / np.sum(win)
            X /= np.sinc(fa * dt)  # undo the interval average
            c = 2 * X
            vals.append(c if f > 0 else np.conj(c))
        out[name] = ToneResponse(f_in, name, f_lo, ks, np.array(vals), "transient_dft")
    return out


def _saturating_dft(system, f_in, probes, port, settle_periods, analysis_periods, harmonics, settle_tol):
    T = system.period
    f_lo = 1.0 / T
    if not _commensurate(f_in, analysis_periods * T):
        raise ValueError("saturating systems need f_in commensurate with the analysis window")
    ks = tuple(int(k) for k in harmonics)
    freqs = [f_in + k * f_lo for k in ks]
    res = nonlinear_transient_dft(system, [[Tone(port, f_in, 1.0, 0.0)]], probes, [abs(f) for f in freqs],
                                  settle_periods, analysis_periods, settle_tol=settle_tol)
    out = {}
    for name, arr in res.items():
        vals = np.array([c if f > 0 else np.conj(c) for c, f in zip(arr[0], freqs)])
        out[name] = ToneResponse(f_in, name, f_lo, ks, vals, "transient_dft")
    return out


def _flattop_periods(f_in, f_lo, harmonics, bins: float = 16.0) -> int:
    """Window length keeping tracked tones >= ``bins`` flat-top bins from any other product."""
    ks = np.arange(min(harmonics) - 8, max(harmonics) + 9)
    f = np.abs(f_in + ks * f_lo)
    tracked = np.abs(f_in + np.asarray(harmonics) * f_lo)
    sep = np.abs(tracked[:, None] - f[None, :])
    sep = sep[sep > 1e-9 * f_lo]
    return max(200, int(math.ceil(bins / (sep.min() / f_lo)))) if sep.size else 200


def _auto_window(f_in: float, f_lo: float, max_periods: int = 4000) -> int:
    """Smallest period count making f_in commensurate, else 200."""
    from fractions import Fraction
    r = Fraction(f_in / f_lo).limit_denominator(max_periods)
    if abs(float(r) - f_in / f_lo) < 1e-12 * max(1.0, f_in / f_lo):
        return max(r.denominator, 1)
    return 200


# --------------------------------------------------------------------------
# saturating systems: fixed-step RK4
# --------------------------------------------------------------------------


def _uniform_grid(system: PiecewiseLtiSystem, f_max: float, max_phase_step: float = 0.05,
                  min_steps_per_segment: int = 2) -> int:
    """Steps per period: every segment boundary on the grid, and
    ``2 pi f_max dt <= max_phase_step``."""
    from fractions import Fraction
    from math import lcm
    T = system.period
    den = 1
    for seg in system.segments:
        fr = Fraction(seg.start / T).limit_denominator(1 << 16)
        if abs(float(fr) - seg.start / T) > 1e-9:
            raise NPathError("segment boundaries are not on a rational grid; RK4 sampling needs one")
        den = lcm(den, fr.denominator)
    min_seg = min(s.duration for s in system.segments) / T
    need = max(min_steps_per_segment / min_seg, 2 * np.pi * f_max * T / max_phase_step)
    return int(den * math.ceil(need / den - 1e-9))


def nonlinear_transient_dft(system: PiecewiseLtiSystem, tone_sets: Sequence[Sequence[Tone]],
                            probes: Sequence, measure: Sequence[float], settle_periods: int = 100,
                            analysis_periods: int = 50, max_phase_step: float = 0.05,
                            settle_tol: float | None = None) -> dict:
    """RK4 transient of a (possibly saturating) system, batched over tone sets.

    Every tone set is an independent run sharing the same netlist.  Returns
    ``{probe: array[len(tone_sets), len(measure)]}`` of complex amplitudes
    (one-sided, ``2 X(f)``) at the frequencies in ``measure``, which must be
    commensurate with the analysis window.
    """
    T = system.period
    W = analysis_periods * T
    for f in measure:
        if not _commensurate(f, W):
            raise ValueError(f"measurement frequency {f} Hz is not commensurate with the window")
    f_max = max([abs(t.freq) for ts in tone_sets for t in ts] + [abs(f) for f in measure] + [1 / T])
    per = _uniform_grid(system, f_max, max_phase_step)
    dt = T / per
    n = system.state_dim
    nb = len(tone_sets)
    n_src = system.n_ports
    P = system.probe_matrix(probes)
    # tone table: (batch, port, freq, amp, phase)
    tones = [(b, system.ports.index(t.port), t.freq, t.amplitude, t.phase)
             for b, ts in enumerate(tone_sets) for t in ts]
    tb = np.array([t[0] for t in tones], dtype=int)
    tp = np.array([t[1] for t in tones], dtype=int)
    tw = 2 * np.pi * np.array([t[2] for t in tones]) if tones else np.zeros(0)
    ta = np.array([t[3] for t in tones]) if tones else np.zeros(0)
    tph = np.array([t[4] for t in tones]) if tones else np.zeros(0)

    def u_at(t):
        U = np.zeros((n_src + len(system.nl_elements), nb))
        if len(tones):
            np.add.at(U, (tp, tb), ta * np.cos(tw * t + tph))
        return U

    seg_of = np.empty(per, dtype=int)
    for i in range(per):
        seg_of[i] = system.segment_at((i + 0.5) * dt)
    mats = {}
    for s in set(seg_of.tolist()):
        seg = system.segments[s]
        mats[s] = (seg.A, seg.B, system.nl_ctrl @ seg.C, system.nl_ctrl @ seg.D[:, :n_src],
                   P @ seg.C, P @ seg.D)
    nl = bool(system.nl_elements)

    def rhs(s, t, x):
        A, B, Cc, Dc, _, _ = mats[s]
        U = u_at(t)
        if nl:
            U[n_src:] = nl_correction(system, Cc @ x + Dc @ U[:n_src])
        return A @ x + B @ U

    def output(s, t, x):
        _, _, Cc, Dc, PC, PD = mats[s]
        U = u_at(t)
        if nl:
            U[n_src:] = nl_correction(system, Cc @ x + Dc @ U[:n_src])
        return PC @ x + PD @ U

    x = np.zeros((n, nb))
    total = settle_periods + analysis_periods
    q = len(probes)
    rec = np.empty((analysis_periods * per, q, nb))
    x_mark = None
    idx = 0
    for p in range(total):
        if p == settle_periods:
            x_mark = x.copy()
        for i in range(per):
            s = seg_of[i]
            t = (p * per + i) * dt
            if p >= settle_periods:
                rec[idx] = output(s, t, x)
                idx += 1
            k1 = rhs(s, t, x)
            k2 = rhs(s, t + dt / 2, x + dt / 2 * k1)
            k3 = rhs(s, t + dt / 2, x + dt / 2 * k2)
            k4 = rhs(s, t + dt, x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if settle_tol is not None:
        scale = np.maximum(np.linalg.norm(x, axis=0), 1e-300)
        delta = float(np.max(np.linalg.norm(x - x_mark, axis=0) / scale))
        if delta > settle_tol:
            raise InsufficientSettlingError(f"residual transient {delta:.3g} after {settle_periods} periods",
                                            delta)
    t_s = settle_periods * T + np.arange(analysis_periods * per) * dt
    out = {}
    names = [p if isinstance(p, str) else repr(p) for p in probes]
    for j, nm in enumerate(names):
        res = np.empty((nb, len(measure)), dtype=complex)
        for m, f in enumerate(measure):
            e = np.exp(-2j * np.pi * f * t_s)
            res[:, m] = 2 * (e @ rec[:, j, :]) / len(t_s)
        out[nm] = res
    return out


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def _sweep_point(args):
    system, f, probes, port, harmonics = args
    try:
        return periodic_steady_state(system, f, probes, port, harmonics), None
    except NPathError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def harmonic_sweep(system, grid, probes: Sequence, port: str | None = None,
                   harmonics: Sequence[int] = DEFAULT_HARMONICS, jobs: int = 1,
                   metadata: dict | None = None) -> SweepResult:
    """Steady-state response at every grid frequency (points are independent).

    ``system`` is a :class:`PiecewiseLtiSystem` or a built receiver.  Point
    failures are recorded in ``errors`` and the sweep carries on.
    """
    if hasattr(system, "system") and not isinstance(system, PiecewiseLtiSystem):
        port = port or system.input_port
        system = system.system
    grid = np.asarray(grid, dtype=float)
    f_top = 8.0 / system.period
    if np.any(grid <= 0) or np.any(grid >= f_top):
        raise ValueError(f"sweep frequencies must lie in (0, {f_top:.6g}) Hz")
    probes = tuple(probes)
    f_lo = 1 / system.period
    tasks = [(system, float(f), probes, port, tuple(harmonics)) for f in grid]
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_point, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_sweep_point(t) for t in tasks]
    responses, errors, flags = [], {}, {}
    for i, (r, err) in enumerate(results):
        responses.append(r)
        if err:
            errors[i] = err
        ratio = grid[i] / f_lo
        if abs(ratio - round(ratio)) < 1e-9:
            flags[i] = f"exact harmonic {int(round(ratio))}: baseband component is the DC bin"
    return SweepResult(grid, probes, responses, errors, flags, dict(metadata or {}))
