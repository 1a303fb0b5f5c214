"""Multiphase clocks and pulse-width-modulated LO waveforms.

All waveforms here are piecewise constant over one LO period ``T = 1/f_lo``.
Fourier coefficients use the complex convention

    c_k = (1/T) * integral_0^T w(t) exp(-j 2 pi k t / T) dt

so a +/-1 square wave has ``|c_1| = 2/pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDutyError, InvalidGuardError, NetlistError, SynthesisError

__all__ = [
    "ClockScheme",
    "PwmWaveform",
    "PwmBank",
    "make_nonoverlap_clocks",
    "synthesize_pwm_lo",
    "square_lo_waveform",
    "split_and_shift",
    "fourier_coefficient",
    "spectrum_table",
    "window_referred_fundamental",
]


# --------------------------------------------------------------------------
# Rectangular multiphase clocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClockScheme:
    n_phases: int
    f_lo: float
    duty: float
    guard: float
    phase_windows: tuple  # ((start, end), ...) in seconds, one per phase

    @property
    def period(self) -> float:
        return 1.0 / self.f_lo

    def is_high(self, phase: int, t):
        """Indicator of phase ``phase`` (0-based) at time(s) ``t``."""
        start, end = self.phase_windows[phase]
        tm = np.mod(np.asarray(t, dtype=float), self.period)
        return (tm >= start) & (tm < end)

    def indicators(self, t) -> np.ndarray:
        return np.array([self.is_high(p, t) for p in range(self.n_phases)])

    def edges(self) -> list[float]:
        out = []
        for start, end in self.phase_windows:
            out.extend((start, end % self.period))
        return out

    def window(self, phase: int) -> list[tuple[float, float, float]]:
        start, end = self.phase_windows[phase]
        return [(start, end, 1.0)]


def make_nonoverlap_clocks(n_phases: int, f_lo: float, duty: float | None = None,
                           guard: float = 0.0) -> ClockScheme:
    """Build ``n_phases`` non-overlapping rectangular clocks.

    Phase k is high on ``[(k-1) T/n, (k-1) T/n + duty*T - guard)``.
    """
    if n_phases < 2:
        raise ValueError("n_phases must be >= 2")
    if duty is None:
        duty = 1.0 / n_phases
    T = 1.0 / f_lo
    if duty <= 0 or duty * n_phases > 1 + 1e-12:
        raise InvalidDutyError(f"duty {duty} must satisfy 0 < duty <= 1/{n_phases}")
    if guard < 0 or guard >= duty * T:
        raise InvalidGuardError(f"guard {guard} s consumes the whole {duty * T} s pulse")
    windows = []
    for k in range(n_phases):
        start = k * T / n_phases
        windows.append((start, start + duty * T - guard))
    return ClockScheme(n_phases, float(f_lo), float(duty), float(guard), tuple(windows))


# --------------------------------------------------------------------------
# PWM waveforms
# --------------------------------------------------------------------------


def _runs(values: np.ndarray) -> tuple:
    """Circular maximal runs of equal nonzero value -> ((start, end, pol), ...)."""
    K = len(values)
    nz = np.flatnonzero(values)
    if len(nz) == 0:
        return ()
    if np.all(values == values[0]):
        return ((0, K, int(values[0])),)
    # rotate so index 0 starts a run (or is a zero / a polarity change)
    starts = [i for i in range(K) if values[i] != 0 and values[i - 1] != values[i]]
    pulses = []
    for s in starts:
        e = s
        while values[e % K] == values[s] and e - s < K:
            e += 1
        pulses.append((s, e, int(values[s])))
    return tuple(sorted(pulses))


@dataclass(frozen=True)
class PwmWaveform:
    """Signed pulse train on a grid of ``grid_size`` cells per LO period.

    ``pulses`` holds circular runs ``(start_index, end_index, polarity)``;
    ``end_index`` is exclusive and may exceed ``grid_size`` for a pulse that
    wraps through t = 0.
    """

    f_lo: float
    grid_size: int
    pulses: tuple
    values: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_values(cls, f_lo: float, values) -> "PwmWaveform":
        v = np.asarray(values, dtype=int).copy()
        if not np.all(np.isin(v, (-1, 0, 1))):
            raise ValueError("PWM cell values must be -1, 0 or +1")
        v.setflags(write=False)
        return cls(float(f_lo), len(v), _runs(v), v)

    @classmethod
    def from_pulses(cls, f_lo: float, grid_size: int, pulses: Iterable) -> "PwmWaveform":
        v = np.zeros(grid_size, dtype=int)
        for start, end, pol in pulses:
            idx = np.arange(start, end) % grid_size
            if np.any(v[idx] != 0):
                raise ValueError(f"pulse ({start}, {end}) overlaps another pulse")
            v[idx] = pol
        return cls.from_values(f_lo, v)

    @property
    def period(self) -> float:
        return 1.0 / self.f_lo

    @property
    def resolution(self) -> float:
        return self.period / self.grid_size

    def value(self, t):
        idx = np.floor(np.mod(np.asarray(t, dtype=float), self.period) / self.resolution)
        return self.values[np.clip(idx.astype(int), 0, self.grid_size - 1)]

    def gate(self, t):
        """True where the waveform is nonzero (a switch driven by it is closed)."""
        return self.value(t) != 0

    def shifted(self, cells: int) -> "PwmWaveform":
        """Delay by ``cells`` grid units."""
        return PwmWaveform.from_values(self.f_lo, np.roll(self.values, cells))

    def polarity_part(self, polarity: int) -> "PwmWaveform":
        return PwmWaveform.from_values(self.f_lo, np.where(self.values == polarity, self.values, 0))

    def edges(self) -> list[float]:
        """Switching instants (seconds, in [0, T))."""
        d = self.resolution
        idx = [i for i in range(self.grid_size) if self.values[i] != self.values[i - 1]]
        return [i * d for i in idx]

    def coefficient(self, k: int) -> complex:
        return fourier_coefficient(self, k)

    @property
    def suppression_db(self) -> float:
        """20 log10 |c_1| / |c_3|."""
        return _db_ratio(abs(self.coefficient(1)), abs(self.coefficient(3)))

    @property
    def balance_db(self) -> float:
        """| 20 log10 |c_3| / |c_5| |."""
        return abs(_db_ratio(abs(self.coefficient(3)), abs(self.coefficient(5))))

    def is_half_wave_odd(self) -> bool:
        h = self.grid_size // 2
        return bool(np.all(np.roll(self.values, h) == -self.values))

    # text round trip -----------------------------------------------------

    def to_text(self) -> str:
        lines = ["# npathsim pwm-lo", f"# f_lo {self.f_lo!r}", f"# grid_size {self.grid_size}",
                 "# start_index end_index polarity"]
        lines += [f"{s} {e} {p:+d}" for s, e, p in self.pulses]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PwmWaveform":
        f_lo = grid = None
        pulses = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "f_lo":
                    f_lo = float(parts[1])
                elif len(parts) == 2 and parts[0] == "grid_size":
                    grid = int(parts[1])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise NetlistError("expected 'start end polarity'", lineno, 1)
            try:
                pulses.append((int(parts[0]), int(parts[1]), int(parts[2])))
            except ValueError as exc:
                raise NetlistError(str(exc), lineno, 1) from None
        if f_lo is None or grid is None:
            raise NetlistError("missing f_lo or grid_size header")
        return cls.from_pulses(f_lo, grid, pulses)


def _db_ratio(a: float, b: float) -> float:
    if a == 0:
        return -np.inf
    if b == 0:
        return np.inf
    return 20.0 * np.log10(a / b)


@dataclass(frozen=True)
class PwmBank:
    """Positive and negative pulse sequences, each copy delayed by T/n."""

    parent: PwmWaveform
    positive_sequences: tuple
    negative_sequences: tuple

    @property
    def n(self) -> int:
        return len(self.positive_sequences)

    def differential(self, k: int) -> np.ndarray:
        """gate(PWM_pk) - gate(PWM_nk) per cell."""
        return (self.positive_sequences[k].values != 0).astype(int) - (
            self.negative_sequences[k].values != 0).astype(int)


def split_and_shift(pwm: PwmWaveform, n: int = 8) -> PwmBank:
    if pwm.grid_size % n:
        raise ValueError(f"grid size {pwm.grid_size} is not divisible by {n}")
    step = pwm.grid_size // n
    pos = pwm.polarity_part(+1)
    neg = pwm.polarity_part(-1)
    return PwmBank(pwm,
                   tuple(pos.shifted(k * step) for k in range(n)),
                   tuple(neg.shifted(k * step) for k in range(n)))


# --------------------------------------------------------------------------
# Exact Fourier coefficients
# --------------------------------------------------------------------------


def _segments_coefficient(segments, k: int, period: float) -> complex:
    total = 0j
    for start, end, level in segments:
        if k == 0:
            total += level * (end - start)
        else:
            w = 2j * np.pi * k / period
            total += level * (np.exp(-w * end) - np.exp(-w * start)) / (-w)
    return complex(total / period)


def fourier_coefficient(w, k: int, period: float | None = None) -> complex:
    """Exact ``c_k`` of a piecewise-constant waveform.

    ``w`` is a :class:`PwmWaveform`, a :class:`ClockScheme` (phase 1 window),
    a cell-value array on a uniform grid (``period`` required), or a list of
    ``(start, end[, level])`` windows in seconds (``period`` required).
    """
    if k < 0:
        return np.conj(fourier_coefficient(w, -k, period))
    if isinstance(w, PwmWaveform):
        K = w.grid_size
        if k == 0:
            return complex(w.values.sum() / K)
        # pair cells half a period apart: e_(i+K/2) = (-1)^k e_i, which makes
        # even harmonics of a half-wave-odd pattern exactly zero
        v = w.values
        sign = -1 if k % 2 else 1
        if K % 2 == 0:
            h = K // 2
            v = v[:h] + sign * v[h:]
        idx = np.arange(len(v))
        e = np.exp(-2j * np.pi * k * idx / K)
        cell = (np.exp(-2j * np.pi * k / K) - 1.0) / (-2j * np.pi * k)
        return complex(np.sum(v * e) * cell)
    if isinstance(w, ClockScheme):
        return _segments_coefficient(w.window(0), k, w.period)
    if period is None:
        raise ValueError("period is required for raw window lists")
    arr = np.asarray(w)
    if arr.ndim == 1:
        K = len(arr)
        d = period / K
        return _segments_coefficient([(i * d, (i + 1) * d, arr[i]) for i in range(K)], k, period)
    segs = [(s[0], s[1], s[2] if len(s) > 2 else 1.0) for s in w]
    return _segments_coefficient(segs, k, period)


def _quarter_basis(K: int, center: int, harmonics: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Real aligned-frame coefficients contributed by each fundamental cell.

    A cell value in the fundamental domain [center, center + K/4) is mirrored
    about ``center`` and negated half a period later (odd half-wave symmetry).
    Returns (cells -> full-grid expansion matrix, harmonic x cell basis).
    """
    q = K // 4
    h = K // 2
    expand = np.zeros((q, K))
    for j in range(q):
        i = center + j
        m = 2 * center - 1 - i
        for c in (i, m):
            expand[j, c % K] += 1
            expand[j, (c + h) % K] -= 1
    idx = np.arange(K)
    basis = np.empty((len(harmonics), q))
    for r, k in enumerate(harmonics):
        e = (np.exp(-2j * np.pi * k * (idx + 1) / K) - np.exp(-2j * np.pi * k * idx / K)) / (-2j * np.pi * k)
        coeffs = expand @ e
        # remove the linear phase of the symmetry centre; what is left is real
        aligned = coeffs * np.exp(2j * np.pi * k * center / K)
        basis[r] = aligned.real
    return expand, basis


def _natural_pwm_seed(K: int, center: int, carrier_cycles: int) -> np.ndarray:
    """Three-level naturally sampled PWM of cos(3x) + cos(5x) about ``center``."""
    t = (np.arange(K) + 0.5 - center) / K  # in periods, relative to centre
    ref = np.cos(2 * np.pi * 3 * t) + np.cos(2 * np.pi * 5 * t)
    ref = ref / np.max(np.abs(ref))
    phase = np.mod(t * carrier_cycles, 1.0)
    tri = 2 * np.abs(phase - np.round(phase))  # 0 at the centre, 1 mid-cycle
    return np.where(np.abs(ref) > tri, np.sign(ref), 0).astype(int)


def _synthesize_symmetric(f_lo: float, K: int, suppression_target_db: float, balance_target_db: float,
                          center: int, max_iter: int) -> PwmWaveform:
    """Quarter-wave symmetric search: single-cell descent from natural-PWM seeds."""
    q = K // 4
    expand, basis = _quarter_basis(K, center, (1, 3, 5))

    def score(cells):
        r1, r3, r5 = basis @ cells
        a3, a5 = abs(r3), abs(r5)
        if a3 == 0 or a5 == 0 or np.sign(r3) != np.sign(r5):
            return (1e3, 0.0)
        supp = 20 * np.log10(max(abs(r1), 1e-300) / a3)
        bal = abs(20 * np.log10(a3 / a5))
        violation = max(0.0, supp - suppression_target_db) + max(0.0, bal - balance_target_db)
        return (violation, -a3)

    best_cells, best_score = None, None
    for cycles in range(2, K // 4 + 1, 2):
        seed = _natural_pwm_seed(K, center, cycles)
        cells = seed[center:center + q].astype(float)
        cur = score(cells)
        for _ in range(max_iter):
            move = None
            for j in range(q):
                for level in (-1.0, 0.0, 1.0):
                    if level == cells[j]:
                        continue
                    trial = cells.copy()
                    trial[j] = level
                    s = score(trial)
                    if s < cur and (move is None or s < move[0]):
                        move = (s, j, level)
            if move is None:
                # stalled: try moving a pulse as a whole (two cells at once)
                for j in range(q):
                    for j2 in range(j + 1, q):
                        for level in (-1.0, 0.0, 1.0):
                            for level2 in (-1.0, 0.0, 1.0):
                                if level == cells[j] or level2 == cells[j2]:
                                    continue
                                trial = cells.copy()
                                trial[j], trial[j2] = level, level2
                                s = score(trial)
                                if s < cur and (move is None or s < move[0]):
                                    move = (s, (j, j2), (level, level2))
                if move is None:
                    break
            cur = move[0]
            cells[np.atleast_1d(move[1])] = move[2]
        if best_score is None or cur < best_score:
            best_cells, best_score = cells.copy(), cur
    if best_score[0] > 0:
        r1, r3, _ = basis @ best_cells
        achieved = 20 * np.log10(max(abs(r1), 1e-300) / max(abs(r3), 1e-300))
        raise SynthesisError(
            f"no pattern on a {K}-cell grid met the targets; best |c1|/|c3| = {achieved:.1f} dB",
            best_suppression_db=achieved)
    values = np.rint(best_cells @ expand).astype(int)
    if basis[1] @ best_cells < 0:
        values = -values
    return PwmWaveform.from_values(f_lo, values)




def window_referred_fundamental(values, n_windows: int = 8) -> complex:
    """First spatial harmonic of the per-window averages of a cell pattern.

    This is what an ``n_windows``-path sampler sees of the waveform near f_lo:
    every LO harmonic m = 1 (mod n) folds onto it, weighted by the window sinc.
    Divided by ``sinc(1/n)`` it equals ``c_1`` when the pattern is constant over
    each window.
    """
    v = np.asarray(values, dtype=float)
    K = len(v)
    if K % n_windows:
        raise ValueError("grid size must be a multiple of the window count")
    avgs = v.reshape(n_windows, K // n_windows).mean(axis=1)
    k = np.arange(n_windows)
    return complex(np.sum(avgs * np.exp(-2j * np.pi * (k + 0.5) / n_windows)) / n_windows)


def _cell_basis(K: int, harmonics: Sequence[int]) -> np.ndarray:
    """Coefficient of each first-half cell of a half-wave-odd pattern (odd k)."""
    idx = np.arange(K // 2)
    ks = np.asarray(harmonics)[:, None]
    e = (np.exp(-2j * np.pi * ks * (idx + 1) / K) - np.exp(-2j * np.pi * ks * idx / K)) / (-2j * np.pi * ks)
    return 2 * e


def _best_window_sums(K: int, n: int, center: int) -> tuple[np.ndarray, int]:
    """Half-period window sums whose spatial fundamental is smallest against the 3rd.

    Ties go to the largest 3rd, then to the 3rd closest to the centre's phase.
    Returns the sums and the sign (+1/-1) of the aligned 3rd.
    """
    L, h = K // n, n // 2
    levels = np.arange(-L, L + 1, dtype=np.int8)
    a = np.stack(np.meshgrid(*[levels] * h, indexing="ij"), -1).reshape(-1, h).astype(float)
    th = 2 * np.pi * (np.arange(h) + 0.5) / n
    s1 = np.abs(a @ np.exp(-1j * th))
    s3c = (a @ np.exp(-3j * th)) * np.exp(2j * np.pi * 3 * center / K)
    s3 = np.abs(s3c)
    ok = s3 > 1e-9
    ratio = np.where(ok, s1 / np.where(ok, s3, 1.0), np.inf)
    # snap to a relative grid so exact ties stay ties under rounding
    key_ratio = np.round(ratio, 12)
    tilt = np.abs(np.angle(s3c ** 2)) / 2  # distance of the phase to 0 or pi
    order = np.lexsort((np.round(tilt, 9), -np.round(s3, 9), key_ratio))
    best = order[0]
    return a[best].astype(int), 1 if s3c[best].real >= 0 else -1


def _synthesize_windowed(f_lo: float, K: int, n: int, suppression_target_db: float, balance_target_db: float,
                         alias_tolerance_db: float, phase_tolerance_deg: float, center: int,
                         restarts: int, seed: int) -> PwmWaveform:
    L = K // n
    sums, sign = _best_window_sums(K, n, center)
    B = _cell_basis(K, (1, 3, 5))
    rot = np.exp(2j * np.pi * np.array([3, 5]) * center / K)
    ref0 = 0.0 if sign > 0 else np.pi
    # referred fundamental is fixed by the window sums; the window sinc maps it to c_1
    full = np.concatenate([np.repeat(sums, L), -np.repeat(sums, L)]) / L
    ref = abs(window_referred_fundamental(full, n)) * np.sinc(1 / n)

    def violation(c):
        c1, c3, c5 = np.abs(c[..., 0]), np.abs(c[..., 1]), np.abs(c[..., 2])
        with np.errstate(divide="ignore"):
            supp = 20 * np.log10(np.maximum(c1, 1e-300) / np.maximum(c3, 1e-300))
            bal = np.abs(20 * np.log10(np.maximum(c3, 1e-300) / np.maximum(c5, 1e-300)))
            alias = np.abs(20 * np.log10(ref / np.maximum(c1, 1e-300)))
        ph = np.abs(np.angle(c[..., 1:] * rot * np.exp(-1j * ref0), deg=True))
        return (np.maximum(0, supp - suppression_target_db) + np.maximum(0, bal - balance_target_db)
                + np.maximum(0, alias - alias_tolerance_db)
                + np.sum(np.maximum(0, ph - phase_tolerance_deg), axis=-1) / 5.0), supp

    # every move keeps the window sum: +d on one cell, -d on another in the same window
    ii, jj = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
    off = ii != jj
    pi_, pj_ = ii[off], jj[off]
    pairs_i = np.concatenate([w * L + pi_ for w in range(n // 2)])
    pairs_j = np.concatenate([w * L + pj_ for w in range(n // 2)])

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        cells = np.zeros(K // 2, dtype=int)
        for w, a in enumerate(sums):
            sgn = 1 if a >= 0 else -1
            extra = rng.integers(0, (L - abs(a)) // 2 + 1)
            idx = rng.permutation(L) + w * L
            cells[idx[:abs(a) + extra]] = sgn
            cells[idx[abs(a) + extra:abs(a) + 2 * extra]] = -sgn
        c = B @ cells
        cur, supp = violation(c)
        while cur > 0:
            hi, hj = cells[pairs_i], cells[pairs_j]
            trials, moves = [], []
            for d in (1, 2):
                ok = (hi + d <= 1) & (hj - d >= -1)
                if np.any(ok):
                    trials.append(c + d * (B[:, pairs_i[ok]] - B[:, pairs_j[ok]]).T)
                    moves.append((pairs_i[ok], pairs_j[ok], d))
            if not trials:
                break
            scores = [violation(t)[0] for t in trials]
            r = int(np.argmin([s.min() for s in scores]))
            m = int(np.argmin(scores[r]))
            if scores[r][m] >= cur - 1e-12:
                break
            i, j, d = moves[r][0][m], moves[r][1][m], moves[r][2]
            cells[i] += d
            cells[j] -= d
            c = trials[r][m]
            cur, supp = violation(c)
        if best is None or cur < best[0]:
            best = (cur, float(supp), cells.copy())
        if cur == 0:
            break
    if best[0] > 0:
        raise SynthesisError(
            f"no pattern on a {K}-cell grid met the targets; best |c1|/|c3| = {best[1]:.1f} dB",
            best_suppression_db=best[1])
    values = np.concatenate([best[2], -best[2]])
    return PwmWaveform.from_values(f_lo, sign * values)


def synthesize_pwm_lo(f_lo: float, grid_size: int = 64, suppression_target_db: float = -40.0,
                      balance_target_db: float = 0.5, center: int | None = None, max_iter: int = 500,
                      method: str = "windowed", alias_tolerance_db: float = 1.0,
                      phase_tolerance_deg: float = 10.0, restarts: int = 200, seed: int = 0,
                      n_windows: int = 8) -> PwmWaveform:
    """Search a three-level, odd half-wave symmetric pulse pattern with a
    suppressed fundamental and nearly equal 3rd and 5th harmonics.

    ``method="windowed"`` (default) first fixes the per-window sums so the
    fundamental seen through an ``n_windows``-path sampler is nulled, then
    arranges pulses inside each window (seeded random starts, steepest
    descent over sum-preserving moves) until c_1/c_3, the 3rd/5th balance,
    their phase against the window centre (within ``phase_tolerance_deg``),
    and the gap between |c_1| and the sampler-referred fundamental (within
    ``alias_tolerance_db``) all meet their targets.

    ``method="symmetric"`` keeps the pattern also even about ``center``, so
    every coefficient is real after removing the centre's linear phase.  It
    nulls c_1 but not the sampler-referred fundamental, which then stays
    20-30 dB above |c_1|.

    ``center`` defaults to ``grid_size/16``, the middle of the first window.
    """
    if grid_size % 16:
        raise ValueError("grid_size must be a multiple of 16")
    if not all(np.isfinite(x) for x in (suppression_target_db, balance_target_db,
                                         alias_tolerance_db, phase_tolerance_deg)):
        raise ValueError("targets must be finite")
    K = grid_size
    center = K // 16 if center is None else int(center)
    if method == "symmetric":
        return _synthesize_symmetric(f_lo, K, suppression_target_db, balance_target_db, center, max_iter)
    if method != "windowed":
        raise ValueError(f"unknown synthesis method {method!r}")
    if K % (2 * n_windows):
        raise ValueError("grid_size must be a multiple of 2 * n_windows")
    return _synthesize_windowed(f_lo, K, n_windows, suppression_target_db, balance_target_db,
                                alias_tolerance_db, phase_tolerance_deg, center, restarts, seed)


def square_lo_waveform(f_lo: float, grid_size: int = 64, center: int | None = None) -> PwmWaveform:
    """+/-1 square LO whose positive half is centred on ``center``."""
    K = grid_size
    center = K // 16 if center is None else int(center)
    idx = (np.arange(K) - center + K // 4) % K
    return PwmWaveform.from_values(f_lo, np.where(idx < K // 2, 1, -1))


def spectrum_table(w: PwmWaveform, k_max: int = 15) -> list[tuple[int, float, float]]:
    """Rows of (k, |c_k| dB, phase deg) for k = 0..k_max."""
    rows = []
    for k in range(k_max + 1):
        c = w.coefficient(k)
        mag = abs(c)
        rows.append((k, 20 * np.log10(mag) if mag > 1e-15 else -300.0,
                     float(np.degrees(np.angle(c))) if mag > 1e-15 else 0.0))
    return rows
