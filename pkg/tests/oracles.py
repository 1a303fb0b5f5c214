"""Reference computations that share no code with the package under test."""

import numpy as np
from scipy.signal import lfilter


def riemann_coefficient(values, k, oversample=10):
    """c_k of a cell-valued waveform by midpoint Riemann summation.

    Each of the K cells is split into ``oversample`` sub-cells and
    ``value(t) exp(-j 2 pi k t / T)`` is summed at their midpoints (T = 1).
    """
    v = np.repeat(np.asarray(values, dtype=float), oversample)
    n = len(v)
    t = (np.arange(n) + 0.5) / n
    return complex(np.sum(v * np.exp(-2j * np.pi * k * t)) / n)


def plain_npath_spectrum(f_in, f_lo, r_s, r_on, c_bb, harmonics, n_paths=8, settle_periods=250,
                         analysis_periods=40, steps_per_period=100_000):
    """Differential N-path driven by cos(2 pi f_in t), integrated with the
    trapezoidal rule at a fixed step; returns {probe: {k: complex}} for the
    rf (rf_p - rf_n) and bb (bb1 - bb_{N/2+1}) probes.

    rf_p is tied to cap k and rf_n to cap k + N/2 during phase k; each side
    sees half the source voltage behind r_s/2 + r_on.  ``f_in`` must be
    commensurate with the analysis window.
    """
    T = 1.0 / f_lo
    m = steps_per_period // n_paths
    if m * n_paths != steps_per_period:
        raise ValueError("steps per period must split evenly over the phases")
    h = T / steps_per_period
    R = r_s / 2 + r_on
    a = h / (2 * R * c_bb)
    b_coef = np.array([a, a]) / (1 + a)
    a_coef = np.array([1.0, -(1 - a) / (1 + a)])
    w = 2 * np.pi * f_in
    half = n_paths // 2
    v = np.zeros(n_paths)
    rf_out, bb_out = [], []
    for period in range(settle_periods + analysis_periods):
        for k in range(n_paths):
            t = (period * steps_per_period + k * m + np.arange(m + 1)) * h
            u = 0.5 * np.cos(w * t)
            traj = {}
            for cap, src in ((k, u), ((k + half) % n_paths, -u)):
                # y[n] = alpha y[n-1] + beta (s[n] + s[n-1]), started from the held value
                zi = np.array([v[cap] * (1 - a) / (1 + a) + b_coef[1] * src[0]])
                y, _ = lfilter(b_coef, a_coef, src[1:], zi=zi)
                traj[cap] = (np.concatenate(([v[cap]], y)), src)
            if period >= settle_periods:
                (vp, sp), (vn, sn) = traj[k], traj[(k + half) % n_paths]
                rf = (vp + r_on * (sp - vp) / R) - (vn + r_on * (sn - vn) / R)
                rf_out.append(rf[:-1])
                bb = [traj[c][0][:-1] if c in traj else np.full(m, v[c]) for c in (0, half)]
                bb_out.append(bb[0] - bb[1])
            for cap, (tr, _) in traj.items():
                v[cap] = tr[-1]
    t = settle_periods * T + np.arange(analysis_periods * steps_per_period) * h
    out = {}
    for name, x in (("vrf", np.concatenate(rf_out)), ("bb", np.concatenate(bb_out))):
        out[name] = {k: _component(x, t, f_in + k * f_lo) for k in harmonics}
    return out


def _component(x, t, f):
    """Complex amplitude at signed frequency f (negative f: conjugate convention)."""
    if f == 0:
        return complex(np.mean(x))
    c = 2 * np.mean(x * np.exp(-2j * np.pi * abs(f) * t))
    return complex(c if f > 0 else np.conj(c))


def exact_cell_coefficient(values, k):
    """c_k of a cell-valued waveform (T = 1) from the closed-form cell integral.

    A cell of width 1/K centred at t_i contributes v_i e^{-j 2 pi k t_i} sinc(k/K) / K.
    """
    v = np.asarray(values, dtype=float)
    K = len(v)
    if k == 0:
        return complex(v.mean())
    t = (np.arange(K) + 0.5) / K
    return complex(np.sum(v * np.exp(-2j * np.pi * k * t)) * np.sinc(k / K) / K)


def sampled_fundamental(values, n_windows=8, oversample=16):
    """Fundamental seen by an ideal n-path sampler: each window's mean of the
    oversampled waveform, projected on exp(-j 2 pi t) at the window centres."""
    v = np.repeat(np.asarray(values, dtype=float), oversample)
    per = len(v) // n_windows
    means = [v[i * per:(i + 1) * per].mean() for i in range(n_windows)]
    centres = (np.arange(n_windows) + 0.5) / n_windows
    return complex(sum(m * np.exp(-2j * np.pi * c) for m, c in zip(means, centres)) / n_windows)
