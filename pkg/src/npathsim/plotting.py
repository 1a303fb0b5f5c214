"""Matplotlib figures for the CLI studies (written next to the CSV output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"figure.figsize": (7.0, 4.2), "axes.grid": True, "grid.alpha": 0.3, "savefig.dpi": 120}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_sweep(result, path, probes=("vrf", "bb", "I")):
    """|V_rf| at the input frequency and the baseband component of each baseband probe."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        f = result.grid / 1e9
        for p in probes:
            if p not in result.probes:
                continue
            vals = result.curve(p, 0 if p == "vrf" else "bb")
            mag = np.abs(vals)
            ref = np.nanmax(mag) if p != "vrf" else 1.0
            label = "V_rf (abs)" if p == "vrf" else f"{p} baseband (rel.)"
            with np.errstate(divide="ignore"):
                db = 20 * np.log10(mag / ref)
            ax.plot(f, np.where(db > -200, db, np.nan), label=label, lw=1.2)  # even bands cancel exactly
        ax.set_xlabel("input frequency (GHz)")
        ax.set_ylabel("response (dB)")
        ax.set_ylim(bottom=-80)
        ax.legend(loc="lower right", fontsize=8)
        _save(fig, path)


def plot_harmonic_bands(curve, path):
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(curve.probes), sharey=True, squeeze=False)
        for ax, p in zip(axes[0], curve.probes):
            for b in curve.bands:
                ax.plot(curve.offsets / 1e6, curve.curves[(p, b)], label=f"{b} f_LO", lw=1.2)
            ax.set_title(p, fontsize=9)
            ax.set_xlabel("offset (MHz)")
        axes[0][0].set_ylabel("baseband response (dB)")
        axes[0][-1].legend(fontsize=8)
        _save(fig, path)


def plot_rf(responses, path):
    """``responses``: {label: RfResponse}."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, r in responses.items():
            ax.plot(r.grid / 1e9, r.vrf_db, label=label, lw=1.2)
        ax.set_xlabel("input frequency (GHz)")
        ax.set_ylabel("|V_rf / V_s| (dB)")
        ax.legend(fontsize=8)
        _save(fig, path)


def plot_hrr(result, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(result.harmonics))
        ax.bar(x - 0.2, [result.proposed[m] for m in result.harmonics], 0.4, label="proposed")
        ax.bar(x + 0.2, [result.single_stage[m] for m in result.harmonics], 0.4, label="N-path + HR1")
        ax.set_xticks(x, [f"HRR{m}" for m in result.harmonics])
        ax.set_ylabel("dB")
        ax.legend(fontsize=8)
        _save(fig, path)


def plot_peakshift(result, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        rows = np.array(result.table)
        cin = rows[(rows[:, 1] == 0)]
        cx = rows[(rows[:, 0] == 0)]
        ax.plot(cin[:, 0] * 1e12, 100 * (cin[:, 2] / result.f_lo - 1), "o-", label="C_in (C_X = 0)")
        ax.plot(cx[:, 1] * 1e12, 100 * (cx[:, 2] / result.f_lo - 1), "s-", label="C_X (C_in = 0)")
        ax.set_xlabel("capacitance (pF)")
        ax.set_ylabel("peak shift (% of f_LO)")
        ax.legend(fontsize=8)
        _save(fig, path)


def plot_compression(results, path):
    """``results``: {label: CompressionResult}."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, r in results.items():
            ax.plot(r.powers_dbm, r.gain_db - r.linear_gain_db, label=f"{label} (B3dB {r.b3db_dbm:.1f} dBm)")
        ax.axhline(-3, color="k", lw=0.8, ls="--")
        ax.set_xlabel("blocker power (dBm)")
        ax.set_ylabel("gain change (dB)")
        ax.legend(fontsize=8)
        _save(fig, path)


def plot_pwm(waveform, path, k_max=15):
    from .clocks import fourier_coefficient
    with plt.rc_context(_STYLE):
        fig, (a1, a2) = plt.subplots(2, 1)
        v = np.asarray(waveform.values, dtype=float)
        t = np.arange(len(v) + 1) / len(v)
        a1.step(t, np.append(v, v[0]), where="post")
        a1.set_xlabel("t / T")
        a1.set_ylabel("level")
        ks = np.arange(1, k_max + 1)
        mag = np.array([abs(fourier_coefficient(waveform, int(k))) for k in ks])
        a2.stem(ks, 20 * np.log10(np.maximum(mag, 1e-12)), bottom=-120)
        a2.set_xlabel("harmonic")
        a2.set_ylabel("|c_k| (dB)")
        _save(fig, path)


def plot_impedance(result, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(result.freqs / 1e6, result.gamma_db)
        ax.set_xlabel("frequency (MHz)")
        ax.set_ylabel("S11 (dB)")
        _save(fig, path)
