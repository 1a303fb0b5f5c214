"""``npathsim`` command line: run a named study, write CSV (and a figure).

Exit status: 0 success, 2 configuration error, 3 simulation error.  Output
files are staged next to their destination and renamed only once every
artifact of the study is ready, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, config, metrics
from .blocks import build_receiver, loop_waveform
from .clocks import spectrum_table
from .engine import harmonic_sweep
from .errors import ConfigError, NPathError

STUDIES = ("sweep", "rf-response", "hrr", "peakshift", "compress", "pwm-design", "noise-translation", "impedance")
SWEEP_PROBES = ("vrf", "bb", "I", "Q")

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3


class Artifacts:
    """Files produced by a study, committed together."""

    def __init__(self, csv_path: Path):
        self.csv_path = csv_path
        self.texts: dict[Path, str] = {}
        self.figures: list = []  # (path, fn, args)

    def text(self, path: Path, body: str):
        self.texts[path] = body

    def figure(self, fn, *args, suffix=".png"):
        self.figures.append((self.csv_path.with_suffix(suffix), fn, args))

    def commit(self, plot: bool) -> list[Path]:
        staged = []
        try:
            for path, body in self.texts.items():
                staged.append((self._stage(path, lambda p, b=body: Path(p).write_text(b)), path))
            if plot:
                for path, fn, args in self.figures:
                    staged.append((self._stage(path, lambda p, f=fn, a=args: f(*a, p)), path))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)
        return [path for _, path in staged]

    @staticmethod
    def _stage(path: Path, write) -> str:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=path.suffix)
        os.close(fd)
        try:
            write(tmp)
        except BaseException:
            os.unlink(tmp)
            raise
        return tmp


def _header(study: str, settings: config.Settings, timestamp: bool) -> str:
    rc = settings.receiver
    lines = [f"# npathsim {__version__}", f"# study={study}", f"# config_hash={config.config_hash(settings)}",
             f"# loop={'on' if rc.loop_enabled else 'off'}", f"# upconverter_mode={rc.upconverter_mode}"]
    if timestamp:
        lines.append(f"# generated={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# studies: each returns (csv body, summary lines) and registers artifacts
# --------------------------------------------------------------------------


def _sweep(s: config.Settings, art: Artifacts):
    from .plotting import plot_sweep
    rx = build_receiver(s.receiver)
    res = harmonic_sweep(rx, s.study.grid, SWEEP_PROBES, jobs=s.study.jobs)
    if res.errors:
        i, msg = next(iter(sorted(res.errors.items())))
        raise NPathError(f"{len(res.errors)} sweep point(s) failed; first at {res.grid[i]:.6g} Hz: {msg}")
    art.figure(plot_sweep, res)
    bb = np.abs(res.curve("bb", "bb"))
    f_pk = res.grid[int(np.argmax(bb))]
    return res.to_csv(), [f"sweep points={len(res.grid)} range={res.grid[0]:.6g}..{res.grid[-1]:.6g}Hz "
                          f"bb_peak_at={f_pk:.6g}Hz"]


def _rf_response(s, art):
    from .plotting import plot_rf
    st = s.study
    r = metrics.rf_node_response(build_receiver(s.receiver), st.grid, span=st.span, jobs=st.jobs)
    art.figure(plot_rf, {f"loop {r.metadata['loop']}": r})
    return r.to_csv(), [r.summary()]


def _hrr(s, art):
    from .plotting import plot_hrr
    r = metrics.hrr(s.receiver, (3, 5), s.study.offset)
    art.figure(plot_hrr, r)
    return r.to_csv(), [r.summary()]


def _peakshift(s, art):
    from .plotting import plot_peakshift
    r = metrics.peak_shift_study(s.receiver)
    art.figure(plot_peakshift, r)
    return r.to_csv(), [r.summary()]


def _compress(s, art):
    from .plotting import plot_compression
    st = s.study
    powers = np.arange(st.compress_power_start, st.compress_power_stop + st.compress_power_step / 2,
                       st.compress_power_step)
    r = metrics.blocker_compression(s.receiver, st.compress_harmonic, st.compress_blocker_offset,
                                    st.compress_desired_offset, powers)
    art.figure(plot_compression, {f"loop {r.metadata['loop']}": r})
    return r.to_csv(), [r.summary()]


def _pwm_design(s, art):
    from .plotting import plot_pwm
    w = loop_waveform(s.receiver)
    art.text(art.csv_path.with_suffix(".pwm"), w.to_text())
    art.figure(plot_pwm, w)
    body = "k,mag_db,phase_deg\n" + "".join(f"{k},{m:.6f},{p:.6f}\n" for k, m, p in spectrum_table(w))
    return body, [f"pwm_design grid={w.grid_size} pulses={len(w.pulses)} c1/c3={w.suppression_db:.2f}dB "
                  f"c3/c5={w.balance_db:.3f}dB"]


def _noise_translation(s, art):
    r = metrics.noise_translation_test(s.receiver, s.study.offset)
    return r.to_csv(), [r.summary()]


def _impedance(s, art):
    from .plotting import plot_impedance
    st, rc = s.study, s.receiver
    f_lo = rc.npath.f_lo
    freqs = f_lo + np.linspace(-st.span, st.span, st.offset_points)
    r = metrics.input_impedance(rc, freqs)
    f0 = st.impedance_freq if st.impedance_freq is not None else f_lo
    point = metrics.input_impedance(rc, [f0])
    art.figure(plot_impedance, r)
    return r.to_csv(), [point.summary()]


_RUNNERS = {"sweep": _sweep, "rf-response": _rf_response, "hrr": _hrr, "peakshift": _peakshift,
            "compress": _compress, "pwm-design": _pwm_design, "noise-translation": _noise_translation,
            "impedance": _impedance}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="npathsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"npathsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                        help="override one key (repeatable)")
    common.add_argument("--loop", choices=("on", "off"), help="shorthand for --set loop=on|off")
    sub = ap.add_subparsers(dest="study", required=True, metavar="STUDY")
    for name in STUDIES:
        p = sub.add_parser(name, parents=[common], help=f"run the {name} study")
        p.add_argument("--out", metavar="PATH", help=f"CSV path (default {name}.csv)")
        p.add_argument("--jobs", type=int, metavar="N", help="worker processes for sweeps")
        p.add_argument("--no-timestamp", action="store_true", help="omit the generated= header line")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    sub.add_parser("validate", parents=[common], help="print the resolved parameter table")
    return ap


def _settings(args) -> config.Settings:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc.strerror}") from None
    overrides = list(args.overrides)
    if args.loop:
        overrides.append(f"loop={args.loop}")
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1", key="jobs")
        overrides.append(f"jobs={args.jobs}")
    return config.load(text, overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        settings = _settings(args)
    except ConfigError as exc:
        where = f"{args.config}: " if args.config and exc.line is not None else ""
        print(f"npathsim: config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.study == "validate":
        sys.stdout.write(config.render(settings))
        print(f"# config_hash={config.config_hash(settings)}")
        return EXIT_OK
    out = Path(args.out or f"{args.study}.csv")
    art = Artifacts(out)
    try:
        body, summary = _RUNNERS[args.study](settings, art)
        art.text(out, _header(args.study, settings, not args.no_timestamp) + body)
        written = art.commit(plot=not args.no_plot)
    except ConfigError as exc:
        print(f"npathsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NPathError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"npathsim: simulation error in {args.study}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM
    for line in summary:
        print(line)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
