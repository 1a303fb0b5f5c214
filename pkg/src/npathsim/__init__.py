"""Behavioural simulation of switched-capacitor N-path receivers with a
harmonic-selective PWM feedback loop."""

from .blocks import ReceiverConfig, build_receiver
from .clocks import PwmWaveform, fourier_coefficient, make_nonoverlap_clocks, synthesize_pwm_lo
from .engine import harmonic_sweep, periodic_steady_state, transient_dft
from .errors import NPathError

__version__ = "0.1.0"

__all__ = ["ReceiverConfig", "build_receiver", "PwmWaveform", "fourier_coefficient", "make_nonoverlap_clocks",
           "synthesize_pwm_lo", "harmonic_sweep", "periodic_steady_state", "transient_dft", "NPathError",
           "__version__"]
