"""Switched-network representation and piecewise-LTI lifting."""

from .lti import (PiecewiseLtiSystem, Segment, Stamp, Tone, extract_segments, propagate_segment,
                  resolve_controls, stamp)
from .netlist import GROUND, Element, Netlist, capacitor, isource, resistor, switch, vccs, vsource

__all__ = ["GROUND", "Element", "Netlist", "PiecewiseLtiSystem", "Segment", "Stamp", "Tone",
           "capacitor", "extract_segments", "isource", "propagate_segment", "resistor",
           "resolve_controls", "stamp", "switch", "vccs", "vsource"]
