"""Engineering-notation quantities: ``2pF``, ``500MHz``, ``10``, ``1.5e-12``."""

import re

_PREFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
    "k": 1e3, "K": 1e3, "M": 1e6, "G": 1e9, "T": 1e12,
}
_UNITS = ("Hz", "Ohm", "ohm", "F", "S", "s", "V", "A", "dBm", "dB", "Ω")
_NUM = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(text: str) -> float:
    """Parse a number with an optional SI prefix and unit.

    ``"2pF" -> 2e-12``; ``"500MHz" -> 5e8``; ``"1m" -> 1e-3``; ``"1M" -> 1e6``.
    """
    m = _NUM.match(str(text))
    if not m:
        raise ValueError(f"not a quantity: {text!r}")
    value = float(m.group(1))
    rest = m.group(2)
    for unit in _UNITS:
        if rest.endswith(unit) and (rest == unit or rest[:-len(unit)] in _PREFIX):
            rest = rest[:-len(unit)]
            break
    if rest == "":
        return value
    if rest in _PREFIX:
        return value * _PREFIX[rest]
    if rest.lower() == "meg":
        return value * 1e6
    raise ValueError(f"unknown suffix {rest!r} in {text!r}")
