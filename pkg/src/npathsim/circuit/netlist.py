"""Node/element graph for switched R-C-transconductor networks.

Text grammar (one element per line, ``#`` starts a comment, ground is ``0``
or ``gnd``)::

    R   name  n1 n2  value
    C   name  n1 n2  value
    SW  name  n1 n2  r_on  control
    G   name  out_p out_n ctrl_p ctrl_n  gm  [imax=VALUE] [ctrl=CONTROL]
    V   name  n_p n_n  port  [gain]
    I   name  n_p n_n  port  [gain]
    .probe name node [node_neg]
    .gmin  value

``G`` injects ``gm * (v(ctrl_p) - v(ctrl_n))`` into ``out_p`` and draws it
from ``out_n``; with ``imax`` the current is ``imax * tanh(gm * v / imax)``.
``ctrl=`` gates the element by a named control waveform.  ``I`` injects
``gain * u(port)`` into ``n_p``.  Values accept SI suffixes (``2pF``).
Controls are named ``P1..Pn`` (clock phases), ``PWMp1..``/``PWMn1..``
(PWM bank sequences) or ``ON``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import NetlistError
from ..units import parse_quantity

GROUND = "0"
_GROUND_ALIASES = {"0", "gnd", "GND"}

KINDS = ("R", "C", "SW", "G", "V", "I")


def _canon(node: str) -> str:
    return GROUND if node in _GROUND_ALIASES else node


@dataclass(frozen=True)
class Element:
    kind: str
    name: str
    nodes: tuple
    value: float = 0.0
    control: str | None = None
    i_max: float | None = None
    port: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetlistError(f"unknown element kind {self.kind!r}")
        want = {"R": 2, "C": 2, "SW": 2, "G": 4, "V": 2, "I": 2}[self.kind]
        if len(self.nodes) != want:
            raise NetlistError(f"{self.kind} {self.name} needs {want} nodes")
        object.__setattr__(self, "nodes", tuple(_canon(n) for n in self.nodes))
        if self.kind in ("R", "C", "SW") and not self.value > 0:
            raise NetlistError(f"{self.name}: value must be > 0, got {self.value}")
        if self.kind == "SW" and not self.control:
            raise NetlistError(f"switch {self.name} has no control")
        if self.kind in ("V", "I") and not self.port:
            raise NetlistError(f"source {self.name} has no port")
        if self.i_max is not None and not self.i_max > 0:
            raise NetlistError(f"{self.name}: imax must be > 0")

    @property
    def saturating(self) -> bool:
        return self.kind == "G" and self.i_max is not None

    @property
    def gated(self) -> bool:
        return self.kind == "SW" or (self.kind == "G" and self.control is not None)


def resistor(name, a, b, r):
    return Element("R", name, (a, b), float(r))


def capacitor(name, a, b, c):
    return Element("C", name, (a, b), float(c))


def switch(name, a, b, r_on, control):
    return Element("SW", name, (a, b), float(r_on), control=control)


def vccs(name, out_p, out_n, ctrl_p, ctrl_n, gm, i_max=None, control=None):
    return Element("G", name, (out_p, out_n, ctrl_p, ctrl_n), float(gm), control=control,
                   i_max=None if i_max is None else float(i_max))


def vsource(name, p, n, port, gain=1.0):
    return Element("V", name, (p, n), float(gain), port=port)


def isource(name, p, n, port, gain=1.0):
    return Element("I", name, (p, n), float(gain), port=port)


@dataclass
class Netlist:
    elements: list = field(default_factory=list)
    probes: dict = field(default_factory=dict)  # name -> (node, node_neg)
    gmin: float = 0.0

    def add(self, element: Element) -> Element:
        if any(e.name == element.name for e in self.elements):
            raise NetlistError(f"duplicate element name {element.name!r}")
        self.elements.append(element)
        return element

    def extend(self, elements):
        for e in elements:
            self.add(e)

    def probe(self, name: str, node: str, node_neg: str = GROUND):
        self.probes[name] = (_canon(node), _canon(node_neg))

    @property
    def nodes(self) -> list[str]:
        """Non-ground nodes in order of first appearance."""
        seen = {}
        for e in self.elements:
            for n in e.nodes:
                if n != GROUND:
                    seen.setdefault(n, None)
        return list(seen)

    @property
    def switches(self) -> list[Element]:
        return [e for e in self.elements if e.gated]

    @property
    def controls(self) -> set:
        return {e.control for e in self.elements if e.control}

    @property
    def ports(self) -> list[str]:
        seen = {}
        for e in self.elements:
            if e.port:
                seen.setdefault(e.port, None)
        return list(seen)

    def validate(self):
        nodes = set(self.nodes) | {GROUND}
        for name, (a, b) in self.probes.items():
            for n in (a, b):
                if n not in nodes:
                    raise NetlistError(f"probe {name!r} references undeclared node {n!r}")

    # text format ---------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "Netlist":
        net = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            col = len(line) - len(line.lstrip()) + 1
            tok = line.split()
            head = tok[0]
            try:
                if head == ".probe":
                    if len(tok) not in (3, 4):
                        raise NetlistError(".probe needs a name and 1-2 nodes")
                    net.probe(tok[1], *tok[2:])
                elif head == ".gmin":
                    net.gmin = parse_quantity(tok[1])
                elif head.upper() in ("R", "C"):
                    _need(tok, 5)
                    net.add(Element(head.upper(), tok[1], (tok[2], tok[3]), parse_quantity(tok[4])))
                elif head.upper() == "SW":
                    _need(tok, 6)
                    net.add(switch(tok[1], tok[2], tok[3], parse_quantity(tok[4]), tok[5]))
                elif head.upper() == "G":
                    if len(tok) < 7:
                        raise NetlistError("G needs name, 4 nodes and gm")
                    opts = dict(_kv(t) for t in tok[7:])
                    unknown = set(opts) - {"imax", "ctrl"}
                    if unknown:
                        raise NetlistError(f"unknown option(s) {sorted(unknown)}")
                    net.add(vccs(tok[1], *tok[2:6], parse_quantity(tok[6]),
                                 i_max=parse_quantity(opts["imax"]) if "imax" in opts else None,
                                 control=opts.get("ctrl")))
                elif head.upper() in ("V", "I"):
                    if len(tok) not in (5, 6):
                        raise NetlistError(f"{head} needs name, 2 nodes, port [gain]")
                    gain = parse_quantity(tok[5]) if len(tok) == 6 else 1.0
                    maker = vsource if head.upper() == "V" else isource
                    net.add(maker(tok[1], tok[2], tok[3], tok[4], gain))
                else:
                    raise NetlistError(f"unknown element kind {head!r}")
            except NetlistError as exc:
                if exc.line is None:
                    raise NetlistError(str(exc), lineno, col) from None
                raise
            except ValueError as exc:
                raise NetlistError(str(exc), lineno, col) from None
        net.validate()
        return net

    def to_text(self) -> str:
        out = []
        for e in self.elements:
            if e.kind in ("R", "C"):
                out.append(f"{e.kind} {e.name} {e.nodes[0]} {e.nodes[1]} {e.value!r}")
            elif e.kind == "SW":
                out.append(f"SW {e.name} {e.nodes[0]} {e.nodes[1]} {e.value!r} {e.control}")
            elif e.kind == "G":
                opts = []
                if e.i_max is not None:
                    opts.append(f"imax={e.i_max!r}")
                if e.control:
                    opts.append(f"ctrl={e.control}")
                out.append(" ".join(["G", e.name, *e.nodes, repr(e.value), *opts]))
            else:
                out.append(f"{e.kind} {e.name} {e.nodes[0]} {e.nodes[1]} {e.port} {e.value!r}")
        for name, (a, b) in self.probes.items():
            out.append(f".probe {name} {a} {b}")
        if self.gmin:
            out.append(f".gmin {self.gmin!r}")
        return "\n".join(out) + "\n"


def _need(tok, n):
    if len(tok) != n:
        raise NetlistError(f"{tok[0]} expects {n - 1} fields, got {len(tok) - 1}")


def _kv(t):
    if "=" not in t:
        raise NetlistError(f"expected key=value, got {t!r}")
    k, v = t.split("=", 1)
    return k, v
