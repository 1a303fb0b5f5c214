"""MNA stamping and piecewise-LTI extraction over one switching period.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source::

    G w + Cmat w' = B u

With capacitor incidence ``K`` (one row per capacitor), the state is the
vector of capacitor voltages ``x = K w``.  Writing ``w = R x + N z`` with
``K R = I`` and ``K N = 0`` splits the equations into
``diag(c) x' = R^T (B u - G w)`` and an algebraic part solved for ``z``
(Schur complement ``N^T G N``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

from ..clocks import ClockScheme, PwmBank, PwmWaveform
from ..errors import NetlistError, PeriodMismatchError, SingularTopologyError, StiffnessWarning
from .netlist import GROUND, Netlist

__all__ = ["Tone", "Stamp", "Segment", "PiecewiseLtiSystem", "stamp", "extract_segments",
           "propagate_segment", "resolve_controls"]

STIFFNESS_THRESHOLD = 1e4
RK4_MAX_NORM_STEP = 0.25


@dataclass(frozen=True)
class Tone:
    """Real input ``amplitude * cos(2 pi freq t + phase)`` on ``port``."""

    port: str
    freq: float
    amplitude: float = 1.0
    phase: float = 0.0

    @property
    def phasor(self) -> complex:
        return self.amplitude * np.exp(1j * self.phase)


@dataclass
class Stamp:
    G: np.ndarray
    Cmat: np.ndarray
    B: np.ndarray  # sources then nonlinear-correction ports
    ctrl: np.ndarray  # control-voltage functionals of saturating vccs, over unknowns


class _Layout:
    """Index bookkeeping shared by every switch configuration of a netlist."""

    def __init__(self, netlist: Netlist):
        self.nodes = netlist.nodes
        self.node_index = {n: i for i, n in enumerate(self.nodes)}
        self.vsources = [e for e in netlist.elements if e.kind == "V"]
        self.unknowns = self.nodes + [f"i({e.name})" for e in self.vsources]
        self.n_w = len(self.unknowns)
        self.ports = netlist.ports
        self.port_index = {p: i for i, p in enumerate(self.ports)}
        self.nl = [e for e in netlist.elements if e.saturating]
        self.caps = [e for e in netlist.elements if e.kind == "C"]
        K = np.zeros((len(self.caps), self.n_w))
        for r, e in enumerate(self.caps):
            a, b = e.nodes
            if a != GROUND:
                K[r, self.node_index[a]] += 1
            if b != GROUND:
                K[r, self.node_index[b]] -= 1
        if len(self.caps) and np.linalg.matrix_rank(K) < len(self.caps):
            raise NetlistError("capacitor loop: capacitor voltages are not independent")
        self.K = K
        self.cvals = np.array([e.value for e in self.caps])
        if len(self.caps):
            self.R = K.T @ np.linalg.inv(K @ K.T)
        else:
            self.R = np.zeros((self.n_w, 0))
        self.N = la.null_space(K) if len(self.caps) else np.eye(self.n_w)

    def idx(self, node):
        return None if node == GROUND else self.node_index[node]


def _add(M, i, j, v):
    if i is not None and j is not None:
        M[i, j] += v


def _stamp(layout: _Layout, netlist: Netlist, states: dict) -> Stamp:
    n_w = layout.n_w
    n_ports = len(layout.ports)
    G = np.zeros((n_w, n_w))
    Cm = np.zeros((n_w, n_w))
    B = np.zeros((n_w, n_ports + len(layout.nl)))
    ctrl = np.zeros((len(layout.nl), n_w))
    for i in range(len(layout.nodes)):
        G[i, i] += netlist.gmin
    nl_pos = {e.name: k for k, e in enumerate(layout.nl)}
    v_row = len(layout.nodes)
    for e in netlist.elements:
        if e.kind in ("R", "SW", "C"):
            if e.kind == "SW" and not states[e.name]:
                continue
            a, b = (layout.idx(n) for n in e.nodes)
            g = 1.0 / e.value if e.kind != "C" else e.value
            M = Cm if e.kind == "C" else G
            _add(M, a, a, g)
            _add(M, b, b, g)
            _add(M, a, b, -g)
            _add(M, b, a, -g)
        elif e.kind == "G":
            p, n, cp, cn = (layout.idx(x) for x in e.nodes)
            if e.saturating:
                k = nl_pos[e.name]
                if cp is not None:
                    ctrl[k, cp] += 1
                if cn is not None:
                    ctrl[k, cn] -= 1
            if e.control is not None and not states[e.name]:
                continue
            gm = e.value
            _add(G, p, cp, -gm)
            _add(G, p, cn, gm)
            _add(G, n, cp, gm)
            _add(G, n, cn, -gm)
            if e.saturating:
                col = n_ports + nl_pos[e.name]
                if p is not None:
                    B[p, col] += 1
                if n is not None:
                    B[n, col] -= 1
        elif e.kind == "I":
            p, n = (layout.idx(x) for x in e.nodes)
            col = layout.port_index[e.port]
            if p is not None:
                B[p, col] += e.value
            if n is not None:
                B[n, col] -= e.value
        elif e.kind == "V":
            p, n = (layout.idx(x) for x in e.nodes)
            r = v_row
            v_row += 1
            if p is not None:
                G[p, r] += 1
                G[r, p] += 1
            if n is not None:
                G[n, r] -= 1
                G[r, n] -= 1
            B[r, layout.port_index[e.port]] += e.value
    return Stamp(G, Cm, B, ctrl)


def _check_reference(layout: _Layout, st: Stamp):
    S = layout.N.T @ st.G @ layout.N
    if S.size == 0:
        return S
    s = np.linalg.svd(S, compute_uv=False)
    if s[-1] <= 1e-13 * max(s[0], 1e-300):
        _, _, vh = np.linalg.svd(S)
        w = layout.N @ vh[-1].conj()
        weights = np.abs(w[: len(layout.nodes)])
        bad = [layout.nodes[i] for i in np.flatnonzero(weights > 0.1 * weights.max())]
        raise SingularTopologyError(f"no DC reference for node(s) {', '.join(bad)}", bad)
    return S


def stamp(netlist: Netlist, switch_states: dict) -> Stamp:
    """MNA matrices for one switch configuration.

    ``switch_states`` maps every switch and gated transconductor name to a
    bool.  Raises :class:`SingularTopologyError` when some node combination
    has no reference in this state.
    """
    layout = _Layout(netlist)
    missing = [e.name for e in netlist.switches if e.name not in switch_states]
    if missing:
        raise NetlistError(f"switch state missing for {missing}")
    st = _stamp(layout, netlist, switch_states)
    _check_reference(layout, st)
    return st


@dataclass
class Segment:
    """One constant-topology interval ``[start, end)`` of the period."""

    start: float
    end: float
    A: np.ndarray
    B: np.ndarray  # columns: ports then nonlinear-correction currents
    C: np.ndarray  # all unknowns from state
    D: np.ndarray  # all unknowns from inputs
    states: dict = field(repr=False)
    _expA: np.ndarray | None = field(default=None, repr=False)

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def expA(self) -> np.ndarray:
        if self._expA is None:
            self._expA = la.expm(self.A * self.duration)
        return self._expA


@dataclass
class PiecewiseLtiSystem:
    period: float
    segments: list
    unknowns: list
    nodes: list
    ports: list
    state_names: list
    nl_elements: list
    nl_ctrl: np.ndarray  # (n_nl, n_w)
    probes: dict  # name -> row vector over unknowns
    event_times: list
    netlist: Netlist = field(repr=False)

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def n_ports(self) -> int:
        return len(self.ports)

    @property
    def saturating(self) -> bool:
        return bool(self.nl_elements)

    def port_vector(self, port: str) -> np.ndarray:
        u = np.zeros(self.n_ports + len(self.nl_elements))
        try:
            u[self.ports.index(port)] = 1.0
        except ValueError:
            raise KeyError(f"unknown port {port!r}; have {self.ports}") from None
        return u

    def probe_row(self, probe) -> np.ndarray:
        """Row vector over unknowns for a probe name, node name or (p, n) pair."""
        if isinstance(probe, np.ndarray):
            return probe
        if isinstance(probe, tuple):
            p, n = probe
        elif probe in self.probes:
            return self.probes[probe]
        else:
            p, n = probe, GROUND
        row = np.zeros(len(self.unknowns))
        for node, s in ((p, 1.0), (n, -1.0)):
            if node != GROUND:
                try:
                    row[self.nodes.index(node)] += s
                except ValueError:
                    raise KeyError(f"unknown node {node!r}") from None
        return row

    def probe_matrix(self, probes: Sequence) -> np.ndarray:
        return np.array([self.probe_row(p) for p in probes]).reshape(len(probes), len(self.unknowns))

    def segment_at(self, t: float) -> int:
        tm = t % self.period
        for i, s in enumerate(self.segments):
            if s.start <= tm < s.end:
                return i
        return len(self.segments) - 1


Control = Callable[[float], bool]


def resolve_controls(clocks: ClockScheme | None = None, pwm_banks: PwmBank | Sequence | None = None,
                     extra: dict | None = None, period: float | None = None):
    """Map control names to (gate function, edge list, period)."""
    out = {}
    if clocks is not None:
        for k in range(clocks.n_phases):
            out[f"P{k + 1}"] = (lambda t, k=k: bool(clocks.is_high(k, t)), clocks.edges()[2 * k:2 * k + 2],
                                clocks.period)
    banks = [] if pwm_banks is None else ([pwm_banks] if isinstance(pwm_banks, PwmBank) else list(pwm_banks))
    for i, bank in enumerate(banks):
        suffix = "" if i == 0 else f"_{i}"
        for k in range(bank.n):
            for tag, seq in (("p", bank.positive_sequences[k]), ("n", bank.negative_sequences[k])):
                out[f"PWM{tag}{k + 1}{suffix}"] = (lambda t, s=seq: bool(s.gate(t)), seq.edges(), seq.period)
    for name, w in (extra or {}).items():
        if isinstance(w, PwmWaveform):
            out[name] = (lambda t, s=w: bool(s.gate(t)), w.edges(), w.period)
        else:
            out[name] = w
    ref = period
    if ref is None:
        if clocks is not None:
            ref = clocks.period
        elif out:
            ref = next(iter(out.values()))[2]
    out["ON"] = (lambda t: True, [], ref)
    return out, ref


def _merge_times(times, period, tol=1e-9):
    ts = sorted(t % period for t in times)
    out = []
    for t in ts:
        if period - t < tol * period:
            t = 0.0
        if not out or t - out[-1] > tol * period:
            out.append(t)
    if not out or out[0] > tol * period:
        out.insert(0, 0.0)
    out[0] = 0.0
    return out


def extract_segments(netlist: Netlist, clocks: ClockScheme | None = None,
                     pwm_banks: PwmBank | Sequence | None = None, controls: dict | None = None,
                     period: float | None = None) -> PiecewiseLtiSystem:
    """Lift a switched netlist to a list of LTI state-space segments.

    Segment boundaries are the sorted union of the edges of every control
    the netlist references.
    """
    netlist.validate()
    table, T = resolve_controls(clocks, pwm_banks, controls, period)
    if T is None:
        raise PeriodMismatchError("cannot determine the switching period")
    used = netlist.controls
    unknown = used - set(table)
    if unknown:
        raise NetlistError(f"unresolved control(s): {sorted(unknown)}")
    edges = []
    for name in used:
        fn, e, p = table[name]
        if p is not None and abs(p - T) > 1e-9 * T:
            raise PeriodMismatchError(f"control {name} has period {p}, expected {T}")
        edges.extend(e)
    times = _merge_times(edges, T)
    bounds = times + [T]

    layout = _Layout(netlist)
    n = len(layout.caps)
    Dinv = np.diag(1.0 / layout.cvals) if n else np.zeros((0, 0))
    R, N = layout.R, layout.N
    cache = {}
    segments = []
    gated = netlist.switches
    for s0, s1 in zip(bounds[:-1], bounds[1:]):
        mid = 0.5 * (s0 + s1)
        states = {e.name: table[e.control][0](mid) for e in gated}
        key = tuple(states[e.name] for e in gated)
        if key not in cache:
            st = _stamp(layout, netlist, states)
            S = _check_reference(layout, st)
            if S.size:
                Sinv_NtG = np.linalg.solve(S, N.T @ st.G)
                Sinv_NtB = np.linalg.solve(S, N.T @ st.B)
            else:
                Sinv_NtG = np.zeros((0, layout.n_w))
                Sinv_NtB = np.zeros((0, st.B.shape[1]))
            Cw = R - N @ (Sinv_NtG @ R)  # w from x
            Dw = N @ Sinv_NtB  # w from u
            A = -Dinv @ (R.T @ st.G @ Cw)
            Bx = Dinv @ (R.T @ (st.B - st.G @ Dw))
            cache[key] = (A, Bx, Cw, Dw)
        A, Bx, Cw, Dw = cache[key]
        segments.append(Segment(s0, s1, A, Bx, Cw, Dw, states))

    ctrl = np.zeros((len(layout.nl), layout.n_w))
    for k, e in enumerate(layout.nl):
        for node, s in ((e.nodes[2], 1.0), (e.nodes[3], -1.0)):
            if node != GROUND:
                ctrl[k, layout.node_index[node]] += s
    if len(layout.nl):
        for seg in segments:
            if np.any(np.abs(ctrl @ seg.D[:, len(layout.ports):]) > 1e-12):
                raise NetlistError("saturating transconductor control depends algebraically on its own output")

    sysm = PiecewiseLtiSystem(
        period=T, segments=segments, unknowns=layout.unknowns, nodes=layout.nodes, ports=layout.ports,
        state_names=[e.name for e in layout.caps], nl_elements=layout.nl, nl_ctrl=ctrl, probes={},
        event_times=times, netlist=netlist)
    for name, (p, q) in netlist.probes.items():
        sysm.probes[name] = sysm.probe_row((p, q))
    return sysm


# --------------------------------------------------------------------------
# single-segment propagation
# --------------------------------------------------------------------------


def _input_at(system: PiecewiseLtiSystem, tones: Sequence[Tone], t) -> np.ndarray:
    u = np.zeros(system.n_ports + len(system.nl_elements))
    for tone in tones:
        u[_port_col(system, tone.port)] += tone.amplitude * np.cos(2 * np.pi * tone.freq * t + tone.phase)
    return u


def nl_correction(system: PiecewiseLtiSystem, v_ctrl: np.ndarray) -> np.ndarray:
    """``i_max tanh(gm v / i_max) - gm v`` per saturating element (rows)."""
    gm = np.array([e.value for e in system.nl_elements])
    imax = np.array([e.i_max for e in system.nl_elements])
    shape = (-1,) + (1,) * (v_ctrl.ndim - 1)
    gm, imax = gm.reshape(shape), imax.reshape(shape)
    return imax * np.tanh(gm * v_ctrl / imax) - gm * v_ctrl


def _rk4_rhs(system, seg, Cc, tones, t, x):
    u = _input_at(system, tones, t)
    n_src = system.n_ports
    if x.ndim == 2:
        ub = u[:, None] * np.ones((1, x.shape[1]))
    else:
        ub = u.copy()
    if system.nl_elements:
        v = Cc @ x + (system.nl_ctrl @ seg.D[:, :n_src]) @ ub[:n_src]
        ub[n_src:] = nl_correction(system, v)
    return seg.A @ x + seg.B @ ub


def propagate_segment(state, segment: Segment, tones: Sequence[Tone], t0: float, t1: float,
                      system: PiecewiseLtiSystem | None = None, max_step_fraction: float = 1 / 32):
    """Advance ``state`` from ``t0`` to ``t1`` inside ``segment``.

    Linear elements: exact homogeneous part via ``expm(A (t1 - t0))`` plus the
    phasor particular solution ``(j w I - A)^-1 B U``.  With saturating
    transconductors (``system`` required) a fixed-step RK4 with step at most
    ``segment.duration * max_step_fraction`` (and ``||A|| dt`` at most
    ``RK4_MAX_NORM_STEP``) is used instead.

    Returns ``(state, method)`` with method ``"exact"`` or ``"rk4"``.
    """
    x0 = np.asarray(state, dtype=float)
    h = t1 - t0
    if h == 0:
        return x0.copy(), "exact"
    if system is not None and system.saturating:
        n_steps = max(1, int(np.ceil(h / (segment.duration * max_step_fraction) - 1e-9)))
        if segment.A.size:  # keep ||A|| dt inside the RK4 accuracy region
            n_steps = max(n_steps, int(np.ceil(np.linalg.norm(segment.A, 1) * abs(h) / RK4_MAX_NORM_STEP)))
        dt = h / n_steps
        Cc = system.nl_ctrl @ segment.C
        x = x0.copy()
        t = t0
        for _ in range(n_steps):
            k1 = _rk4_rhs(system, segment, Cc, tones, t, x)
            k2 = _rk4_rhs(system, segment, Cc, tones, t + dt / 2, x + dt / 2 * k1)
            k3 = _rk4_rhs(system, segment, Cc, tones, t + dt / 2, x + dt / 2 * k2)
            k4 = _rk4_rhs(system, segment, Cc, tones, t + dt, x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        return x, "rk4"
    A = segment.A
    if A.size and np.linalg.norm(A, 1) * abs(h) > STIFFNESS_THRESHOLD:
        warnings.warn(f"||A|| dt = {np.linalg.norm(A, 1) * abs(h):.3g}; relying on scaling and squaring",
                      StiffnessWarning, stacklevel=2)
    Phi = segment.expA if abs(h - segment.duration) < 1e-15 * segment.duration else la.expm(A * h)
    n = A.shape[0]
    xp0 = np.zeros(n, dtype=complex)
    xp1 = np.zeros(n, dtype=complex)
    for tone in tones:
        w = 2 * np.pi * tone.freq
        col = segment.B[:, _port_col(system, tone.port)]
        X = np.linalg.solve(1j * w * np.eye(n) - A, col * tone.phasor)
        xp0 += X * np.exp(1j * w * t0)
        xp1 += X * np.exp(1j * w * t1)
    xp0, xp1 = xp0.real, xp1.real
    return Phi @ (x0 - xp0) + xp1, "exact"


def _port_col(system, port) -> int:
    if isinstance(port, (int, np.integer)):
        return int(port)
    if system is None:
        raise ValueError("a system is needed to resolve port names; pass an integer column")
    return system.ports.index(port)
