"""Circuits of optical elements, the Toffoli network, and its calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import elements as el
from .elements import ElementOp
from .hilbert import (
    TOFFOLI_ENCODING,
    LogicalEncoding,
    ModeLabel,
    Space,
    StateVector,
    basis_strings,
    encode_logical,
)

UP, DOWN, DARK = 0, 1, 8
QUARTER_PI = math.pi / 4


class CircuitError(ValueError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, report: "CalibrationReport"):
        super().__init__(
            f"calibration reached process fidelity {report.process_fidelity:.6f} < {report.threshold}"
        )
        self.report = report


@dataclass(frozen=True)
class Circuit:
    """Ordered element list over a declared set of paths.

    ``slots`` holds the current compensator phases; ``stages`` names the two
    arm slots of each interferometer (used by the noise model).
    """

    elements: tuple[ElementOp, ...] = ()
    paths: tuple[int, ...] = (UP, DOWN)
    slots: tuple[tuple[str, float], ...] = ()
    stages: tuple[tuple[str, tuple[str, str]], ...] = ()
    l_max: int = 4

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "paths", tuple(sorted(set(self.paths))))
        if isinstance(self.slots, Mapping):
            object.__setattr__(self, "slots", tuple(self.slots.items()))
        if isinstance(self.stages, Mapping):
            object.__setattr__(self, "stages", tuple((k, tuple(v)) for k, v in self.stages.items()))

    @property
    def space(self) -> Space:
        return Space(self.paths, self.l_max)

    @property
    def slot_values(self) -> dict[str, float]:
        return dict(self.slots)

    @property
    def stage_arms(self) -> dict[str, tuple[str, str]]:
        return dict(self.stages)

    def with_slots(self, values: Mapping[str, float]) -> "Circuit":
        current = self.slot_values
        unknown = set(values) - set(current)
        if unknown:
            raise CircuitError(f"unknown slots {sorted(unknown)}")
        current.update({k: float(v) for k, v in values.items()})
        return replace(self, slots=tuple(current.items()))

    def validate(self) -> None:
        names = set(self.slot_values)
        for e in self.elements:
            if not e.placement <= set(self.paths):
                raise CircuitError(f"{e.name} references paths {sorted(e.placement - set(self.paths))} not declared")
            if e.slot is not None and e.slot not in names:
                raise CircuitError(f"{e.name} references unknown slot {e.slot!r}")
        for stage, arms in self.stages:
            if not set(arms) <= names:
                raise CircuitError(f"stage {stage!r} references unknown slots {arms}")

    def bound_elements(self, values: Mapping[str, float] | None = None) -> list[ElementOp]:
        vals = self.slot_values
        if values:
            vals.update(values)
        return [e.bind(vals[e.slot]) if e.slot is not None else e for e in self.elements]

    def apply(self, state: StateVector) -> StateVector:
        self.validate()
        state = state.rehome(self.space)
        for e in self.bound_elements():
            state = el.apply(e, state)
        return state

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(
            self.elements + other.elements,
            tuple(set(self.paths) | set(other.paths)),
            tuple({**self.slot_values, **other.slot_values}.items()),
            tuple({**self.stage_arms, **other.stage_arms}.items()),
            max(self.l_max, other.l_max),
        )


def compose(circuit: Circuit, values: Mapping[str, float] | None = None) -> np.ndarray:
    """Dense unitary of the whole circuit over ``circuit.space``."""
    circuit.validate()
    space = circuit.space
    u = np.eye(space.dim, dtype=complex)
    for e in circuit.bound_elements(values):
        u = e.matrix(space) @ u
    return u


# ---------------------------------------------------------------------------
# ideal gates


def ideal_toffoli(n: int = 3) -> np.ndarray:
    """Permutation |x, z> -> |x, z xor AND(x)> with qubit 1 most significant."""
    if n < 3:
        raise ValueError(f"Toffoli needs n >= 3, got {n}")
    d = 2**n
    u = np.zeros((d, d), dtype=complex)
    for j in range(d):
        i = j ^ 1 if (j >> 1) == (d >> 1) - 1 else j
        u[i, j] = 1
    return u


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def process_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """|Tr(U^dag V)|^2 / d^2; insensitive to a global phase."""
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) ** 2 / d**2)


def align_global_phase(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` by the phase of the largest entry of U^dag V (lowest row wins ties)."""
    m = u.conj().T @ v
    k = int(np.argmax(np.abs(m)))
    z = m.flat[k]
    if abs(z) == 0:
        return v
    return v * (abs(z) / z)


def encoded_inputs(enc: LogicalEncoding, space: Space) -> np.ndarray:
    """Columns are the physical images of the logical basis, in logical order."""
    x = np.zeros((space.dim, enc.dim), dtype=complex)
    for j, s in enumerate(enc.strings):
        x[space.index[enc.mode(s)], j] = 1
    return x


def encoded_block(circuit: Circuit, enc: LogicalEncoding = TOFFOLI_ENCODING) -> np.ndarray:
    """Restriction of the circuit to the encoded subspace: <enc_i| U |enc_j>."""
    x = encoded_inputs(enc, circuit.space)
    return x.conj().T @ compose(circuit) @ x


def sub_action(gate: np.ndarray, control: int) -> np.ndarray:
    """4x4 action on qubits 2-3 with qubit 1 fixed to ``control``."""
    sl = slice(4 * control, 4 * control + 4)
    return gate[sl, sl]


# ---------------------------------------------------------------------------
# block level: the staged transformations on the up path

_STAGE_CONTRACTS = {
    # (pol, l) -> (pol, l, amplitude) on the encoded up-path modes
    "a": {("H", -2): ("H", -2, 1), ("H", 0): ("H", 0, -1), ("H", -1): ("V", -1, 1j), ("H", 1): ("V", 1, 1j)},
    "b": {("H", -2): ("H", -2, 1), ("H", 0): ("H", 0, 1), ("V", -1): ("V", 1, -1), ("V", 1): ("V", -1, -1)},
    "c": {("H", -2): ("H", -2, 1), ("H", 0): ("H", 0, -1), ("V", 1): ("H", 1, 1j), ("V", -1): ("H", -1, 1j)},
}


def stage_block(which: str) -> dict[ModeLabel, tuple[ModeLabel, complex]]:
    """Mandated action of stage a, b or c on its encoded up-path inputs."""
    try:
        contract = _STAGE_CONTRACTS[which]
    except KeyError:
        raise ValueError(f"unknown stage {which!r}") from None
    return {ModeLabel(p, UP, l): (ModeLabel(q, UP, m), complex(a)) for (p, l), (q, m, a) in contract.items()}


def stage_element(which: str, l_max: int = 4) -> ElementOp:
    """Stage contract extended to a permutation of every up-path mode.

    Modes outside the contract are paired in sorted order with the modes the
    contract leaves free, with unit amplitude.
    """
    contract = _STAGE_CONTRACTS[which]
    all_modes = [(p, l) for p in "HV" for l in range(-l_max, l_max + 1)]
    used = {(q, m) for q, m, _ in contract.values()}
    free_in = [k for k in all_modes if k not in contract]
    free_out = [k for k in all_modes if k not in used]
    table = dict(contract)
    table.update({src: (dst[0], dst[1], 1) for src, dst in zip(free_in, free_out)})
    return el.block(f"stage_{which}", table, UP)


def build_toffoli_blocks(l_max: int = 4) -> Circuit:
    """Toffoli at the level of the three stage contracts.

    H photons (qubit 1 = 1) take the up path through stages a-c; V photons
    take the eight-mirror down path. The fixed pi compensator cancels the two
    PBS reflection phases.
    """
    elems = [el.pbs((UP, DOWN), (UP, DOWN))]
    elems += [stage_element(w, l_max) for w in "abc"]
    elems += [el.mirror(DOWN)] * 8
    elems += [el.phase_shifter(math.pi, DOWN), el.pbs((UP, DOWN), (UP, DOWN))]
    return Circuit(tuple(elems), (UP, DOWN), l_max=l_max)


# ---------------------------------------------------------------------------
# element level


def sagnac_sorter(cw: int, ccw: int, prefix: str, port: int = UP, dark: int = DARK) -> Circuit:
    """Polarization Sagnac with a Dove prism at pi/4: H even l stays H, H odd l turns V.

    The loop is modeled as two arms. The clockwise beam meets the Dove prism
    then the loop mirror; the counter-clockwise beam meets them in reverse
    order and sees the prism at the mirrored angle.
    """
    s_cw, s_ccw = f"{prefix}_cw", f"{prefix}_ccw"
    elems = (
        el.hwp(math.pi / 8, port),
        el.pbs((port, dark), (cw, ccw)),
        el.dove(QUARTER_PI, cw),
        el.mirror(cw),
        el.phase_shifter(0.0, cw, slot=s_cw),
        el.mirror(ccw),
        el.dove(-QUARTER_PI, ccw),
        el.phase_shifter(0.0, ccw, slot=s_ccw),
        el.pbs((cw, ccw), (port, dark)),
        el.hwp(3 * math.pi / 8, port),
    )
    return Circuit(elems, (port, dark, cw, ccw), ((s_cw, 0.0), (s_ccw, 0.0)), ((prefix, (s_cw, s_ccw)),))


def mach_zehnder_flip(even: int, odd: int, prefix: str = "mz", port: int = UP, dark: int = DARK) -> Circuit:
    """Polarizing Mach-Zehnder: the V (odd-l) arm has one extra reflection, so l -> -l."""
    s_e, s_o = f"{prefix}_even", f"{prefix}_odd"
    elems = (
        el.pbs((port, dark), (even, odd)),
        el.mirror(even),
        el.mirror(even),
        el.hwp(math.pi / 2, even),
        el.phase_shifter(0.0, even, slot=s_e),
        el.mirror(odd),
        el.qwp(0.0, odd),
        el.phase_shifter(0.0, odd, slot=s_o),
        el.pbs((even, odd), (port, dark)),
    )
    return Circuit(elems, (port, dark, even, odd), ((s_e, 0.0), (s_o, 0.0)), ((prefix, (s_e, s_o)),))


STAGE_PREFIX = {"a": "sag_a", "b": "mz", "c": "sag_c"}


def build_toffoli_elements(l_max: int = 4) -> Circuit:
    """Element-level Toffoli; compensators start at 0 and need :func:`calibrate`."""
    head = Circuit(
        (el.pbs((UP, DOWN), (UP, DOWN)), el.phase_shifter(0.0, UP, slot="up")),
        (UP, DOWN),
        (("up", 0.0),),
    )
    down = Circuit(
        tuple([el.mirror(DOWN)] * 8) + (el.phase_shifter(0.0, DOWN, slot="down"),),
        (DOWN,),
        (("down", 0.0),),
        (("outer", ("up", "down")),),
    )
    tail = Circuit((el.pbs((UP, DOWN), (UP, DOWN)),), (UP, DOWN))
    circuit = (
        head
        + sagnac_sorter(2, 3, "sag_a")
        + mach_zehnder_flip(4, 5, "mz")
        + sagnac_sorter(6, 7, "sag_c")
        + down
        + tail
    )
    circuit = replace(circuit, l_max=l_max)
    circuit.validate()
    return circuit


def perturb(circuit: Circuit, offsets: Mapping[str, float]) -> Circuit:
    """Insert fixed phase drifts next to the named compensators."""
    out = []
    for e in circuit.elements:
        out.append(e)
        if e.slot is not None and e.slot in offsets:
            out.append(el.phase_shifter(float(offsets[e.slot]), e.paths))
    return replace(circuit, elements=tuple(out))


def random_offsets(circuit: Circuit, seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    return {name: float(rng.uniform(-math.pi, math.pi)) for name, _ in circuit.slots}


# ---------------------------------------------------------------------------
# calibration


class Propagator:
    """Fast evaluation of the encoded block as a function of slot phases."""

    def __init__(self, circuit: Circuit, enc: LogicalEncoding = TOFFOLI_ENCODING, x: np.ndarray | None = None):
        circuit.validate()
        space = circuit.space
        self.x = encoded_inputs(enc, space) if x is None else x
        self.ops: list = []
        pending = None
        for e in circuit.elements:
            if e.slot is None:
                m = e.matrix(space)
                pending = m if pending is None else m @ pending
                continue
            if pending is not None:
                self.ops.append(pending)
                pending = None
            mask = np.array([mode.path in e.paths for mode in space.modes])
            self.ops.append((e.slot, mask))
        if pending is not None:
            self.ops.append(pending)

    def propagate(self, values: Mapping[str, float]) -> np.ndarray:
        y = self.x
        for op in self.ops:
            if isinstance(op, tuple):
                name, mask = op
                y = y.copy()
                y[mask] *= np.exp(1j * values[name])
            else:
                y = op @ y
        return y

    def block(self, values: Mapping[str, float]) -> np.ndarray:
        return self.x.conj().T @ self.propagate(values)


@dataclass
class CalibrationReport:
    phases: dict[str, float]
    process_fidelity: float
    sweeps: int
    threshold: float = 0.99

    def to_json(self) -> dict:
        return {"phases": dict(self.phases), "process_fidelity": self.process_fidelity, "sweeps": self.sweeps}


def _golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def calibrate(
    circuit: Circuit,
    target: np.ndarray | None = None,
    encoding: LogicalEncoding = TOFFOLI_ENCODING,
    sweeps: int = 3,
    max_sweeps: int = 60,
    grid: int = 16,
    threshold: float = 0.99,
) -> CalibrationReport:
    """Coordinate search over compensator phases maximizing process fidelity.

    Each sweep visits the slots in declaration order. Per coordinate: a coarse
    grid over one period, then golden-section refinement around the best grid
    point. A compensator enters the encoded block affinely in exp(i phi), so
    the trace overlap is A + B exp(i phi) and two propagations give the whole
    1-D objective exactly. Starts from all phases at 0; runs at least
    ``sweeps`` sweeps and stops once a sweep gains less than 1e-15.
    Raises :class:`CalibrationError` below ``threshold``.
    """
    if target is None:
        target = ideal_toffoli(encoding.n_qubits)
    prop = Propagator(circuit, encoding)
    names = [name for name, _ in circuit.slots]
    values = {name: 0.0 for name in names}
    d2 = target.shape[0] ** 2
    uses = {n: sum(e.slot == n for e in circuit.elements) for n in names}

    def overlap(vals):
        return np.trace(target.conj().T @ prop.block(vals))

    best = abs(overlap(values)) ** 2 / d2
    done = 0
    step = 2 * math.pi / grid
    pts = [-math.pi + k * step for k in range(grid)]
    while names and done < max_sweeps:
        done += 1
        before = best
        for name in names:
            if uses[name] == 1:
                t0, tpi = overlap({**values, name: 0.0}), overlap({**values, name: math.pi})
                a, b = (t0 + tpi) / 2, (t0 - tpi) / 2

                def f(phi):
                    return abs(a + b * complex(math.cos(phi), math.sin(phi))) ** 2 / d2

            else:

                def f(phi):
                    return abs(overlap({**values, name: phi})) ** 2 / d2

            scores = [f(p) for p in pts]
            k = int(np.argmax(scores))
            phi, score = _golden_max(f, pts[k] - step, pts[k] + step)
            if score >= best:
                values[name] = float(math.remainder(phi, 2 * math.pi))
                best = abs(overlap(values)) ** 2 / d2
        if done >= sweeps and best - before < 1e-15:
            break
    report = CalibrationReport(values, min(best, 1.0), done, threshold)
    if best < threshold:
        raise CalibrationError(report)
    return report


@lru_cache(maxsize=8)
def calibrated_toffoli(l_max: int = 4) -> tuple[Circuit, CalibrationReport]:
    circuit = build_toffoli_elements(l_max)
    report = calibrate(circuit)
    return circuit.with_slots(report.phases), report


# ---------------------------------------------------------------------------
# netlist text format


def _fmt(x: float) -> str:
    return repr(float(x))


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(","))


def to_netlist(circuit: Circuit) -> str:
    lines = [f"PATHS {','.join(map(str, circuit.paths))}", f"LMAX {circuit.l_max}"]
    for name, value in circuit.slots:
        lines.append(f"SLOT {name}={_fmt(value)}")
    for stage, arms in circuit.stages:
        lines.append(f"STAGE {stage}={','.join(arms)}")
    for e in circuit.elements:
        paths = ",".join(map(str, e.paths))
        if e.name == "HWP" or e.name == "QWP":
            lines.append(f"{e.name} theta={_fmt(e.param('theta'))} paths={paths}")
        elif e.name == "DOVE":
            lines.append(f"DOVE alpha={_fmt(e.param('alpha'))} paths={paths}")
        elif e.name == "MIRROR":
            lines.append(f"MIRROR paths={paths}")
        elif e.name == "PBS":
            i, o = e.param("in"), e.param("out")
            lines.append(f"PBS in={i[0]},{i[1]} out={o[0]},{o[1]}")
        elif e.name == "PHASE":
            slot = f" slot={e.slot}" if e.slot else ""
            lines.append(f"PHASE phi={_fmt(e.param('phi'))} paths={paths}{slot}")
        elif e.name == "BLOCK":
            stage = e.param("name").removeprefix("stage_")
            lines.append(f"STAGEBLOCK which={stage} paths={paths}")
        else:  # pragma: no cover
            raise CircuitError(f"no netlist form for {e.name}")
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> Circuit:
    """Parse the one-element-per-line format; ``#`` starts a comment."""
    elems: list[ElementOp] = []
    paths: set[int] = set()
    declared: tuple[int, ...] | None = None
    slots: dict[str, float] = {}
    stages: dict[str, tuple[str, str]] = {}
    l_max = 4
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "PATHS":
                declared = _ints(rest[0])
                continue
            if head == "LMAX":
                l_max = int(rest[0])
                continue
            kv = dict(tok.split("=", 1) for tok in rest)
            if head == "SLOT":
                slots.update({k: float(v) for k, v in kv.items()})
                continue
            if head == "STAGE":
                stages.update({k: tuple(v.split(",")) for k, v in kv.items()})
                continue
            if head == "HWP":
                e = el.hwp(float(kv["theta"]), _ints(kv["paths"]))
            elif head == "QWP":
                e = el.qwp(float(kv["theta"]), _ints(kv["paths"]))
            elif head == "DOVE":
                e = el.dove(float(kv["alpha"]), _ints(kv["paths"]))
            elif head == "MIRROR":
                e = el.mirror(_ints(kv["paths"]))
            elif head == "PBS":
                e = el.pbs(_ints(kv["in"]), _ints(kv["out"]))
            elif head == "PHASE":
                slot = kv.get("slot")
                e = el.phase_shifter(float(kv.get("phi", 0.0)), _ints(kv["paths"]), slot=slot)
                if slot is not None:
                    slots.setdefault(slot, 0.0)
            elif head == "STAGEBLOCK":
                e = stage_element(kv["which"], l_max)
                if _ints(kv["paths"]) != e.paths:
                    raise CircuitError("stage blocks act on the up path only")
            else:
                raise CircuitError(f"unknown element {head!r}")
        except (KeyError, IndexError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: {raw.strip()!r}: {exc}") from exc
        paths |= e.placement
        elems.append(e)
    circuit = Circuit(tuple(elems), declared if declared is not None else tuple(paths), tuple(slots.items()), tuple(stages.items()), l_max)
    circuit.validate()
    return circuit


def staged_chain(bits: str, enc: LogicalEncoding = TOFFOLI_ENCODING) -> list[StateVector]:
    """States after the input and after stages a, b, c for an up-path input."""
    state = encode_logical(bits, enc, Space((UP, DOWN)))
    out = [state]
    for w in "abc":
        state = el.apply(stage_element(w), state)
        out.append(state)
    return out


def verify_blocks(tol: float = 1e-9) -> dict:
    """Exact checks of the block-level network; used by the ``verify`` command."""
    circuit = build_toffoli_blocks()
    block = encoded_block(circuit)
    ideal = ideal_toffoli(3)
    aligned = align_global_phase(ideal, block)
    checks = {
        "toffoli_entrywise": float(np.max(np.abs(aligned - ideal))) <= tol,
        "cnot_when_control_1": bool(np.allclose(sub_action(aligned, 1), CNOT, atol=tol, rtol=0)),
        "identity_when_control_0": bool(np.allclose(sub_action(aligned, 0), np.eye(4), atol=tol, rtol=0)),
    }
    chain_ok = True
    for bits in ("100", "101", "110", "111"):
        states = staged_chain(bits)
        for w, before, after in zip("abc", states, states[1:]):
            contract = stage_block(w)
            (mode, amp), = before.amplitudes.items()
            want_mode, want_amp = contract[mode]
            got = after.amplitudes
            chain_ok &= set(got) == {want_mode} and abs(got[want_mode] - amp * want_amp) <= tol
    checks["staged_chain"] = bool(chain_ok)
    return {"checks": checks, "max_entry_error": float(np.max(np.abs(aligned - ideal))), "ok": all(checks.values())}


__all__ = [
    "Circuit",
    "CircuitError",
    "CalibrationError",
    "CalibrationReport",
    "CNOT",
    "align_global_phase",
    "build_toffoli_blocks",
    "build_toffoli_elements",
    "calibrate",
    "calibrated_toffoli",
    "compose",
    "encoded_block",
    "ideal_toffoli",
    "mach_zehnder_flip",
    "parse_netlist",
    "perturb",
    "process_fidelity",
    "random_offsets",
    "sagnac_sorter",
    "stage_block",
    "stage_element",
    "staged_chain",
    "sub_action",
    "to_netlist",
    "verify_blocks",
]
