"""Detection simulation: noisy channel, Poisson coincidence counts, crosstalk tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .elements import Projector, projector
from .hilbert import (
    TOFFOLI_ENCODING,
    DensityMatrix,
    LogicalEncoding,
    ModeLabel,
    Space,
    StateVector,
    encode_logical,
    logical_to_physical,
)
from .network import STAGE_PREFIX, Circuit, Propagator, calibrated_toffoli, ideal_toffoli

DEFAULT_FLUX = 58_500.0
DEFAULT_DURATION = 100.0


@dataclass(frozen=True)
class NoiseModel:
    visibility_a: float = 1.0
    visibility_b: float = 1.0
    visibility_c: float = 1.0
    path_phase_jitter: float = 0.0
    detector_efficiency: float = 1.0
    accidental_rate: float = 0.0
    flux: float = DEFAULT_FLUX
    subtract_accidentals: bool = False

    def __post_init__(self):
        for name in ("visibility_a", "visibility_b", "visibility_c", "detector_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("path_phase_jitter", "accidental_rate", "flux"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def is_coherent(self) -> bool:
        """True when the channel is the bare unitary (detection noise aside)."""
        return (self.visibility_a, self.visibility_b, self.visibility_c) == (1.0, 1.0, 1.0) and self.path_phase_jitter == 0

    def visibility(self, stage: str) -> float:
        return getattr(self, f"visibility_{stage}")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or key not in known:
                raise ValueError(f"line {lineno}: bad entry {raw.strip()!r}")
            if key == "subtract_accidentals":
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"line {lineno}: expected a boolean, got {value!r}")
                values[key] = value.lower() in ("true", "1", "yes")
            else:
                values[key] = float(value)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "NoiseModel":
        """Read a config file; bare names fall back to the shipped configs."""
        p = Path(path)
        if not p.exists():
            shipped = resources.files("photon_toffoli") / "data" / p.name
            if not shipped.is_file():
                raise FileNotFoundError(path)
            return cls.parse(shipped.read_text())
        return cls.parse(p.read_text())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else repr(float(v))}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# noisy channel


@dataclass
class NoisyChannel:
    """Stochastic realization of a circuit under a noise model.

    Per shot: each interferometer loses its coherence with probability
    1 - visibility (the cross terms between its arms are destroyed, realized
    as a uniformly random 0/pi phase on one arm), and every compensator gets a
    Gaussian jitter. The ensemble enumerates the visibility branches exactly
    and samples ``n_jitter`` jitter draws from ``seed``.
    """

    circuit: Circuit | None
    noise: NoiseModel
    seed: int = 0
    n_jitter: int = 32
    unitary: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def space(self) -> Space | None:
        return self.circuit.space if self.circuit is not None else None

    def _stage_arms(self) -> list[tuple[float, str]]:
        arms = self.circuit.stage_arms
        out = []
        for stage, prefix in STAGE_PREFIX.items():
            v = self.noise.visibility(stage)
            if v < 1.0:
                if prefix not in arms:
                    raise ValueError(f"circuit has no interferometer for stage {stage!r}")
                out.append((v, arms[prefix][1]))
        return out

    def realizations(self) -> list[tuple[float, dict[str, float]]]:
        """(weight, slot values) pairs whose weighted mixture is the channel."""
        if "real" in self._cache:
            return self._cache["real"]
        base = self.circuit.slot_values
        branches: list[tuple[float, dict[str, float]]] = [(1.0, {})]
        for v, arm in self._stage_arms():
            nxt = []
            for w, extra in branches:
                nxt.append((w * (1 + v) / 2, extra))
                nxt.append((w * (1 - v) / 2, {**extra, arm: extra.get(arm, 0.0) + math.pi}))
            branches = [b for b in nxt if b[0] > 0]
        sigma = self.noise.path_phase_jitter
        names = list(base)
        if sigma > 0:
            rng = np.random.default_rng([self.seed, 1])
            draws = rng.normal(0.0, sigma, size=(self.n_jitter, len(names)))
        else:
            draws = np.zeros((1, len(names)))
        out = []
        for jit in draws:
            for w, extra in branches:
                vals = {n: base[n] + extra.get(n, 0.0) + jit[k] for k, n in enumerate(names)}
                out.append((w / len(draws), vals))
        self._cache["real"] = out
        return out

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        """Slot values for a single shot."""
        vals = self.circuit.slot_values
        for v, arm in self._stage_arms():
            if rng.random() > v and rng.random() < 0.5:
                vals[arm] += math.pi
        sigma = self.noise.path_phase_jitter
        if sigma > 0:
            for n in vals:
                vals[n] += rng.normal(0.0, sigma)
        return vals

    def ensemble(self, states: Sequence[StateVector]) -> tuple[np.ndarray, np.ndarray]:
        """Weights (R,) and output vectors (R, dim, n_states)."""
        if self.circuit is None:
            x = np.stack([s.to_array() for s in states], axis=1)
            return np.ones(1), (self.unitary @ x)[None]
        space = self.circuit.space
        x = np.stack([s.rehome(space).to_array() for s in states], axis=1)
        prop = Propagator(self.circuit, x=x)
        reals = self.realizations()
        weights = np.array([w for w, _ in reals])
        return weights, np.stack([prop.propagate(vals) for _, vals in reals])

    def output(self, state: StateVector) -> DensityMatrix:
        w, y = self.ensemble([state])
        rho = np.einsum("r,ri,rj->ij", w, y[:, :, 0], y[:, :, 0].conj())
        return DensityMatrix((rho + rho.conj().T) / 2)

    def probabilities(self, states: Sequence[StateVector], projectors: Sequence[Projector]) -> np.ndarray:
        """Detection probability table, shape (n_states, n_projectors)."""
        w, y = self.ensemble(states)
        space = self.space
        out = np.zeros((len(states), len(projectors)))
        for j, proj in enumerate(projectors):
            for t in proj.targets:
                tv = t.rehome(space).to_array() if space is not None else t.to_array()
                amps = np.einsum("d,rdk->rk", tv.conj(), y)
                out[:, j] += w @ (np.abs(amps) ** 2)
        return np.clip(out, 0.0, None)


def degrade(circuit: Circuit | np.ndarray, noise: NoiseModel, seed: int = 0, n_jitter: int = 32) -> NoisyChannel:
    """Noisy channel around a circuit; a bare unitary only admits detection noise."""
    if isinstance(circuit, Circuit):
        return NoisyChannel(circuit, noise, seed, n_jitter)
    if not noise.is_coherent:
        raise ValueError("visibility/jitter noise needs a circuit with interferometer stages")
    return NoisyChannel(None, noise, seed, n_jitter, unitary=np.asarray(circuit, dtype=complex))


# ---------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class CountRecord:
    input_id: str
    projector_id: str
    counts: int
    duration_s: float
    seed: int

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be non-negative")


CSV_FIELDS = ("input_id", "projector_id", "counts", "duration_s", "seed")


def records_to_csv(records: Sequence[CountRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([r.input_id, r.projector_id, r.counts, repr(float(r.duration_s)), r.seed])
    return buf.getvalue()


def records_from_csv(text: str) -> list[CountRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise ValueError(f"expected header {','.join(CSV_FIELDS)}")
    return [
        CountRecord(r["input_id"], r["projector_id"], int(r["counts"]), float(r["duration_s"]), int(r["seed"]))
        for r in reader
    ]


def expected_counts(probability: float, noise: NoiseModel, duration: float) -> float:
    return noise.flux * duration * noise.detector_efficiency * probability + noise.accidental_rate * duration


def cell_rng(seed: int, row: int, col: int) -> np.random.Generator:
    # independent stream per (input, projector) cell, so cells can be drawn in any order
    return np.random.default_rng([seed, 2, row, col])


def draw_counts(probability: float, noise: NoiseModel, duration: float, rng: np.random.Generator) -> int:
    raw = int(rng.poisson(expected_counts(probability, noise, duration)))
    if noise.subtract_accidentals:
        raw = max(raw - round(noise.accidental_rate * duration), 0)
    return raw


def simulate_counts(
    state: StateVector | DensityMatrix | Sequence[float],
    projectors: Mapping[str, Projector] | Sequence[Projector],
    noise: NoiseModel,
    duration: float = DEFAULT_DURATION,
    seed: int = 0,
    input_id: str = "input",
    row: int = 0,
    space: Space | None = None,
) -> list[CountRecord]:
    """Poisson coincidence counts of one (already propagated) state per projector.

    ``state`` may also be the list of detection probabilities directly.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if not isinstance(projectors, Mapping):
        projectors = {str(j): p for j, p in enumerate(projectors)}
    if isinstance(state, (StateVector, DensityMatrix)):
        probs = [p.probability(state, space) for p in projectors.values()]
    else:
        probs = list(state)
        if len(probs) != len(projectors):
            raise ValueError("one probability per projector required")
    return [
        CountRecord(input_id, pid, draw_counts(p, noise, duration, cell_rng(seed, row, j)), float(duration), seed)
        for j, (pid, p) in enumerate(zip(projectors, probs))
    ]


# ---------------------------------------------------------------------------
# crosstalk tables


@dataclass
class CrosstalkMatrix:
    rows: list[str]
    cols: list[str]
    counts: np.ndarray
    records: list[CountRecord] = field(default_factory=list)
    effective_rate: float | None = None
    stddev: float | None = None

    @property
    def rates(self) -> np.ndarray:
        """Row-normalized conversion rates; all-zero rows stay zero."""
        counts = np.asarray(self.counts, dtype=float)
        totals = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)

    @property
    def global_rates(self) -> np.ndarray:
        counts = np.asarray(self.counts, dtype=float)
        total = counts.sum()
        return counts / total if total > 0 else np.zeros_like(counts)

    def to_json(self) -> dict:
        counts = np.asarray(self.counts)
        out = {
            "rows": list(self.rows),
            "cols": list(self.cols),
            "counts": counts.tolist() if counts.dtype.kind in "iu" else counts.astype(float).tolist(),
            "rates": self.rates.tolist(),
            "global_rates": self.global_rates.tolist(),
        }
        if self.effective_rate is not None:
            out["effective_rate"] = self.effective_rate
            out["stddev"] = self.stddev
        return out


def resolve_channel(circuit, noise: NoiseModel, seed: int) -> NoisyChannel:
    if isinstance(circuit, NoisyChannel):
        return circuit
    if circuit is None:
        circuit, _ = calibrated_toffoli()
    return degrade(circuit, noise, seed)


def crosstalk(
    circuit,
    inputs: Mapping[str, StateVector] | Sequence[str],
    outputs: Mapping[str, Projector] | Sequence[str],
    noise: NoiseModel,
    duration: float = DEFAULT_DURATION,
    seed: int = 0,
    encoding: LogicalEncoding = TOFFOLI_ENCODING,
) -> CrosstalkMatrix:
    """Count table N_ij for each input through the (noisy) circuit.

    Logical strings are accepted for inputs and outputs. ``duration=math.inf``
    skips sampling and stores the detection probabilities as counts.
    """
    if not inputs or not outputs:
        raise ValueError("inputs and outputs must be non-empty")
    if not isinstance(inputs, Mapping):
        inputs = {s: encode_logical(s, encoding) for s in inputs}
    if not isinstance(outputs, Mapping):
        outputs = {s: projector(encode_logical(s, encoding)) for s in outputs}
    channel = resolve_channel(circuit, noise, seed)
    probs = channel.probabilities(list(inputs.values()), list(outputs.values()))
    rows, cols = list(inputs), list(outputs)
    if math.isinf(duration):
        return CrosstalkMatrix(rows, cols, probs)
    records = []
    for i, label in enumerate(rows):
        records += simulate_counts(probs[i], outputs, noise, duration, seed, label, row=i)
    counts = np.array([r.counts for r in records], dtype=np.int64).reshape(len(rows), len(cols))
    return CrosstalkMatrix(rows, cols, counts, records)


def truth_table(circuit=None, noise: NoiseModel | None = None, duration: float = DEFAULT_DURATION, seed: int = 0) -> CrosstalkMatrix:
    """All eight basis inputs against all eight basis projectors (100 s each by default)."""
    noise = noise or NoiseModel()
    strings = TOFFOLI_ENCODING.strings
    m = crosstalk(circuit, strings, strings, noise, duration, seed)
    if not math.isinf(duration):
        m.effective_rate, m.stddev = effective_conversion_rate(m, toffoli_permutation(), seed=seed)
    return m


CONTROL_STATES = {
    "1": np.array([0, 1], dtype=complex),
    "0": np.array([1, 0], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
}


def cnot_crosstalk(circuit=None, control: str = "1", noise: NoiseModel | None = None, duration: float = DEFAULT_DURATION, seed: int = 0) -> CrosstalkMatrix:
    """4x4 table on qubits 2-3 with qubit 1 prepared in ``control`` (1, 0 or +).

    The output projectors resolve OAM only; polarization is not analyzed.
    """
    noise = noise or NoiseModel()
    enc = TOFFOLI_ENCODING
    q1 = CONTROL_STATES[control]
    two = ["00", "01", "10", "11"]
    inputs = {}
    for k, b in enumerate(two):
        tail = np.zeros(4, dtype=complex)
        tail[k] = 1
        inputs[b] = logical_to_physical(np.kron(q1, tail), enc)
    outputs = {b: projector(encode_logical("0" + b, enc)) + projector(encode_logical("1" + b, enc)) for b in two}
    m = crosstalk(circuit, inputs, outputs, noise, duration, seed)
    if not math.isinf(duration) and control in ("0", "1"):
        perm = [0, 1, 3, 2] if control == "1" else [0, 1, 2, 3]
        m.effective_rate, m.stddev = effective_conversion_rate(m, perm, seed=seed)
    return m


def toffoli_permutation() -> list[int]:
    u = ideal_toffoli(3)
    return [int(np.argmax(np.abs(u[:, j]))) for j in range(8)]


class UndefinedRateError(ValueError):
    pass


def _rate(counts: np.ndarray, perm: Sequence[int]) -> float:
    totals = counts.sum(axis=1)
    if np.any(totals <= 0):
        bad = [int(i) for i in np.flatnonzero(totals <= 0)]
        raise UndefinedRateError(f"rows {bad} have zero total counts")
    return float(np.mean(counts[np.arange(len(perm)), perm] / totals))


def effective_conversion_rate(
    m: CrosstalkMatrix, ideal_map: Sequence[int] | np.ndarray, n_resamples: int = 100, seed: int = 0
) -> tuple[float, float]:
    """Mean over inputs of P(correct output | input), with a Poisson bootstrap stddev.

    ``ideal_map[i]`` is the correct output column for row ``i`` (a permutation
    matrix is also accepted, with columns as inputs).
    """
    counts = np.asarray(m.counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise ValueError("conversion rate needs a square table")
    perm = np.asarray(ideal_map)
    if perm.ndim == 2:
        perm = np.argmax(np.abs(perm), axis=0)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(perm))) or len(perm) != counts.shape[0]:
        raise ValueError("ideal_map is not a permutation of the table's columns")
    rate = _rate(counts, perm)
    rng = np.random.default_rng([seed, 3])
    samples = []
    for _ in range(n_resamples):
        resampled = rng.poisson(counts).astype(float)
        try:
            samples.append(_rate(resampled, perm))
        except UndefinedRateError:
            continue
    std = float(np.std(samples, ddof=1)) if len(samples) >= 2 else 0.0
    return rate, std
