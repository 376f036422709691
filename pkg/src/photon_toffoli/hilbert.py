"""Single-photon mode space: polarization x path x truncated OAM.

Logical qubits are carried by one photon. Qubit 1 lives in polarization
(V -> 0, H -> 1); the remaining qubits are packed into OAM values, with the
two strings ending in ``...10``/``...11`` on l = -1/+1 and every other
string on an even l.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

POLARIZATIONS = ("H", "V")
DEFAULT_L_MAX = 4
PRUNE_TOL = 1e-14
NORM_TOL = 1e-9


class EncodingError(ValueError):
    """Raised for logical strings or qubit counts outside an encoding's domain."""


class SpaceError(ValueError):
    """Raised when a mode falls outside the declared space."""


@dataclass(frozen=True, order=True)
class ModeLabel:
    pol: str
    path: int
    l: int

    def __post_init__(self):
        if self.pol not in POLARIZATIONS:
            raise SpaceError(f"unknown polarization {self.pol!r}")

    def to_json(self) -> dict:
        return {"pol": self.pol, "path": int(self.path), "l": int(self.l)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ModeLabel":
        return cls(obj["pol"], int(obj["path"]), int(obj["l"]))


@dataclass(frozen=True)
class Space:
    """Finite mode space; basis order is path-major, then polarization, then l."""

    paths: tuple[int, ...] = (0, 1)
    l_max: int = DEFAULT_L_MAX

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(sorted(set(int(p) for p in self.paths))))
        if self.l_max < 0:
            raise SpaceError("l_max must be non-negative")

    @cached_property
    def modes(self) -> tuple[ModeLabel, ...]:
        ls = range(-self.l_max, self.l_max + 1)
        return tuple(ModeLabel(pol, p, l) for p in self.paths for pol in POLARIZATIONS for l in ls)

    @cached_property
    def index(self) -> dict[ModeLabel, int]:
        return {m: i for i, m in enumerate(self.modes)}

    @property
    def dim(self) -> int:
        return len(self.modes)

    def __contains__(self, mode: ModeLabel) -> bool:
        return mode.path in self.paths and abs(mode.l) <= self.l_max

    def union(self, other: "Space") -> "Space":
        return Space(tuple(set(self.paths) | set(other.paths)), max(self.l_max, other.l_max))


@dataclass(frozen=True)
class StateVector:
    """Sparse single-photon state: complex amplitudes keyed by mode."""

    amplitudes: Mapping[ModeLabel, complex]
    space: Space = field(default_factory=Space)

    def __post_init__(self):
        amps = {}
        for mode, amp in self.amplitudes.items():
            if mode not in self.space:
                raise SpaceError(f"mode {mode} outside space {self.space}")
            amp = complex(amp)
            if abs(amp) > PRUNE_TOL:
                amps[mode] = amp
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def unit(cls, mode: ModeLabel, space: Space | None = None) -> "StateVector":
        return cls({mode: 1.0}, space or Space())

    @classmethod
    def from_array(cls, space: Space, vec: np.ndarray) -> "StateVector":
        vec = np.asarray(vec, dtype=complex).ravel()
        if vec.shape != (space.dim,):
            raise SpaceError(f"expected vector of length {space.dim}, got {vec.shape}")
        return cls({m: vec[i] for i, m in enumerate(space.modes) if abs(vec[i]) > PRUNE_TOL}, space)

    def to_array(self, space: Space | None = None) -> np.ndarray:
        space = space or self.space
        vec = np.zeros(space.dim, dtype=complex)
        for mode, amp in self.amplitudes.items():
            if mode not in space:
                raise SpaceError(f"mode {mode} outside space {space}")
            vec[space.index[mode]] = amp
        return vec

    def rehome(self, space: Space) -> "StateVector":
        return StateVector(self.amplitudes, space)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalize(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector({m: a / n for m, a in self.amplitudes.items()}, self.space)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return sum((a.conjugate() * other.amplitudes.get(m, 0.0) for m, a in self.amplitudes.items()), 0j)

    def __add__(self, other: "StateVector") -> "StateVector":
        space = self.space.union(other.space)
        amps = dict(self.amplitudes)
        for m, a in other.amplitudes.items():
            amps[m] = amps.get(m, 0.0) + a
        return StateVector(amps, space)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self + (-1) * other

    def __mul__(self, c: complex) -> "StateVector":
        return StateVector({m: a * c for m, a in self.amplitudes.items()}, self.space)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "StateVector":
        return self * (1 / c)

    def isclose(self, other: "StateVector", atol: float = 1e-9) -> bool:
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitudes.get(k, 0) - other.amplitudes.get(k, 0)) <= atol for k in keys)

    def to_json(self) -> dict:
        return {
            "space": {"paths": list(self.space.paths), "l_max": self.space.l_max},
            "amplitudes": [
                {"mode": m.to_json(), "amp": [a.real, a.imag]} for m, a in sorted(self.amplitudes.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "StateVector":
        space = Space(tuple(obj["space"]["paths"]), int(obj["space"]["l_max"]))
        amps = {ModeLabel.from_json(e["mode"]): complex(*e["amp"]) for e in obj["amplitudes"]}
        return cls(amps, space)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > NORM_TOL:
            raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
        if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -NORM_TOL:
            raise ValueError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_pure(cls, psi: np.ndarray | StateVector) -> "DensityMatrix":
        if isinstance(psi, StateVector):
            psi = psi.to_array()
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.entries @ op))

    def to_json(self) -> dict:
        return {"dim": self.dim, "re": self.entries.real.tolist(), "im": self.entries.imag.tolist()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "DensityMatrix":
        rho = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
        if rho.shape != (obj["dim"], obj["dim"]):
            raise ValueError("dim does not match entries")
        return cls(rho)


def dumps(obj) -> str:
    """Deterministic JSON used by every emitter in the package."""
    return json.dumps(obj, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# logical encoding


@dataclass(frozen=True)
class LogicalEncoding:
    n_qubits: int
    map: Mapping[str, tuple[str, int]]
    l_max_required: int

    @cached_property
    def inverse(self) -> dict[tuple[str, int], str]:
        return {v: k for k, v in self.map.items()}

    @property
    def strings(self) -> list[str]:
        return basis_strings(self.n_qubits)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def mode(self, bits: str) -> ModeLabel:
        self._check(bits)
        pol, l = self.map[bits]
        return ModeLabel(pol, 0, l)

    def default_space(self, paths: Iterable[int] = (0, 1)) -> Space:
        return Space(tuple(paths), max(DEFAULT_L_MAX, self.l_max_required))

    def _check(self, bits: str):
        if len(bits) != self.n_qubits or set(bits) - {"0", "1"}:
            raise EncodingError(f"{bits!r} is not a {self.n_qubits}-bit string")


def basis_strings(n: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def _even_oam_values(count: int) -> list[int]:
    # pick 0, -2, +2, -4, +4, ... then list ascending, so n=3 gives (-2, 0)
    picked = [0]
    k = 2
    while len(picked) < count:
        picked.extend([-k, k])
        k += 2
    return sorted(picked[:count])


def n_qubit_encoding(n: int) -> LogicalEncoding:
    """Hybrid polarization/OAM encoding of ``n`` qubits on one photon.

    Strings on qubits 2..n are ordered lexicographically; all but the last two
    go to even l values in ascending order, the last two to l = -1 and l = +1.
    For n = 3 this is l=-2 -> 00, l=0 -> 01, l=-1 -> 10, l=+1 -> 11.
    """
    if n < 3:
        raise EncodingError(f"hybrid encoding needs n >= 3 qubits, got {n}")
    tails = basis_strings(n - 1)
    evens = _even_oam_values(len(tails) - 2)
    oam = dict(zip(tails, evens + [-1, 1]))
    mapping = {}
    for first, pol in (("0", "V"), ("1", "H")):
        for tail in tails:
            mapping[first + tail] = (pol, oam[tail])
    l_req = max(abs(l) for _, l in mapping.values())
    return LogicalEncoding(n, mapping, l_req)


TOFFOLI_ENCODING = n_qubit_encoding(3)


def encode_logical(bits: str, enc: LogicalEncoding = TOFFOLI_ENCODING, space: Space | None = None) -> StateVector:
    return StateVector.unit(enc.mode(bits), space or enc.default_space())


def logical_to_physical(vec: np.ndarray, enc: LogicalEncoding = TOFFOLI_ENCODING, space: Space | None = None) -> StateVector:
    """Map a 2**n logical amplitude vector (qubit 1 most significant) to modes."""
    vec = np.asarray(vec, dtype=complex).ravel()
    if vec.shape != (enc.dim,):
        raise EncodingError(f"logical vector must have length {enc.dim}")
    amps = {enc.mode(s): vec[i] for i, s in enumerate(enc.strings)}
    return StateVector(amps, space or enc.default_space())


def decode_physical(state: StateVector, enc: LogicalEncoding = TOFFOLI_ENCODING) -> tuple[np.ndarray | None, float]:
    """Project onto the encoded subspace (path 0).

    Returns ``(logical_vector, leakage)`` where leakage is the probability
    weight outside the encoded modes. The logical vector is renormalized, or
    ``None`` when nothing is left (leakage 1).
    """
    total = sum(abs(a) ** 2 for a in state.amplitudes.values())
    if total == 0:
        raise ValueError("zero state")
    logical = np.zeros(enc.dim, dtype=complex)
    for i, s in enumerate(enc.strings):
        logical[i] = state.amplitudes.get(enc.mode(s), 0.0)
    inside = float(np.vdot(logical, logical).real) / total
    leakage = max(0.0, 1.0 - inside)
    if inside <= PRUNE_TOL:
        return None, 1.0
    return logical / np.linalg.norm(logical), leakage


# ---------------------------------------------------------------------------
# product-state preparation


@dataclass(frozen=True)
class PreparationSpec:
    """Per-qubit (theta, phi): cos(theta)|0> + exp(i phi) sin(theta)|1>."""

    angles: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for theta, phi in self.angles:
            if not -1e-12 <= theta <= math.pi / 2 + 1e-12:
                raise ValueError(f"theta={theta} outside [0, pi/2]")
            if not -1e-12 <= phi < 2 * math.pi:
                raise ValueError(f"phi={phi} outside [0, 2pi)")

    @classmethod
    def of(cls, *angles: tuple[float, float]) -> "PreparationSpec":
        return cls(tuple((float(t), float(p)) for t, p in angles))

    def logical_vector(self) -> np.ndarray:
        vec = np.ones(1, dtype=complex)
        for theta, phi in self.angles:
            vec = np.kron(vec, [math.cos(theta), np.exp(1j * phi) * math.sin(theta)])
        return vec


def prepare_product_state(spec: PreparationSpec, enc: LogicalEncoding = TOFFOLI_ENCODING, space: Space | None = None) -> StateVector:
    if len(spec.angles) != enc.n_qubits:
        raise EncodingError(f"need {enc.n_qubits} angle pairs, got {len(spec.angles)}")
    return logical_to_physical(spec.logical_vector(), enc, space).normalize()
