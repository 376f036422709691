"""Optical elements as unitary maps on the single-photon mode space.

Phase conventions (none of them is observable once compensators are tuned):

* HWP(theta) on (H, V):  [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
* QWP(theta) on (H, V):  R(t) diag(1, i) R(-t), R(t) = [[cos t, -sin t], [sin t, cos t]]
* PBS: H transmits, V reflects with phase i and l -> -l
* mirror: l -> -l, no phase
* Dove prism at angle a: |l> -> i exp(2 i a l) |-l>
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .hilbert import DensityMatrix, ModeLabel, Space, SpaceError, StateVector

Column = list[tuple[ModeLabel, complex]]


class TruncationError(SpaceError):
    """An element pushed amplitude beyond the OAM cutoff."""


def _paths(paths: int | Iterable[int]) -> tuple[int, ...]:
    if isinstance(paths, int):
        return (paths,)
    return tuple(sorted(set(int(p) for p in paths)))


@dataclass(frozen=True)
class ElementOp:
    """One optical element.

    ``params`` is a tuple of ``(name, value)`` pairs so the element stays
    hashable. A PHASE element with ``slot`` set is a compensator whose value
    is supplied by the enclosing circuit.
    """

    name: str
    paths: tuple[int, ...]
    params: tuple = ()
    slot: str | None = None

    def param(self, key):
        return dict(self.params)[key]

    @property
    def placement(self) -> frozenset[int]:
        if self.name == "PBS":
            return frozenset(self.param("in")) | frozenset(self.param("out"))
        return frozenset(self.paths)

    def bind(self, value: float) -> "ElementOp":
        """Concrete copy of a slotted phase element."""
        if self.slot is None:
            return self
        return ElementOp(self.name, self.paths, (("phi", float(value)),), None)

    def column(self, mode: ModeLabel) -> Column:
        """Image of a basis mode; only called for modes inside ``placement``."""
        return _COLUMN[self.name](self, mode)

    def matrix(self, space: Space) -> np.ndarray:
        return _element_matrix(self, space)


def _jones_column(jones: np.ndarray, mode: ModeLabel) -> Column:
    k = 0 if mode.pol == "H" else 1
    return [(ModeLabel(pol, mode.path, mode.l), jones[row, k]) for row, pol in enumerate("HV")]


def _hwp_column(el: ElementOp, mode: ModeLabel) -> Column:
    return _jones_column(hwp_jones(el.param("theta")), mode)


def _qwp_column(el: ElementOp, mode: ModeLabel) -> Column:
    return _jones_column(qwp_jones(el.param("theta")), mode)


def _pbs_column(el: ElementOp, mode: ModeLabel) -> Column:
    a, b = el.param("in")
    c, d = el.param("out")
    if mode.path in (a, b):
        k = (a, b).index(mode.path)
        if mode.pol == "H":
            return [(ModeLabel("H", (c, d)[k], mode.l), 1.0)]
        return [(ModeLabel("V", (d, c)[k], -mode.l), 1j)]
    # disjoint ports: modes sitting on the output paths go back through the adjoint
    k = (c, d).index(mode.path)
    if mode.pol == "H":
        return [(ModeLabel("H", (a, b)[k], mode.l), 1.0)]
    return [(ModeLabel("V", (b, a)[k], -mode.l), -1j)]


def _mirror_column(el: ElementOp, mode: ModeLabel) -> Column:
    return [(ModeLabel(mode.pol, mode.path, -mode.l), 1.0)]


def _dove_column(el: ElementOp, mode: ModeLabel) -> Column:
    alpha = el.param("alpha")
    return [(ModeLabel(mode.pol, mode.path, -mode.l), 1j * cmath.exp(2j * alpha * mode.l))]


def _phase_column(el: ElementOp, mode: ModeLabel) -> Column:
    if el.slot is not None:
        raise ValueError(f"phase slot {el.slot!r} is unbound")
    return [(mode, cmath.exp(1j * el.param("phi")))]


def _block_column(el: ElementOp, mode: ModeLabel) -> Column:
    table = dict(el.param("table"))
    pol, l, amp = table.get((mode.pol, mode.l), (mode.pol, mode.l, 1.0))
    return [(ModeLabel(pol, mode.path, l), amp)]


_COLUMN = {
    "HWP": _hwp_column,
    "QWP": _qwp_column,
    "PBS": _pbs_column,
    "MIRROR": _mirror_column,
    "DOVE": _dove_column,
    "PHASE": _phase_column,
    "BLOCK": _block_column,
}


def hwp_jones(theta: float) -> np.ndarray:
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_jones(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1, 1j]) @ rot.T


# ---------------------------------------------------------------------------
# constructors


def hwp(theta: float, paths=0) -> ElementOp:
    return ElementOp("HWP", _paths(paths), (("theta", float(theta)),))


def qwp(theta: float, paths=0) -> ElementOp:
    return ElementOp("QWP", _paths(paths), (("theta", float(theta)),))


def pbs(in_paths: Sequence[int], out_paths: Sequence[int]) -> ElementOp:
    a, b = (int(p) for p in in_paths)
    c, d = (int(p) for p in out_paths)
    if a == b or c == d:
        raise ValueError("PBS ports must be distinct paths")
    if {a, b} != {c, d} and {a, b} & {c, d}:
        raise ValueError(f"PBS in={in_paths} and out={out_paths} partially overlap")
    return ElementOp("PBS", _paths((a, b, c, d)), (("in", (a, b)), ("out", (c, d))))


def mirror(paths=0) -> ElementOp:
    return ElementOp("MIRROR", _paths(paths))


def dove(alpha: float, paths=0) -> ElementOp:
    return ElementOp("DOVE", _paths(paths), (("alpha", float(alpha)),))


def phase_shifter(phi: float = 0.0, paths=0, slot: str | None = None) -> ElementOp:
    return ElementOp("PHASE", _paths(paths), (("phi", float(phi)),), slot)


def block(name: str, table: dict[tuple[str, int], tuple[str, int, complex]], paths=0) -> ElementOp:
    """Mode-permutation-with-phases element on ``paths``.

    ``table`` maps (pol, l) -> (pol', l', amplitude); unlisted modes pass
    unchanged. The caller guarantees the result is a permutation.
    """
    frozen = tuple(sorted((k, (v[0], int(v[1]), complex(v[2]))) for k, v in table.items()))
    return ElementOp("BLOCK", _paths(paths), (("name", name), ("table", frozen)))


# ---------------------------------------------------------------------------
# action


def apply(element: ElementOp, state: StateVector) -> StateVector:
    placement = element.placement
    space = state.space
    out: dict[ModeLabel, complex] = {}
    for mode, amp in state.amplitudes.items():
        image = element.column(mode) if mode.path in placement else [(mode, 1.0)]
        for target, coeff in image:
            if abs(target.l) > space.l_max:
                raise TruncationError(f"{element.name} produced l={target.l} beyond l_max={space.l_max}")
            if target.path not in space.paths:
                raise SpaceError(f"{element.name} routes into path {target.path} outside {space.paths}")
            out[target] = out.get(target, 0.0) + coeff * amp
    return StateVector(out, space)


@lru_cache(maxsize=4096)
def _element_matrix(element: ElementOp, space: Space) -> np.ndarray:
    dim = space.dim
    mat = np.zeros((dim, dim), dtype=complex)
    placement = element.placement
    if not placement <= set(space.paths):
        raise SpaceError(f"{element.name} acts on paths {sorted(placement)} outside {space.paths}")
    for j, mode in enumerate(space.modes):
        if mode.path not in placement:
            mat[j, j] = 1.0
            continue
        for target, coeff in element.column(mode):
            if abs(target.l) > space.l_max:
                raise TruncationError(f"{element.name} produced l={target.l} beyond l_max={space.l_max}")
            mat[space.index[target], j] += coeff
    mat.setflags(write=False)
    return mat


def is_unitary(mat: np.ndarray, atol: float = 1e-10) -> bool:
    return np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=atol, rtol=0)


@dataclass(frozen=True)
class Projector:
    """Sum of rank-one projectors onto orthonormal physical states."""

    targets: tuple[StateVector, ...]

    def probability(self, state: StateVector | DensityMatrix, space: Space | None = None) -> float:
        if isinstance(state, StateVector):
            return float(sum(abs(t.inner(state)) ** 2 for t in self.targets))
        if space is None:
            raise ValueError("a density matrix needs its space to be evaluated")
        rho = state.entries
        total = 0.0
        for t in self.targets:
            v = t.to_array(space)
            total += np.vdot(v, rho @ v).real
        return float(total)

    def __add__(self, other: "Projector") -> "Projector":
        return Projector(self.targets + other.targets)


def projector(target: StateVector) -> Projector:
    if target.norm == 0:
        raise ValueError("projector target has zero norm")
    if abs(target.norm - 1) > 1e-9:
        raise ValueError("projector target must be normalized")
    return Projector((target,))
