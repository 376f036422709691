"""State tomography: Pauli-eigenstate settings, diluted RrhoR maximum likelihood, fidelities."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._parallel import pmap
from .elements import Projector, projector
from .experiment import DEFAULT_DURATION, CountRecord, NoiseModel, NoisyChannel, cell_rng, draw_counts, resolve_channel
from .hilbert import TOFFOLI_ENCODING, DensityMatrix, LogicalEncoding, StateVector, logical_to_physical
from .network import ideal_toffoli

SQRT_HALF = 1 / math.sqrt(2)
EIG_CLAMP = 1e-12

# single-qubit Pauli eigenstates in (|0>, |1>)
PAULI_EIGENSTATES = {
    "Z+": np.array([1, 0], dtype=complex),
    "Z-": np.array([0, 1], dtype=complex),
    "X+": np.array([1, 1], dtype=complex) * SQRT_HALF,
    "X-": np.array([1, -1], dtype=complex) * SQRT_HALF,
    "Y+": np.array([1, 1j], dtype=complex) * SQRT_HALF,
    "Y-": np.array([1, -1j], dtype=complex) * SQRT_HALF,
}

BELL_STATES = {
    "Phi+": np.array([1, 0, 0, 1], dtype=complex) * SQRT_HALF,
    "Phi-": np.array([1, 0, 0, -1], dtype=complex) * SQRT_HALF,
    "Psi+": np.array([0, 1, 1, 0], dtype=complex) * SQRT_HALF,
    "Psi-": np.array([0, 1, -1, 0], dtype=complex) * SQRT_HALF,
}


class TomographyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TomographySetting:
    setting_id: str
    logical: np.ndarray
    target: StateVector
    note: str = ""

    @property
    def projector(self) -> Projector:
        return projector(self.target)


def _note(target: StateVector) -> str:
    parts = []
    for pol in ("H", "V"):
        terms = [(m.l, a) for m, a in sorted(target.amplitudes.items()) if m.pol == pol]
        if terms:
            holo = " ".join(f"{a.real:+.3f}{a.imag:+.3f}j@l={l}" for l, a in terms)
            parts.append(f"{pol}: {holo}")
    return "; ".join(parts)


def settings_for(n_qubits: int, encoding: LogicalEncoding = TOFFOLI_ENCODING, prefix: str | None = None) -> list[TomographySetting]:
    """Product Pauli-eigenstate projectors on the last ``n_qubits`` qubits.

    Leading qubits not measured are fixed to the basis string ``prefix``
    (default all ones, i.e. H polarization for qubit 1).
    """
    if n_qubits not in (1, 2, 3) or n_qubits > encoding.n_qubits:
        raise TomographyError(f"unsupported number of qubits: {n_qubits}")
    lead = encoding.n_qubits - n_qubits
    prefix = "1" * lead if prefix is None else prefix
    if len(prefix) != lead or set(prefix) - {"0", "1"}:
        raise TomographyError(f"prefix must be {lead} bits")
    head = np.zeros(2**lead, dtype=complex)
    head[int(prefix, 2) if prefix else 0] = 1
    out = []
    for labels in itertools.product(PAULI_EIGENSTATES, repeat=n_qubits):
        vec = np.ones(1, dtype=complex)
        for lab in labels:
            vec = np.kron(vec, PAULI_EIGENSTATES[lab])
        target = logical_to_physical(np.kron(head, vec), encoding)
        out.append(TomographySetting("".join(labels), vec, target, _note(target)))
    return out


def measurement_rank(settings: Sequence[TomographySetting]) -> int:
    rows = np.array([np.outer(s.logical, s.logical.conj()).ravel() for s in settings])
    return int(np.linalg.matrix_rank(rows))


# ---------------------------------------------------------------------------
# maximum likelihood


@dataclass
class TomographyResult:
    state: DensityMatrix
    iterations: int
    converged: bool
    counts_total: float
    loglik: list[float] = field(default_factory=list)


def _counts_vector(records, settings: Sequence[TomographySetting]) -> np.ndarray:
    if isinstance(records, np.ndarray) or (records and not isinstance(records[0], CountRecord)):
        counts = np.asarray(records, dtype=float)
        if counts.shape != (len(settings),):
            raise TomographyError("need one count per setting")
        return counts
    by_id = {r.projector_id: r.counts for r in records}
    missing = [s.setting_id for s in settings if s.setting_id not in by_id]
    if missing:
        raise TomographyError(f"no record for settings {missing[:5]}")
    return np.array([by_id[s.setting_id] for s in settings], dtype=float)


def _loglik(counts: np.ndarray, p: np.ndarray, mask: np.ndarray) -> float:
    if np.any(p[mask] <= 0):
        return -math.inf
    return float(counts[mask] @ np.log(p[mask]))


def mle_reconstruct(
    records,
    settings: Sequence[TomographySetting],
    dim: int | None = None,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    track: bool = False,
) -> TomographyResult:
    """Diluted iterative RrhoR maximum-likelihood estimate.

    Each step first tries the plain R rho R update; if that lowers the
    likelihood it falls back to (I + eps R) rho (I + eps R) with eps halved
    until the likelihood does not decrease. Stops when the per-count
    log-likelihood gain drops below ``tol`` or after ``max_iter`` steps.
    ``records`` may be CountRecords or a plain count/probability vector.
    """
    counts = _counts_vector(records, settings)
    if np.any(counts < 0) or not np.all(np.isfinite(counts)):
        raise TomographyError("counts must be finite and non-negative")
    total = counts.sum()
    if total <= 0:
        raise TomographyError("all counts are zero")
    vecs = np.array([s.logical for s in settings])
    d = vecs.shape[1] if dim is None else dim
    if vecs.shape[1] != d:
        raise TomographyError(f"settings act on dimension {vecs.shape[1]}, not {d}")
    mask = counts > 0
    norm = np.trace(vecs.T @ vecs.conj()).real / d  # sum of projectors = norm * I for these sets
    eye = np.eye(d)

    def probs(rho):
        return np.einsum("kd,de,ke->k", vecs.conj(), rho, vecs).real

    def r_op(p):
        w = np.zeros_like(counts)
        w[mask] = counts[mask] / p[mask]
        return (vecs.T * (w * norm / total)) @ vecs.conj()

    rho = eye / d
    p = probs(rho)
    ll = _loglik(counts, p, mask) / total
    history = [ll] if track else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = r_op(p)
        cand = r @ rho @ r
        cand = cand / np.trace(cand).real
        p_new = probs(cand)
        ll_new = _loglik(counts, p_new, mask) / total
        eps = 1.0
        while ll_new < ll and eps > 1e-8:
            g = eye + eps * r
            cand = g @ rho @ g
            cand = cand / np.trace(cand).real
            p_new = probs(cand)
            ll_new = _loglik(counts, p_new, mask) / total
            eps /= 2
        if ll_new < ll:
            converged = True
            break
        gain = ll_new - ll
        rho, p, ll = (cand + cand.conj().T) / 2, p_new, ll_new
        if track:
            history.append(ll)
        if gain < tol:
            converged = True
            break
    return TomographyResult(DensityMatrix(rho), it, converged, float(total), history)


# ---------------------------------------------------------------------------
# fidelity


def _entries(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.where(w < EIG_CLAMP, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho_o, rho_e) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho_o) rho_e sqrt(rho_o)))^2."""
    a, b = _entries(rho_o), _entries(rho_e)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    if not isinstance(rho_o, DensityMatrix):
        DensityMatrix(a)
    if not isinstance(rho_e, DensityMatrix):
        DensityMatrix(b)
    for pure, other in ((a, b), (b, a)):
        w, v = np.linalg.eigh(pure)
        if w[-1] > 1 - EIG_CLAMP:  # rank one: F = <psi|other|psi>
            psi = v[:, -1]
            return min(max(float(np.vdot(psi, other @ psi).real), 0.0), 1.0)
    s = psd_sqrt(a)
    w = np.linalg.eigvalsh(s @ b @ s)
    f = float(np.sum(np.sqrt(np.where(w < EIG_CLAMP, 0.0, w))) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a, b) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(_entries(a) - _entries(b)))))


def monte_carlo_error(
    records,
    settings: Sequence[TomographySetting],
    dim: int | None,
    expected: DensityMatrix,
    n_samples: int = 100,
    seed: int = 0,
    max_iter: int = 10_000,
) -> float:
    """Stddev of the fidelity over Poisson resamples of the observed counts."""
    if n_samples < 2:
        raise ValueError("need at least two resamples")
    counts = _counts_vector(records, settings)

    def one(k: int) -> float:
        rng = np.random.default_rng([seed, 4, k])
        resampled = rng.poisson(counts).astype(float)
        if resampled.sum() == 0:
            return math.nan
        return fidelity(mle_reconstruct(resampled, settings, dim, max_iter=max_iter).state, expected)

    values = np.array(pmap(one, range(n_samples)))
    values = values[np.isfinite(values)]
    return float(np.std(values, ddof=1)) if len(values) >= 2 else 0.0


# ---------------------------------------------------------------------------
# scenarios


def measure_settings(
    channel: NoisyChannel,
    state: StateVector,
    settings: Sequence[TomographySetting],
    noise: NoiseModel,
    duration: float,
    seed: int,
    input_id: str = "input",
    row: int = 0,
) -> list[CountRecord]:
    probs = channel.probabilities([state], [s.projector for s in settings])[0]
    return [
        CountRecord(input_id, s.setting_id, draw_counts(p, noise, duration, cell_rng(seed, row, j)), float(duration), seed)
        for j, (s, p) in enumerate(zip(settings, probs))
    ]


def tomography_report(
    records,
    settings: Sequence[TomographySetting],
    expected: DensityMatrix,
    n_samples: int = 100,
    seed: int = 0,
    max_iter: int = 10_000,
) -> dict:
    res = mle_reconstruct(records, settings, expected.dim, max_iter=max_iter)
    std = monte_carlo_error(records, settings, expected.dim, expected, n_samples, seed, max_iter) if n_samples >= 2 else 0.0
    return {
        "state": res.state.to_json(),
        "fidelity": fidelity(res.state, expected),
        "stddev": std,
        "iterations": res.iterations,
        "settings": len(settings),
        "counts_total": int(round(res.counts_total)),
    }


BELL_INPUTS = {
    # qubits 2-3 input (logical, |q2 q3>) -> expected Bell output
    "(|0>+|1>)/sqrt2 x |0>": (np.kron(PAULI_EIGENSTATES["X+"], [1, 0]), "Phi+"),
    "(|0>-|1>)/sqrt2 x |0>": (np.kron(PAULI_EIGENSTATES["X-"], [1, 0]), "Phi-"),
    "(|0>+|1>)/sqrt2 x |1>": (np.kron(PAULI_EIGENSTATES["X+"], [0, 1]), "Psi+"),
    "(|0>-|1>)/sqrt2 x |1>": (np.kron(PAULI_EIGENSTATES["X-"], [0, 1]), "Psi-"),
}


def bell_scenarios(
    noise: NoiseModel | None = None,
    duration: float = DEFAULT_DURATION,
    seed: int = 0,
    n_samples: int = 100,
    circuit=None,
    max_iter: int = 10_000,
) -> list[dict]:
    """Bell-state generation with qubit 1 = |1>; two-qubit tomography on qubits 2-3."""
    noise = noise or NoiseModel()
    channel = resolve_channel(circuit, noise, seed)
    settings = settings_for(2)
    one = np.array([0, 1], dtype=complex)
    out = []
    for row, (label, (tail, bell)) in enumerate(BELL_INPUTS.items()):
        state = logical_to_physical(np.kron(one, tail))
        records = measure_settings(channel, state, settings, noise, duration, seed, label, row)
        expected = DensityMatrix.from_pure(BELL_STATES[bell])
        report = tomography_report(records, settings, expected, n_samples, seed + row, max_iter)
        out.append({"input": label, "expected": bell, **report})
    return out


GRID_CONTROLS = {
    "|1>": np.array([0, 1], dtype=complex),
    "|0>": np.array([1, 0], dtype=complex),
    "(|0>+|1>)/sqrt2": np.array([1, 1], dtype=complex) * SQRT_HALF,
}
GRID_TARGETS = {
    "|00>": np.array([1, 0, 0, 0], dtype=complex),
    "|01>": np.array([0, 1, 0, 0], dtype=complex),
    "|10>": np.array([0, 0, 1, 0], dtype=complex),
    "|11>": np.array([0, 0, 0, 1], dtype=complex),
    "Psi+": BELL_STATES["Psi+"],
    "Psi-": BELL_STATES["Psi-"],
    "Phi+": BELL_STATES["Phi+"],
    "Phi-": BELL_STATES["Phi-"],
}


def fidelity_grid(
    noise: NoiseModel | None = None,
    duration: float = DEFAULT_DURATION,
    seed: int = 0,
    n_samples: int = 100,
    circuit=None,
    max_iter: int = 10_000,
) -> dict:
    """Qubit-1 states x qubit-2/3 states through the Toffoli, full three-qubit tomography.

    Fidelity is against U rho_i U^dag for the ideal Toffoli, on the whole
    three-qubit output.
    """
    noise = noise or NoiseModel()
    channel = resolve_channel(circuit, noise, seed)
    settings = settings_for(3)
    u = ideal_toffoli(3)
    cells = [(r, c) for r in GRID_CONTROLS for c in GRID_TARGETS]

    def run(k: int) -> dict:
        r, c = cells[k]
        psi = np.kron(GRID_CONTROLS[r], GRID_TARGETS[c])
        records = measure_settings(channel, logical_to_physical(psi), settings, noise, duration, seed, f"{r},{c}", k)
        expected = DensityMatrix.from_pure(u @ psi)
        return tomography_report(records, settings, expected, n_samples, seed + k, max_iter)

    channel.realizations()  # fill the cache before fanning out
    reports = pmap(run, range(len(cells)))
    fid = [[0.0] * len(GRID_TARGETS) for _ in GRID_CONTROLS]
    std = [[0.0] * len(GRID_TARGETS) for _ in GRID_CONTROLS]
    for (r, c), rep in zip(cells, reports):
        i, j = list(GRID_CONTROLS).index(r), list(GRID_TARGETS).index(c)
        fid[i][j], std[i][j] = rep["fidelity"], rep["stddev"]
    return {"rows": list(GRID_CONTROLS), "cols": list(GRID_TARGETS), "fidelity": fid, "stddev": std}
