import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from photon_toffoli.experiment import NoiseModel
from photon_toffoli.hilbert import DensityMatrix
from photon_toffoli.tomography import (
    BELL_STATES,
    BELL_INPUTS,
    TomographyError,
    bell_scenarios,
    fidelity,
    fidelity_grid,
    measurement_rank,
    mle_reconstruct,
    monte_carlo_error,
    settings_for,
    trace_distance,
)

S1, S2, S3 = settings_for(1), settings_for(2), settings_for(3)


def exact_probs(sets, rho):
    rho = rho.entries if isinstance(rho, DensityMatrix) else rho
    return np.array([np.vdot(s.logical, rho @ s.logical).real for s in sets])


def random_pure(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_rho(rng, d, rank=None):
    a = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = a @ a.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


# ---------------------------------------------------------------------------
# settings


def test_settings_counts_and_rank():
    assert len(S1) == 6 and measurement_rank(S1) == 4
    assert len(S2) == 36 and measurement_rank(S2) == 16
    assert len(S3) == 216 and measurement_rank(S3) == 64


@pytest.mark.parametrize("n", [0, 4])
def test_unsupported_qubit_count(n):
    with pytest.raises(TomographyError):
        settings_for(n)


def test_setting_projectors_are_physical():
    for s in S2:
        assert abs(s.target.norm - 1) < 1e-12
        assert s.note
        # qubit 1 fixed to |1>: every target is H polarized on the up path
        assert {m.pol for m in s.target.amplitudes} == {"H"}
    assert S2[0].setting_id == "Z+Z+"


# ---------------------------------------------------------------------------
# maximum likelihood


def test_noiseless_phi_minus():
    rho = DensityMatrix.from_pure(BELL_STATES["Phi-"])
    res = mle_reconstruct(exact_probs(S2, rho), S2, 4)
    assert trace_distance(res.state, rho) <= 1e-3


def test_maximally_mixed_qubit():
    rng = np.random.default_rng(0)
    counts = rng.poisson(1e5 * exact_probs(S1, np.eye(2) / 2))
    res = mle_reconstruct(counts, S1, 2)
    assert trace_distance(res.state, np.eye(2) / 2) <= 0.02


def test_basis_state_purity():
    rng = np.random.default_rng(1)
    psi = np.eye(4)[2]
    counts = rng.poisson(1e4 * exact_probs(S2, np.outer(psi, psi)))
    assert mle_reconstruct(counts, S2, 4).state.purity >= 0.99


def test_random_pure_states_reconstruct():
    rng = np.random.default_rng(2)
    for _ in range(10):
        psi = random_pure(rng, 4)
        res = mle_reconstruct(exact_probs(S2, np.outer(psi, psi.conj())), S2, 4)
        assert fidelity(res.state, DensityMatrix.from_pure(psi)) >= 0.999


def test_likelihood_never_decreases():
    rng = np.random.default_rng(3)
    for _ in range(5):
        counts = rng.poisson(30 * exact_probs(S2, random_rho(rng, 4, rank=2)))
        res = mle_reconstruct(counts, S2, 4, track=True)
        assert np.all(np.diff(res.loglik) >= -1e-12)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.integers(0, 500), min_size=36, max_size=36).filter(lambda c: sum(c) > 0))
def test_adversarial_counts_give_valid_states(counts):
    res = mle_reconstruct(np.array(counts), S2, 4, max_iter=300)
    rho = res.state.entries
    assert np.allclose(rho, rho.conj().T, atol=1e-9)
    assert abs(np.trace(rho) - 1) <= 1e-9
    assert np.linalg.eigvalsh(rho).min() >= -1e-9


def test_mle_errors():
    with pytest.raises(TomographyError):
        mle_reconstruct(np.zeros(36), S2, 4)
    with pytest.raises(TomographyError):
        mle_reconstruct(np.ones(6), S2, 4)
    with pytest.raises(TomographyError):
        mle_reconstruct(np.ones(36), S2, 8)


def test_non_convergence_is_flagged():
    rng = np.random.default_rng(4)
    counts = rng.poisson(200 * exact_probs(S2, random_rho(rng, 4)))
    res = mle_reconstruct(counts, S2, 4, max_iter=2)
    assert res.iterations == 2 and not res.converged


def test_records_input(tmp_path):
    from photon_toffoli.experiment import CountRecord

    probs = exact_probs(S2, DensityMatrix.from_pure(BELL_STATES["Psi+"]))
    records = [CountRecord("x", s.setting_id, int(round(1e4 * p)), 1.0, 0) for s, p in zip(S2, probs)]
    res = mle_reconstruct(records, S2, 4)
    assert fidelity(res.state, DensityMatrix.from_pure(BELL_STATES["Psi+"])) > 0.999
    with pytest.raises(TomographyError):
        mle_reconstruct(records[:-1], S2, 4)


# ---------------------------------------------------------------------------
# fidelity


def test_fidelity_examples():
    rng = np.random.default_rng(5)
    rho = random_rho(rng, 4)
    assert fidelity(rho, rho) == pytest.approx(1, abs=1e-9)
    zero, one = DensityMatrix.from_pure([1, 0]), DensityMatrix.from_pure([0, 1])
    assert fidelity(zero, one) == pytest.approx(0, abs=1e-12)
    assert fidelity(DensityMatrix(np.eye(4) / 4), DensityMatrix.from_pure(BELL_STATES["Phi-"])) == pytest.approx(0.25)


def test_fidelity_pure_shortcut_symmetry_and_invariance():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, b = random_rho(rng, 4), random_rho(rng, 4)
        assert abs(fidelity(a, b) - fidelity(b, a)) <= 1e-10
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        a2 = DensityMatrix(q @ a.entries @ q.conj().T)
        b2 = DensityMatrix(q @ b.entries @ q.conj().T)
        assert fidelity(a2, b2) == pytest.approx(fidelity(a, b), abs=1e-9)
        psi = random_pure(rng, 4)
        want = np.vdot(psi, a.entries @ psi).real
        assert fidelity(a, DensityMatrix.from_pure(psi)) == pytest.approx(want, abs=1e-9)
        assert fidelity(DensityMatrix.from_pure(psi), a) == pytest.approx(want, abs=1e-9)


def test_fidelity_rejects_mismatch_and_invalid():
    with pytest.raises(ValueError):
        fidelity(np.eye(2) / 2, np.eye(4) / 4)
    with pytest.raises(ValueError):
        fidelity(np.eye(2), np.eye(2) / 2)


# ---------------------------------------------------------------------------
# Monte-Carlo error bars


def test_mc_error_infinite_counts():
    rho = DensityMatrix.from_pure(BELL_STATES["Phi-"])
    assert monte_carlo_error(1e10 * exact_probs(S2, rho), S2, 4, rho, 10, seed=0) <= 1e-3


def test_mc_error_at_realistic_count_level():
    # about 25 counts per setting, the level the shipped noise config produces
    rho = DensityMatrix.from_pure(BELL_STATES["Psi+"])
    counts = np.random.default_rng(0).poisson(25 * exact_probs(S2, rho))
    assert 0.01 <= monte_carlo_error(counts, S2, 4, rho, 100, seed=0) <= 0.03


def test_mc_error_is_seeded_and_checks_samples():
    rho = DensityMatrix.from_pure(BELL_STATES["Phi+"])
    counts = np.random.default_rng(1).poisson(40 * exact_probs(S2, rho))
    assert monte_carlo_error(counts, S2, 4, rho, 20, seed=3) == monte_carlo_error(counts, S2, 4, rho, 20, seed=3)
    with pytest.raises(ValueError):
        monte_carlo_error(counts, S2, 4, rho, 1)


def test_mc_error_shrinks_with_more_counts():
    rho = DensityMatrix.from_pure(BELL_STATES["Phi+"])
    p = exact_probs(S2, rho)
    few = monte_carlo_error(np.random.default_rng(2).poisson(20 * p), S2, 4, rho, 40, seed=0)
    many = monte_carlo_error(np.random.default_rng(2).poisson(2000 * p), S2, 4, rho, 40, seed=0)
    assert many < few


# ---------------------------------------------------------------------------
# scenarios


def test_bell_input_assignments():
    assert [bell for _, bell in BELL_INPUTS.values()] == ["Phi+", "Phi-", "Psi+", "Psi-"]


def test_bell_scenarios_ideal():
    reports = bell_scenarios(NoiseModel(), seed=0, n_samples=0)
    assert [r["expected"] for r in reports] == ["Phi+", "Phi-", "Psi+", "Psi-"]
    for r in reports:
        assert r["fidelity"] >= 0.99
        assert r["settings"] == 36 and r["stddev"] == 0


def test_fidelity_grid_ideal():
    grid = fidelity_grid(NoiseModel(), seed=0, n_samples=0, max_iter=2000)
    assert grid["rows"] == ["|1>", "|0>", "(|0>+|1>)/sqrt2"]
    assert len(grid["cols"]) == 8
    assert np.min(grid["fidelity"]) >= 0.99
