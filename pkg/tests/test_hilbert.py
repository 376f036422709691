import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_toffoli.hilbert import (
    TOFFOLI_ENCODING,
    DensityMatrix,
    EncodingError,
    ModeLabel,
    PreparationSpec,
    Space,
    SpaceError,
    StateVector,
    basis_strings,
    decode_physical,
    dumps,
    encode_logical,
    logical_to_physical,
    n_qubit_encoding,
    prepare_product_state,
)

SQ = 1 / math.sqrt(2)


@pytest.mark.parametrize(
    "bits, pol, l",
    [("000", "V", -2), ("001", "V", 0), ("010", "V", -1), ("011", "V", 1),
     ("100", "H", -2), ("101", "H", 0), ("110", "H", -1), ("111", "H", 1)],
)
def test_three_qubit_map(bits, pol, l):
    state = encode_logical(bits)
    assert state.amplitudes == {ModeLabel(pol, 0, l): 1}


def test_three_qubit_l_max_required():
    assert TOFFOLI_ENCODING.l_max_required == 2


@pytest.mark.parametrize("bad", ["11", "1101", "1a0", ""])
def test_encode_rejects_bad_strings(bad):
    with pytest.raises(EncodingError):
        encode_logical(bad)


def test_encoding_needs_three_qubits():
    with pytest.raises(EncodingError):
        n_qubit_encoding(2)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_encoding_bijective_and_parity(n):
    enc = n_qubit_encoding(n)
    images = list(enc.map.values())
    assert len(set(images)) == len(images) == 2**n
    # per polarization: 2^(n-1) distinct l values, exactly two odd ones at -1, +1
    for pol in "HV":
        ls = [l for p, l in images if p == pol]
        assert len(set(ls)) == 2 ** (n - 1)
        assert sorted(l for l in ls if l % 2) == [-1, 1]
    tails = basis_strings(n - 1)
    assert enc.map["1" + tails[-2]] == ("H", -1)
    assert enc.map["1" + tails[-1]] == ("H", 1)
    for s in enc.strings:
        vec, leak = decode_physical(encode_logical(s, enc), enc)
        assert leak == 0
        assert vec[enc.strings.index(s)] == 1


def test_four_qubit_even_values():
    enc = n_qubit_encoding(4)
    # 8 strings on qubits 2-4 need 6 even values plus -1 and +1
    evens = sorted({l for _, l in enc.map.values() if l % 2 == 0})
    assert evens == [-6, -4, -2, 0, 2, 4]
    assert enc.map["1000"] == ("H", -6)
    assert enc.l_max_required == 6


def test_decode_leakage_examples():
    vec, leak = decode_physical(encode_logical("110"))
    assert leak == 0 and np.argmax(abs(vec)) == 6
    vec, leak = decode_physical(StateVector.unit(ModeLabel("H", 0, 2)))
    assert vec is None and leak == 1
    mixed = (encode_logical("100") + StateVector.unit(ModeLabel("H", 0, 3))) / math.sqrt(2)
    vec, leak = decode_physical(mixed)
    assert leak == pytest.approx(0.5, abs=1e-12)
    assert abs(vec[4]) == pytest.approx(1)


def test_wrong_path_counts_as_leakage():
    vec, leak = decode_physical(StateVector.unit(ModeLabel("H", 1, -1)))
    assert vec is None and leak == 1


def test_preparation_examples():
    s = prepare_product_state(PreparationSpec.of((0, 0), (0, 0), (0, 0)))
    assert s.isclose(encode_logical("000"))
    s = prepare_product_state(PreparationSpec.of((math.pi / 4, 0), (math.pi / 2, 0), (math.pi / 2, 0)))
    assert s.isclose((encode_logical("011") + encode_logical("111")) * SQ)
    # Bell-scenario style input on qubits 2-3, qubit 1 fixed to |1>
    s = prepare_product_state(PreparationSpec.of((math.pi / 2, 0), (math.pi / 4, math.pi), (0, 0)))
    assert s.isclose((encode_logical("100") - encode_logical("110")) * SQ, atol=1e-12)


@pytest.mark.parametrize("angles", [((-0.1, 0),), ((2.0, 0),), ((0.3, 2 * math.pi),), ((0.3, -0.5),)])
def test_preparation_range_checks(angles):
    with pytest.raises(ValueError):
        PreparationSpec.of(*angles)


angle = st.tuples(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi, exclude_max=True))


@settings(max_examples=200, deadline=None)
@given(st.tuples(angle, angle, angle))
def test_product_state_is_normalized(angles):
    s = prepare_product_state(PreparationSpec.of(*angles))
    assert abs(s.norm - 1) <= 1e-12


def test_product_state_matches_kron():
    rng = np.random.default_rng(3)
    for _ in range(20):
        angles = [(rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)) for _ in range(3)]
        vec = np.ones(1)
        for t, p in angles:
            vec = np.kron(vec, [math.cos(t), np.exp(1j * p) * math.sin(t)])
        got, leak = decode_physical(prepare_product_state(PreparationSpec.of(*angles)))
        assert leak < 1e-12
        assert np.allclose(got, vec, atol=1e-12)


def test_space_rejects_outside_modes():
    with pytest.raises(SpaceError):
        StateVector({ModeLabel("H", 0, 5): 1.0}, Space((0, 1), 4))
    with pytest.raises(SpaceError):
        StateVector({ModeLabel("H", 3, 0): 1.0}, Space((0, 1), 4))
    with pytest.raises(SpaceError):
        ModeLabel("D", 0, 0)


def test_state_vector_array_round_trip():
    space = Space((0, 1), 2)
    rng = np.random.default_rng(0)
    v = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    assert np.allclose(StateVector.from_array(space, v).to_array(), v)


def test_prune_and_normalize():
    s = StateVector({ModeLabel("H", 0, 0): 1e-16, ModeLabel("V", 0, 1): 3.0})
    assert list(s.amplitudes) == [ModeLabel("V", 0, 1)]
    assert s.normalize().norm == pytest.approx(1)
    with pytest.raises(ValueError):
        StateVector({}).normalize()


def test_state_json_round_trip():
    s = logical_to_physical(np.arange(8) + 1j)
    text = dumps(s.to_json())
    assert StateVector.from_json(json.loads(text)).isclose(s, atol=0)


def test_density_matrix_invariants():
    DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))


def test_density_matrix_json_round_trip():
    rho = DensityMatrix.from_pure(np.array([1, 1j, 0, 1]) / math.sqrt(3))
    back = DensityMatrix.from_json(json.loads(dumps(rho.to_json())))
    assert np.array_equal(back.entries, rho.entries)
    assert rho.purity == pytest.approx(1)
