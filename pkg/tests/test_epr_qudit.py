import itertools
import math

import numpy as np
import pytest

from cqss.epr_qudit import (
    PAULI_CODING_OPS,
    BellLabel,
    bell_basis,
    bell_measure,
    bell_probabilities,
    bell_state,
    channel_capacity,
    code_to_pair,
    control_support,
    decode_bell_outcome,
    dense_coding_check,
    encode_labels,
    pair_to_code,
    pauli_coding_op,
    qudit_algebra_check,
    qudit_op,
    reference_label,
    run_epr_session,
)
from cqss.protocol import Mode, ProtocolConfig, Variant, check_samples, sift_keys
from cqss.protocol.config import combine_digits
from cqss.qstate import PureState, apply, states_equal_up_to_phase, tensor, ket
from oracles import ISY, PHI_MINUS, PHI_PLUS, PSI_MINUS, PSI_PLUS, SX, SZ, on_t

EPR = Variant("epr")


# Bell states

def test_bell_state_examples():
    for d in (2, 3, 5):
        amps = np.zeros(d * d)
        amps[[j * d + j for j in range(d)]] = 1 / math.sqrt(d)
        assert np.allclose(bell_state((0, 0), d).amplitudes, amps)
    assert np.allclose(bell_state("psi_minus").amplitudes, PSI_MINUS)
    assert np.allclose(bell_state("psi_plus").amplitudes, PSI_PLUS)
    assert np.allclose(bell_state("phi_minus").amplitudes, PHI_MINUS)
    assert np.allclose(bell_state("phi_plus").amplitudes, PHI_PLUS)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_bell_basis_orthonormal_and_complete(d):
    v = bell_basis(d).vectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(d * d))) < 1e-10
    assert np.max(np.abs(v @ v.conj().T - np.eye(d * d))) < 1e-10


def test_bell_label_validation_and_names():
    with pytest.raises(ValueError):
        BellLabel(3, 0, 3)
    with pytest.raises(ValueError):
        BellLabel.named("ghz")
    assert BellLabel.named("psi-minus") == BellLabel(1, 1)
    assert BellLabel.from_index(BellLabel(2, 1, 3).index, 3) == BellLabel(2, 1, 3)
    assert BellLabel(1, 2, 3).name == "Psi_12"


# operators

def test_qudit_op_identity_and_range():
    for d in (2, 3, 5):
        assert np.allclose(qudit_op(0, 0, d).matrix, np.eye(d))
    with pytest.raises(ValueError):
        qudit_op(3, 0, 3)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_qudit_algebra_exhaustive(d):
    r = qudit_algebra_check(d)
    assert r["composition_failures"] == [] and r["compositions"] == d ** 4
    assert r["mapping_failures"] == [] and r["bell_states"] == d * d


@pytest.mark.parametrize("d", [2, 3, 5])
def test_qudit_composition_by_brute_force(d):
    # independent of the library check: build U_nm by hand
    def u(n, m):
        mat = np.zeros((d, d), dtype=complex)
        for j in range(d):
            mat[(j + m) % d, j] = np.exp(2j * np.pi * j * n / d)
        return mat

    for n, m, n2, m2 in itertools.product(range(d), repeat=4):
        prod = qudit_op(n2, m2, d).matrix @ qudit_op(n, m, d).matrix
        want = u((n + n2) % d, (m + m2) % d)
        k = np.argmax(np.abs(want.ravel()))
        phase = prod.ravel()[k] / want.ravel()[k]
        assert abs(abs(phase) - 1) < 1e-12
        assert np.allclose(prod, phase * want, atol=1e-12)


def test_pauli_coding_ops_literal():
    assert np.array_equal(PAULI_CODING_OPS[0].matrix, np.eye(2))
    assert np.array_equal(PAULI_CODING_OPS[1].matrix, ISY)
    assert np.array_equal(PAULI_CODING_OPS[2].matrix, SX)
    assert np.array_equal(PAULI_CODING_OPS[3].matrix, SZ)
    assert pauli_coding_op("10") is PAULI_CODING_OPS[2]
    for bad in ("2", "012", 4):
        with pytest.raises(ValueError):
            pauli_coding_op(bad)


def test_pauli_examples():
    assert np.allclose(on_t(pauli_coding_op(1).matrix, PSI_PLUS), PHI_MINUS)
    assert np.allclose(on_t(pauli_coding_op(2).matrix, PHI_PLUS), PSI_PLUS)


def test_pauli_label_algebra_is_xor():
    for a, b in itertools.product(range(4), repeat=2):
        prod = pauli_coding_op(a).matrix @ pauli_coding_op(b).matrix
        want = pauli_coding_op(a ^ b).matrix
        overlap = np.trace(want.conj().T @ prod) / 2
        assert abs(abs(overlap) - 1) < 1e-12


def test_code_pair_maps_are_inverse_and_match_operators():
    for code in range(4):
        n, m = code_to_pair(code)
        assert pair_to_code(n, m) == code
        u_nm = qudit_op(n, m, 2).matrix
        overlap = np.trace(u_nm.conj().T @ pauli_coding_op(code).matrix) / 2
        assert abs(abs(overlap) - 1) < 1e-12


# measurement

def test_bell_measure_examples():
    rng = np.random.default_rng(0)
    for _ in range(10):
        label, _ = bell_measure(bell_state((1, 2), 3), 3, rng)
        assert label == BellLabel(1, 2, 3)
    s = apply(pauli_coding_op(3), bell_state("psi_minus"), [1])
    assert bell_measure(s, 2, rng)[0] == BellLabel.named("psi_plus")
    p = bell_probabilities(tensor(ket(0), ket(0)), 2)
    assert np.allclose(p, [0.5, 0, 0.5, 0])  # phi+ = (0,0) index 0, phi- = (1,0) index 2
    with pytest.raises(ValueError):
        bell_measure(bell_state((0, 0), 3), 2, rng)


def test_bell_measure_product_state_statistics():
    rng = np.random.default_rng(5)
    s = tensor(ket(0), ket(0))
    names = [bell_measure(s, 2, rng)[0].name for _ in range(4000)]
    assert set(names) == {"phi_plus", "phi_minus"}
    assert abs(names.count("phi_plus") / 4000 - 0.5) < 0.03


# dense coding

def test_dense_coding_all_sixteen_pairs():
    r = dense_coding_check()
    assert r["pairs"] == 16 and r["failures"] == []


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("agents", [1, 2, 3])
def test_dense_coding_round_trip_exhaustive(d, agents):
    variant = Variant("qudit", d)
    base = d * d
    for labels in itertools.product(range(base), repeat=agents):
        probs = bell_probabilities(encode_labels(variant, labels), d)
        k = int(np.argmax(probs))
        assert probs[k] > 1 - 1e-12
        got = decode_bell_outcome(variant, BellLabel.from_index(k, d))
        want = 0
        for x in labels:
            want = int(combine_digits(want, x, base))
        assert got == want


def test_epr_decoding_of_all_label_pairs_relative_to_singlet():
    assert reference_label(EPR) == BellLabel.named("psi_minus")
    for b, c in itertools.product(range(4), repeat=2):
        s = encode_labels(EPR, [b, c])
        k = int(np.argmax(bell_probabilities(s, 2)))
        assert decode_bell_outcome(EPR, BellLabel.from_index(k, 2)) == b ^ c


@pytest.mark.parametrize("state,op,want,sign", [
    # I (x) U_L0
    (PSI_PLUS, 0, PSI_PLUS, 1), (PSI_MINUS, 0, PSI_MINUS, 1),
    (PHI_PLUS, 0, PHI_PLUS, 1), (PHI_MINUS, 0, PHI_MINUS, 1),
    # I (x) U_L1: psi+- -> phi-+, phi+- -> -psi-+
    (PSI_PLUS, 1, PHI_MINUS, 1), (PSI_MINUS, 1, PHI_PLUS, 1),
    (PHI_PLUS, 1, PSI_MINUS, -1), (PHI_MINUS, 1, PSI_PLUS, -1),
    # I (x) U_L2: psi+- -> phi+-, phi+- -> psi+-
    (PSI_PLUS, 2, PHI_PLUS, 1), (PSI_MINUS, 2, PHI_MINUS, 1),
    (PHI_PLUS, 2, PSI_PLUS, 1), (PHI_MINUS, 2, PSI_MINUS, 1),
    # I (x) U_L3: psi+- -> -psi-+, phi+- -> phi-+
    (PSI_PLUS, 3, PSI_MINUS, -1), (PSI_MINUS, 3, PSI_PLUS, -1),
    (PHI_PLUS, 3, PHI_MINUS, 1), (PHI_MINUS, 3, PHI_PLUS, 1),
])
def test_transformation_table_with_signs(state, op, want, sign):
    s = PureState((2, 2), state)
    out = apply(pauli_coding_op(op), s, [1]).amplitudes
    assert np.allclose(out, sign * want, atol=1e-15)


def test_channel_capacity():
    assert channel_capacity(2, 2) == 2.0
    assert channel_capacity(3, 3) == pytest.approx(2 * math.log2(3))
    assert channel_capacity(2, 4) == 3.0
    with pytest.raises(ValueError):
        channel_capacity(1, 4)


# control checks

def test_singlet_control_support_is_anticorrelated():
    sup = control_support(EPR)
    # no upstream coding: Z and X outcomes on H and T always differ
    for b in (0, 1):
        assert sup[0, b].tolist() == [[False, True], [True, False]]


@pytest.mark.parametrize("d", [3, 5])
def test_qudit_control_support_is_a_permutation(d):
    # for a maximally entangled pair each H outcome fixes the T outcome
    sup = control_support(Variant("qudit", d))
    assert np.all(sup.sum(axis=-1) == 1)


def test_session_control_rounds_anticorrelated():
    t = run_epr_session(ProtocolConfig(num_agents=1, rounds=20_000, p_control=0.5, rng_seed=2,
                                       variant="epr"))
    ctrl = t.mode[:, 0] == Mode.CONTROL
    assert np.all(t.ctrl_outcome[ctrl, 0] ^ t.alice_control_outcome[ctrl] == 1)
    assert set(np.unique(t.ctrl_basis[ctrl, 0])) == {0, 1}


def test_epr_session_keys_and_records():
    cfg = ProtocolConfig(num_agents=2, rounds=5000, rng_seed=3, variant="epr")
    t = run_epr_session(cfg)
    report = check_samples(t)
    keys = sift_keys(t, report)
    assert keys.digit_base == 4 and keys.consistent()
    assert np.array_equal(keys.k_alice, keys.k_agent[0] ^ keys.k_agent[1])
    for rec in t.records[:200]:
        assert (rec.alice_bell_outcome is not None) == rec.returned
        if rec.returned:
            assert all(a.mode == Mode.CODE for a in rec.agents)


def test_qudit_session_decodes_componentwise_sum():
    cfg = ProtocolConfig(num_agents=3, rounds=5000, rng_seed=4, variant="qudit:3")
    t = run_epr_session(cfg)
    keys = sift_keys(t, check_samples(t))
    n = sum(keys.k_agent // 3) % 3
    m = sum(keys.k_agent % 3) % 3
    assert np.array_equal(keys.k_alice, n * 3 + m)
    rec = next(r for r in t.records if r.returned)
    assert all(isinstance(a.coding_label, tuple) for a in rec.agents)


def test_run_epr_session_requires_entangled_variant():
    with pytest.raises(ValueError):
        run_epr_session(ProtocolConfig(rounds=10))


def test_singlet_reference_differs_from_root_state():
    assert not states_equal_up_to_phase(bell_state("psi_minus"), bell_state((0, 0), 2))
