"""Entangled-carrier variant: Bell states, dense coding and the d-level algebra.

Alice keeps particle H (subsystem 0) of a maximally entangled pair and sends
particle T (subsystem 1) around the ring. Coding agents act on T only; on
return Alice measures (H, T) in the Bell basis and reads off the combined
label of every agent.

Generalized Bell states are indexed by a phase n and a shift m,

    |Psi_nm> = sum_j exp(2 pi i j n / d) |j> |j + m mod d> / sqrt(d),

and are produced from |Psi_00> by ``I (x) U_nm`` exactly, with

    U_nm = sum_j exp(2 pi i j n / d) |j + m mod d><j|.

For d = 2 the four Bell states are phi+ = (0,0), phi- = (1,0), psi+ = (0,1)
and psi- = (1,1), without extra phases.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .protocol.config import ProtocolConfig, Variant, combine_digits
from .protocol.transcript import ABSENT, AgentEntry, Mode, SessionTranscript
from .qstate import (
    MeasBasis,
    PureState,
    UnitaryOp,
    apply,
    apply_batch,
    computational_basis,
    fourier_basis,
    measure,
    measure_batch,
    outcome_probabilities,
)

_QUBIT_BELL_NAMES = {
    (0, 0): "phi_plus",
    (1, 0): "phi_minus",
    (0, 1): "psi_plus",
    (1, 1): "psi_minus",
}
_QUBIT_BELL_PAIRS = {v: k for k, v in _QUBIT_BELL_NAMES.items()}


@dataclass(frozen=True)
class BellLabel:
    n: int
    m: int
    d: int = 2

    def __post_init__(self):
        if self.d < 2 or not (0 <= self.n < self.d and 0 <= self.m < self.d):
            raise ValueError(f"Bell label ({self.n}, {self.m}) out of range for d = {self.d}")

    @classmethod
    def named(cls, name: str) -> BellLabel:
        key = name.replace("-", "_").lower()
        if key not in _QUBIT_BELL_PAIRS:
            raise ValueError(f"unknown Bell state {name!r}")
        return cls(*_QUBIT_BELL_PAIRS[key], d=2)

    @classmethod
    def from_index(cls, index: int, d: int) -> BellLabel:
        return cls(*divmod(int(index), d), d=d)

    @property
    def index(self) -> int:
        return self.n * self.d + self.m

    @property
    def name(self) -> str:
        if self.d == 2:
            return _QUBIT_BELL_NAMES[(self.n, self.m)]
        return f"Psi_{self.n}{self.m}"


def _as_label(label: Union[BellLabel, str, tuple], d: Optional[int]) -> BellLabel:
    if isinstance(label, BellLabel):
        if d is not None and d != label.d:
            raise ValueError(f"label has d = {label.d}, requested d = {d}")
        return label
    if isinstance(label, str):
        if d not in (None, 2):
            raise ValueError("named Bell states exist only for d = 2")
        return BellLabel.named(label)
    n, m = label
    return BellLabel(n, m, 2 if d is None else d)


def bell_state(label: Union[BellLabel, str, tuple], d: Optional[int] = None) -> PureState:
    label = _as_label(label, d)
    d = label.d
    amps = np.zeros(d * d, dtype=complex)
    for j in range(d):
        amps[j * d + (j + label.m) % d] = np.exp(2j * np.pi * j * label.n / d)
    return PureState((d, d), amps / np.sqrt(d))


@functools.lru_cache(maxsize=None)
def bell_basis(d: int) -> MeasBasis:
    """Generalized Bell basis; column ``n * d + m`` is |Psi_nm>."""
    cols = [bell_state(BellLabel(n, m, d)).amplitudes for n in range(d) for m in range(d)]
    return MeasBasis("Bell", np.column_stack(cols))


def qudit_op(n: int, m: int, d: int) -> UnitaryOp:
    if d < 2 or not (0 <= n < d and 0 <= m < d):
        raise ValueError(f"U_nm indices ({n}, {m}) out of range for d = {d}")
    mat = np.zeros((d, d), dtype=complex)
    for j in range(d):
        mat[(j + m) % d, j] = np.exp(2j * np.pi * j * n / d)
    return UnitaryOp(mat, f"U_{n}{m}")


PAULI_CODING_OPS = (
    UnitaryOp(np.array([[1, 0], [0, 1]]), "U_L0"),    # I
    UnitaryOp(np.array([[0, 1], [-1, 0]]), "U_L1"),   # i sigma_y
    UnitaryOp(np.array([[0, 1], [1, 0]]), "U_L2"),    # sigma_x
    UnitaryOp(np.array([[1, 0], [0, -1]]), "U_L3"),   # sigma_z
)


def pauli_coding_op(label: Union[int, str]) -> UnitaryOp:
    """Dense-coding operation for a 2-bit label: 00, 01, 10, 11 -> U_L0..U_L3."""
    if isinstance(label, str):
        if len(label) != 2 or set(label) - {"0", "1"}:
            raise ValueError(f"label must be two bits, got {label!r}")
        label = int(label, 2)
    if not 0 <= int(label) < 4:
        raise ValueError(f"label {label} out of range")
    return PAULI_CODING_OPS[int(label)]


def code_to_pair(code: int) -> tuple[int, int]:
    """2-bit label b1 b0 -> (n, m) with U_L(code) equal to U_nm up to phase."""
    b1, b0 = divmod(int(code), 2)
    return b0, b1 ^ b0


def pair_to_code(n: int, m: int) -> int:
    return ((m ^ n) << 1) | n


def coding_op(variant: Variant, digit: int) -> UnitaryOp:
    """Operator an agent applies for key digit ``digit`` in this variant."""
    if variant.kind == "epr":
        return pauli_coding_op(digit)
    if variant.kind == "qudit":
        return qudit_op(*divmod(int(digit), variant.d), variant.d)
    raise ValueError("coding_op is defined for entangled variants only")


def reference_label(variant: Variant) -> BellLabel:
    """State Alice prepares: psi- for EPR pairs, Psi_00 for qudits."""
    if variant.kind == "epr":
        return BellLabel.named("psi_minus")
    return BellLabel(0, 0, variant.d)


def digit_to_pair(variant: Variant, digit: int) -> tuple[int, int]:
    if variant.kind == "epr":
        return code_to_pair(digit)
    return divmod(int(digit), variant.d)


def pair_to_digit(variant: Variant, n: int, m: int) -> int:
    if variant.kind == "epr":
        return pair_to_code(n, m)
    return n * variant.d + m


def encode_labels(variant: Variant, digits: Sequence[int]) -> PureState:
    """Reference pair after each agent in turn codes particle T."""
    state = bell_state(reference_label(variant))
    for digit in digits:
        state = apply(coding_op(variant, digit), state, [1])
    return state


def decode_bell_outcome(variant: Variant, outcome: BellLabel) -> int:
    """Combined agent digit from Alice's Bell outcome, relative to her reference."""
    ref = reference_label(variant)
    d = variant.d
    return pair_to_digit(variant, (outcome.n - ref.n) % d, (outcome.m - ref.m) % d)


def decode_bell_indices(variant: Variant, indices) -> np.ndarray:
    table = np.array([decode_bell_outcome(variant, BellLabel.from_index(i, variant.d))
                      for i in range(variant.d ** 2)])
    indices = np.asarray(indices)
    out = np.full(indices.shape, ABSENT, dtype=np.int64)
    ok = indices != ABSENT
    out[ok] = table[indices[ok]]
    return out


def bell_measure(state: PureState, d: int, rng: np.random.Generator,
                 targets: Sequence[int] = (0, 1)) -> tuple[BellLabel, PureState]:
    if tuple(state.dims[t] for t in targets) != (d, d):
        raise ValueError(f"state dims {state.dims} do not match a d = {d} pair on {targets}")
    outcome, post = measure(state, bell_basis(d), list(targets), rng)
    return BellLabel.from_index(outcome, d), post


def bell_probabilities(state: PureState, d: int) -> np.ndarray:
    return outcome_probabilities(state, bell_basis(d), [0, 1])


def channel_capacity(p: int, q: int) -> float:
    """Bits carried per round by a p x q dimensional pair: log2(p q)."""
    if p < 2 or q < 2:
        raise ValueError("both dimensions must be >= 2")
    return math.log2(p * q)


def control_bases(d: int) -> tuple[MeasBasis, MeasBasis]:
    return computational_basis(d), fourier_basis(d)


def control_basis_names(d: int) -> tuple[str, str]:
    return tuple(b.label for b in control_bases(d))


@functools.lru_cache(maxsize=None)
def control_support(variant: Variant) -> np.ndarray:
    """Outcome pairs an honest control check can produce.

    Entry ``[c, b, h, t]`` is True when, after upstream agents combined to
    digit ``c``, measuring H and T both in control basis ``b`` can yield
    ``(h, t)``. Any other pair is an error.
    """
    d = variant.d
    out = np.zeros((d * d, 2, d, d), dtype=bool)
    for c in range(d * d):
        state = encode_labels(variant, [c])
        for b, basis in enumerate(control_bases(d)):
            joint = MeasBasis("joint", np.kron(basis.vectors, basis.vectors))
            probs = outcome_probabilities(state, joint, [0, 1]).reshape(d, d)
            out[c, b] = probs > 1e-9
    return out


def dense_coding_check(variant: Variant = Variant("epr")) -> dict:
    """Every ordered pair of coding digits must decode to their combination.

    Two agents code in turn; Alice's Bell readout has to be deterministic
    and decode to the group combination of both digits.
    """
    base = variant.digit_base
    failures = []
    for i in range(base):
        for j in range(base):
            probs = bell_probabilities(encode_labels(variant, [i, j]), variant.d)
            k = int(np.argmax(probs))
            got = decode_bell_outcome(variant, BellLabel.from_index(k, variant.d))
            want = int(combine_digits(i, j, base))
            if probs[k] < 1.0 - 1e-12 or got != want:
                failures.append([i, j])
    return {"variant": str(variant), "pairs": base * base, "failures": failures}


def qudit_algebra_check(d: int) -> dict:
    """Exhaustive U_nm composition law and (I (x) U_nm)|Psi_00> = |Psi_nm>."""
    ops = {(n, m): qudit_op(n, m, d) for n in range(d) for m in range(d)}
    composition_failures = []
    for (n, m), a in ops.items():
        for (n2, m2), b in ops.items():
            prod = (b @ a).matrix
            want = ops[(n + n2) % d, (m + m2) % d].matrix
            # proportional up to a unit phase iff |tr(want^dag prod)| = d
            overlap = np.trace(want.conj().T @ prod)
            if abs(abs(overlap) - d) > 1e-10 or \
                    np.max(np.abs(prod - overlap / d * want)) > 1e-10:
                composition_failures.append([n, m, n2, m2])
    root = bell_state(BellLabel(0, 0, d))
    mapping_failures = []
    for (n, m), op in ops.items():
        got = apply(op, root, [1]).amplitudes
        if np.max(np.abs(got - bell_state(BellLabel(n, m, d)).amplitudes)) > 1e-12:
            mapping_failures.append([n, m])
    return {
        "d": d,
        "compositions": d ** 4,
        "composition_failures": composition_failures,
        "bell_states": d * d,
        "mapping_failures": mapping_failures,
    }


@functools.lru_cache(maxsize=None)
def _coding_stack(variant: Variant) -> np.ndarray:
    return np.stack([coding_op(variant, c).matrix for c in range(variant.digit_base)])


@functools.lru_cache(maxsize=None)
def _control_basis_stack(d: int) -> np.ndarray:
    return np.stack([b.vectors for b in control_bases(d)])


def simulate_entangled_block(config: ProtocolConfig, attack, rng: np.random.Generator,
                             n: int) -> SessionTranscript:
    variant = config.variant
    d = variant.d
    k = config.num_agents
    mode_u = rng.random((n, k))
    c_basis = rng.integers(0, 2, (n, k), dtype=np.int8)
    labels = rng.integers(0, variant.digit_base, (n, k), dtype=np.int16)
    # columns: agents' control readouts, Alice's control readout, Bell readout, ancilla
    meas_u = rng.random((n, k + 3))

    t = SessionTranscript.empty(config, n, adversary=attack)
    ref = bell_state(reference_label(variant)).amplitudes
    if attack is None:
        dims = (d, d)
        states = np.tile(ref, (n, 1))
    else:
        dims = (2, 2, 2)  # H, T, ancilla
        states = np.tile(np.kron(ref, [1.0, 0.0]), (n, 1))
        u_e = attack.unitary().matrix
    ops = _coding_stack(variant)
    bases = _control_basis_stack(d)
    alive = np.ones(n, dtype=bool)
    crossed = np.zeros(n, dtype=bool)

    for leg in range(k + 1):
        if attack is not None and leg == attack.intercept_leg:
            idx = np.flatnonzero(alive)
            states[idx] = apply_batch(u_e, states[idx], dims, [1, 2])
            crossed[idx] = True
        if leg == k:
            break
        i = leg
        idx = np.flatnonzero(alive)
        ctrl = mode_u[idx, i] < config.p_control
        t.mode[idx, i] = ctrl
        cidx = idx[ctrl]
        if cidx.size:
            b = bases[c_basis[cidx, i]]
            outs_t, states[cidx] = measure_batch(states[cidx], dims, [1], b, meas_u[cidx, i])
            outs_h, states[cidx] = measure_batch(states[cidx], dims, [0], b, meas_u[cidx, k])
            t.ctrl_basis[cidx, i] = c_basis[cidx, i]
            t.ctrl_outcome[cidx, i] = outs_t
            t.alice_control_outcome[cidx] = outs_h
            alive[cidx] = False
        kidx = idx[~ctrl]
        if kidx.size:
            states[kidx] = apply_batch(ops[labels[kidx, i]], states[kidx], dims, [1])
            t.label[kidx, i] = labels[kidx, i]

    ridx = np.flatnonzero(alive)
    if ridx.size:
        outs, states[ridx] = measure_batch(states[ridx], dims, [0, 1], bell_basis(d).vectors,
                                           meas_u[ridx, k + 1])
        t.alice_outcome[ridx] = outs
    if attack is not None:
        aidx = np.flatnonzero(crossed)
        if aidx.size:
            outs, _ = measure_batch(states[aidx], dims, [2], attack.ancilla_measurement.vectors,
                                    meas_u[aidx, k + 2])
            t.ancilla_outcome[aidx] = outs
    return t


def run_epr_session(config: ProtocolConfig, adversary=None,
                    max_workers: Optional[int] = None) -> SessionTranscript:
    if not config.variant.entangled:
        raise ValueError(f"variant {config.variant} is not entangled")
    from .protocol.engine import run_session

    return run_session(config, adversary, max_workers=max_workers)


@dataclass(frozen=True)
class EprRoundRecord:
    round_id: int
    agents: tuple[AgentEntry, ...]
    returned: bool
    alice_bell_outcome: Optional[BellLabel] = None
    alice_control_outcome: Optional[int] = None
    ancilla_outcome: Optional[int] = None


def format_digit(variant: Variant, digit: int):
    """Transcript rendering of a coding digit: '01' for EPR, [n, m] for qudits."""
    if variant.kind == "epr":
        return format(int(digit), "02b")
    return list(divmod(int(digit), variant.d))


def parse_digit(variant: Variant, value) -> int:
    if variant.kind == "epr":
        return int(value, 2)
    n, m = value
    return int(n) * variant.d + int(m)


def epr_record_from_transcript(t: SessionTranscript, r: int) -> EprRoundRecord:
    variant = t.config.variant
    names = control_basis_names(variant.d)
    agents = []
    for i in range(t.config.num_agents):
        mode = int(t.mode[r, i])
        if mode == ABSENT:
            break
        if mode == Mode.CODE:
            digit = int(t.label[r, i])
            label = digit if variant.kind == "epr" else digit_to_pair(variant, digit)
            agents.append(AgentEntry(Mode.CODE, coding_label=label))
        else:
            agents.append(AgentEntry(Mode.CONTROL, control_basis=names[t.ctrl_basis[r, i]],
                                     control_outcome=int(t.ctrl_outcome[r, i])))
    out = int(t.alice_outcome[r])
    ctrl = int(t.alice_control_outcome[r])
    anc = int(t.ancilla_outcome[r])
    return EprRoundRecord(
        round_id=r,
        agents=tuple(agents),
        returned=out != ABSENT,
        alice_bell_outcome=None if out == ABSENT else BellLabel.from_index(out, variant.d),
        alice_control_outcome=None if ctrl == ABSENT else ctrl,
        ancilla_outcome=None if anc == ABSENT else anc,
    )


__all__ = [
    "BellLabel", "EprRoundRecord", "PAULI_CODING_OPS", "bell_basis", "bell_measure",
    "bell_probabilities", "bell_state", "channel_capacity", "code_to_pair", "coding_op",
    "control_support", "decode_bell_outcome", "dense_coding_check", "encode_labels", "pair_to_code",
    "pauli_coding_op", "qudit_algebra_check", "qudit_op", "reference_label", "run_epr_session",
]
