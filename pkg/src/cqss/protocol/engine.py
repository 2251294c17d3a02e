"""Circular single-photon session engine.

Alice prepares one of |+z>, |-z>, |+x>, |-x>; the photon visits agents
0..N-1 in ring order and comes back to Alice unless an agent in control mode
measures it. Coding agents apply U_0 or U_1, and since U_1 flips the state in
both bases Alice's readout in her preparation basis equals her bit XOR every
agent's label.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..qstate import (
    X_BASIS,
    Z_BASIS,
    MeasBasis,
    PureState,
    UnitaryOp,
    apply,
    apply_batch,
    identity,
    measure,
    measure_batch,
)
from .config import ProtocolConfig, block_ranges, block_stream
from .transcript import Mode, SessionTranscript

U0 = UnitaryOp(identity(2).matrix, "U0")
U1 = UnitaryOp(np.array([[0, 1], [-1, 0]]), "U1")
CODING_OPS = (U0, U1)
BASES = (Z_BASIS, X_BASIS)

_CODE_STACK = np.stack([U0.matrix, U1.matrix])
_BASIS_STACK = np.stack([Z_BASIS.vectors, X_BASIS.vectors])


@dataclass(frozen=True)
class ControlResult:
    basis: MeasBasis
    outcome: int
    post_state: PureState


@dataclass(frozen=True)
class CodeResult:
    label: int
    new_state: PureState


def alice_prepare(rng: np.random.Generator) -> tuple[PureState, MeasBasis, int]:
    """Uniformly random BB84 state; bit 0 is the '+' state of the basis."""
    basis = BASES[int(rng.integers(2))]
    bit = int(rng.integers(2))
    return basis.state(bit), basis, bit


def agent_step(state: PureState, mode: Mode, rng: np.random.Generator, *,
               target: int = 0, label: int | None = None,
               basis: MeasBasis | None = None):
    """One agent's action on the photon subsystem ``target``.

    Control measures in a random basis (Z or X) unless ``basis`` is given;
    Code applies U_0/U_1 chosen at random unless ``label`` is given. Any other
    subsystems (e.g. an eavesdropper's ancilla) are left alone.
    """
    if Mode(mode) is Mode.CONTROL:
        if basis is None:
            basis = BASES[int(rng.integers(2))]
        outcome, post = measure(state, basis, target, rng)
        return ControlResult(basis, outcome, post)
    if label is None:
        label = int(rng.integers(2))
    return CodeResult(int(label), apply(CODING_OPS[label], state, [target]))


def _simulate_single(config: ProtocolConfig, attack, rng: np.random.Generator,
                     n: int) -> SessionTranscript:
    k = config.num_agents
    # every draw is made up front with a fixed shape so the stream layout
    # does not depend on which branches a round takes
    a_basis = rng.integers(0, 2, n, dtype=np.int8)
    a_bit = rng.integers(0, 2, n, dtype=np.int8)
    mode_u = rng.random((n, k))
    c_basis = rng.integers(0, 2, (n, k), dtype=np.int8)
    labels = rng.integers(0, 2, (n, k), dtype=np.int16)
    meas_u = rng.random((n, k + 2))

    t = SessionTranscript.empty(config, n, adversary=attack)
    t.alice_basis[:] = a_basis
    t.alice_bit[:] = a_bit

    photon = _BASIS_STACK[a_basis, :, a_bit]
    if attack is None:
        dims = (2,)
        states = photon.astype(complex)
    else:
        dims = (2, 2)  # photon, ancilla
        states = np.zeros((n, 4), dtype=complex)
        states[:, 0] = photon[:, 0]
        states[:, 2] = photon[:, 1]
        u_e = attack.unitary().matrix
        anc_basis = attack.ancilla_measurement.vectors
    alive = np.ones(n, dtype=bool)
    crossed = np.zeros(n, dtype=bool)

    for leg in range(k + 1):
        if attack is not None and leg == attack.intercept_leg:
            idx = np.flatnonzero(alive)
            states[idx] = apply_batch(u_e, states[idx], dims, [0, 1])
            crossed[idx] = True
        if leg == k:
            break
        i = leg
        idx = np.flatnonzero(alive)
        ctrl = mode_u[idx, i] < config.p_control
        t.mode[idx, i] = ctrl
        cidx = idx[ctrl]
        if cidx.size:
            outs, states[cidx] = measure_batch(states[cidx], dims, [0],
                                               _BASIS_STACK[c_basis[cidx, i]], meas_u[cidx, i])
            t.ctrl_basis[cidx, i] = c_basis[cidx, i]
            t.ctrl_outcome[cidx, i] = outs
            alive[cidx] = False
        kidx = idx[~ctrl]
        if kidx.size:
            states[kidx] = apply_batch(_CODE_STACK[labels[kidx, i]], states[kidx], dims, [0])
            t.label[kidx, i] = labels[kidx, i]

    ridx = np.flatnonzero(alive)
    if ridx.size:
        outs, states[ridx] = measure_batch(states[ridx], dims, [0],
                                           _BASIS_STACK[a_basis[ridx]], meas_u[ridx, k])
        t.alice_outcome[ridx] = outs
    if attack is not None:
        aidx = np.flatnonzero(crossed)
        if aidx.size:
            outs, _ = measure_batch(states[aidx], dims, [1], anc_basis, meas_u[aidx, k + 1])
            t.ancilla_outcome[aidx] = outs
    return t


def _block_simulator(config: ProtocolConfig):
    if config.variant.entangled:
        from ..epr_qudit import simulate_entangled_block

        return simulate_entangled_block
    return _simulate_single


def _check_attack(config: ProtocolConfig, attack):
    if attack is not None:
        attack.validate_for(config)


def run_round(config: ProtocolConfig, rng: np.random.Generator, adversary=None,
              round_id: int = 0):
    """Simulate a single round with ``rng`` and return its record."""
    _check_attack(config, adversary)
    t = _block_simulator(config)(config, adversary, rng, 1)
    return dataclasses.replace(t.record(0), round_id=round_id)


def run_session(config: ProtocolConfig, adversary=None,
                max_workers: Optional[int] = None) -> SessionTranscript:
    """Run ``config.rounds`` independent rounds.

    Rounds are grouped in fixed-size blocks, each with its own child stream
    of ``config.rng_seed``; blocks may run on a thread pool and the
    transcript is identical for any ``max_workers``.
    """
    _check_attack(config, adversary)
    sim = _block_simulator(config)

    def one(block):
        b, start, stop = block
        return sim(config, adversary, block_stream(config.rng_seed, b), stop - start)

    blocks = list(block_ranges(config.rounds))
    if max_workers and max_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    return SessionTranscript.concatenate(config, parts, adversary=adversary)
