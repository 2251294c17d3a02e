"""Individual entangling attack and its closed-form security quantities.

The attacker couples the travelling photon to a private ancilla prepared in
|0> with

    U_E |0>|0> = |0>|0>
    U_E |1>|0> = cos(phi) |1>|0> + sin(phi) |0>|1>

and measures the ancilla later. ``phi`` in [0, pi/4] sets the strength. On
Z-basis checks the attack flips the photon with probability sin(phi)^2 / 2,
and the ancilla, after the photon is traced out and the result dephased in
{|0>, |1>}, is diag((1 + cos^2 phi) / 2, sin^2 phi / 2) whatever the
downstream agent's coding. Its entropy is the binary entropy of the Z-basis
error rate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .protocol.config import ProtocolConfig
from .protocol.engine import CODING_OPS, U0, U1, run_session
from .protocol.sampling import BASIS_X, BASIS_Z, SampleReport, alice_digits, check_samples
from .protocol.transcript import ABSENT, SessionTranscript
from .qstate import (
    X_BASIS,
    Z_BASIS,
    DensityMatrix,
    MeasBasis,
    UnitaryOp,
    apply,
    density_from_pure,
    entropy_of_probabilities,
    ket,
    mix,
    partial_trace,
    tensor,
)

PHI_MAX = math.pi / 4
_ANCILLA_BASES = {"Z": Z_BASIS, "X": X_BASIS}


@dataclass(frozen=True)
class AttackConfig:
    """Where and how hard the dishonest party attacks.

    Legs are numbered by the node that sends on them: leg 0 carries the
    photon from Alice to agent 0, leg i from agent i-1 to agent i, and leg N
    from the last agent back to Alice. By default the dishonest agent attacks
    its own outgoing leg, i.e. the photon on its way to the next agent.
    """

    phi: float
    adversary_agent: Optional[int] = 0
    intercept_leg: Optional[int] = None
    ancilla_basis: str = "Z"

    def __post_init__(self):
        if not 0.0 <= self.phi <= PHI_MAX + 1e-12:
            raise ValueError(f"attack strength phi must lie in [0, pi/4], got {self.phi}")
        if self.ancilla_basis not in _ANCILLA_BASES:
            raise ValueError(f"ancilla basis must be one of {sorted(_ANCILLA_BASES)}")
        if self.intercept_leg is None:
            leg = 0 if self.adversary_agent is None else self.adversary_agent + 1
            object.__setattr__(self, "intercept_leg", leg)

    @property
    def ancilla_measurement(self) -> MeasBasis:
        return _ANCILLA_BASES[self.ancilla_basis]

    def unitary(self) -> UnitaryOp:
        return attack_unitary(self.phi)

    def validate_for(self, config: ProtocolConfig) -> None:
        n = config.num_agents
        if not 0 <= self.intercept_leg <= n:
            raise ValueError(f"leg {self.intercept_leg} does not exist in a ring of {n} agents")
        if self.adversary_agent is not None and not 0 <= self.adversary_agent < n:
            raise ValueError(f"agent {self.adversary_agent} does not exist")
        if config.variant.entangled and config.variant.d != 2:
            raise ValueError("attacks on the entangled variant are modelled for d = 2 only")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> AttackConfig:
        return cls(**obj)


def attack_unitary(phi: float) -> UnitaryOp:
    """U_E on photon (x) ancilla, completed on the ancilla-|1> sector.

    Only the ancilla-|0> columns matter physically; the other two columns
    apply the opposite rotation so the matrix is real orthogonal.
    """
    c, s = math.cos(phi), math.sin(phi)
    # basis order |00>, |01>, |10>, |11> with the photon first
    mat = np.array([
        [1, 0, 0, 0],
        [0, c, s, 0],
        [0, -s, c, 0],
        [0, 0, 0, 1],
    ], dtype=complex)
    return UnitaryOp(mat, "U_E")


def detection_rate(phi: float) -> float:
    """Error rate on Z-basis checks downstream of the attack: sin^2(phi) / 2."""
    return 0.5 * math.sin(phi) ** 2


def x_basis_error_rate(phi: float) -> float:
    return (1.0 - math.cos(phi)) / 2.0


def all_states_error_rate(phi: float) -> float:
    """Error rate averaged over all four preparations (Z and X equally likely)."""
    return (math.sin(phi) ** 2 + 1.0 - math.cos(phi)) / 4.0


def binary_entropy(p: float) -> float:
    return entropy_of_probabilities([p, 1.0 - p])


def source_state() -> DensityMatrix:
    """Alice's photon as seen by the attacker when she prepares in Z."""
    return mix([(0.5, ket("+z")), (0.5, ket("-z"))])


def joint_state_after_coding(phi: float, p_c0: float) -> DensityMatrix:
    """Photon (x) ancilla after the attack and the downstream agent's coding.

    Built by propagating each Z preparation through U_E and then U_0 / U_1
    with probabilities ``p_c0`` / ``1 - p_c0``.
    """
    if not 0.0 <= p_c0 <= 1.0:
        raise ValueError("p_c0 must be a probability")
    u_e = attack_unitary(phi)
    entries = []
    for bit in (0, 1):
        attacked = apply(u_e, tensor(ket(bit), ket(0)), [0, 1])
        for op, p in ((U0, p_c0), (U1, 1.0 - p_c0)):
            if p > 0.0:
                entries.append((0.5 * p, density_from_pure(apply(op, attacked, [0]))))
    return mix(entries)


def ancilla_state(phi: float, p_c0: float = 0.5) -> DensityMatrix:
    return partial_trace(joint_state_after_coding(phi, p_c0), keep=[1])


def projected_ancilla_state(phi: float, p_c0: float = 0.5,
                            basis: MeasBasis = Z_BASIS) -> DensityMatrix:
    """Ancilla state dephased in ``basis`` (what a projective readout sees)."""
    rho = ancilla_state(phi, p_c0).matrix
    out = np.zeros((2, 2), dtype=complex)
    for k in range(2):
        v = basis.vectors[:, k]
        proj = np.outer(v, v.conj())
        out += proj @ rho @ proj
    return DensityMatrix((2,), out)


def ancilla_eigenvalues(phi: float) -> tuple[float, float]:
    return 0.5 * (1.0 + math.cos(phi) ** 2), 0.5 * math.sin(phi) ** 2


def eve_information(phi: float) -> float:
    """Attacker's information in bits: binary entropy of the Z-basis error rate."""
    return binary_entropy(detection_rate(phi))


def eve_information_cos_form(phi: float) -> float:
    """Same quantity written directly in phi (0 log 0 taken as 0)."""
    c2 = math.cos(phi) ** 2
    s2 = math.sin(phi) ** 2

    def xlog(x):
        return x * math.log2(x) if x > 0 else 0.0

    return 1.0 - 0.5 * (xlog(1.0 + c2) + xlog(s2))


def averaged_leg_state(coding_probs: Sequence[tuple[float, float]] = ()) -> DensityMatrix:
    """Photon on a leg, averaged over Alice's four states and upstream coding.

    ``coding_probs[i] = (P_0, P_1)`` is the probability that upstream agent i
    applied U_0 / U_1. This is what a dishonest downstream agent receives.
    """
    preps = [ket(s) for s in ("+z", "-z", "+x", "-x")]
    entries = []
    for labels in itertools.product((0, 1), repeat=len(coding_probs)):
        weight = float(np.prod([coding_probs[i][b] for i, b in enumerate(labels)]))
        if weight == 0.0:
            continue
        for prep in preps:
            state = prep
            for b in labels:
                state = apply(CODING_OPS[b], state, [0])
            entries.append((0.25 * weight, state))
    total = sum(w for w, _ in entries)
    return mix([(w / total, s) for w, s in entries])


def plugin_mutual_information(x, y) -> tuple[float, float]:
    """Plug-in estimate of I(X;Y) in bits with a delta-method standard error."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n = x.size
    if n == 0:
        return 0.0, 0.0
    pairs, inverse, counts = np.unique(np.stack([x, y], axis=1), axis=0,
                                       return_inverse=True, return_counts=True)
    inverse = np.ravel(inverse)
    p_xy = counts / n
    _, xi, xc = np.unique(x, return_inverse=True, return_counts=True)
    _, yi, yc = np.unique(y, return_inverse=True, return_counts=True)
    px = (xc / n)[np.ravel(xi)]
    py = (yc / n)[np.ravel(yi)]
    pmi = np.log2(p_xy[inverse] / (px * py))
    mi = max(float(np.mean(pmi)), 0.0)
    var = max(float(np.mean(pmi ** 2)) - float(np.mean(pmi)) ** 2, 0.0)
    return mi, math.sqrt(var / n)


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    """What one attacked session revealed, to the attacker and to the checkers.

    ``eve_guesses`` holds the attacker's guess for the target digit on every
    round in ``guess_rounds``; the target is the coding label of the agent
    the intercepted leg leads to (Alice's key digit for the last leg). The
    guess rule is simply the ancilla readout.
    """

    phi: float
    intercept_leg: int
    ancilla_outcomes: np.ndarray
    guess_rounds: np.ndarray
    eve_guesses: np.ndarray
    guess_targets: np.ndarray
    z_conclusive: int
    z_errors: int
    x_conclusive: int
    x_errors: int
    mutual_information: float
    mutual_information_stderr: float

    @property
    def detection_rate(self) -> float:
        return self.z_errors / self.z_conclusive if self.z_conclusive else 0.0

    @property
    def detection_stderr(self) -> float:
        p = self.detection_rate
        return math.sqrt(p * (1 - p) / self.z_conclusive) if self.z_conclusive else 0.0

    @property
    def x_error_rate(self) -> float:
        return self.x_errors / self.x_conclusive if self.x_conclusive else 0.0

    @property
    def all_error_rate(self) -> float:
        n = self.z_conclusive + self.x_conclusive
        return (self.z_errors + self.x_errors) / n if n else 0.0


def analyze_attack(t: SessionTranscript, report: SampleReport | None = None) -> AttackOutcome:
    """Score an attacked transcript.

    Detection uses every conclusive check downstream of the intercepted leg:
    control checks of agents the photon reaches after the leg and the s2
    checks of returned photons, which Alice measures after every leg.
    """
    attack = t.adversary
    if attack is None:
        raise ValueError("transcript has no adversary")
    report = check_samples(t) if report is None else report
    leg = attack.intercept_leg
    counts = np.zeros((2, 2), dtype=np.int64)  # [basis, (conclusive, errors)]
    samples = [s for s in report.s1 if s.agent >= leg] + [report.s2]
    for s in samples:
        for b in (BASIS_Z, BASIS_X):
            counts[b] += s.counts_in_basis(b)

    if leg < t.config.num_agents:
        target = t.label[:, leg].astype(np.int64)
    else:
        target = alice_digits(t)
    rounds = np.flatnonzero((t.ancilla_outcome != ABSENT) & (target != ABSENT))
    guesses = t.ancilla_outcome[rounds].astype(np.int64)
    targets = target[rounds]
    mi, mi_se = plugin_mutual_information(guesses, targets)
    return AttackOutcome(
        phi=attack.phi,
        intercept_leg=leg,
        ancilla_outcomes=t.ancilla_outcome.copy(),
        guess_rounds=rounds,
        eve_guesses=guesses,
        guess_targets=targets,
        z_conclusive=int(counts[BASIS_Z, 0]),
        z_errors=int(counts[BASIS_Z, 1]),
        x_conclusive=int(counts[BASIS_X, 0]),
        x_errors=int(counts[BASIS_X, 1]),
        mutual_information=mi,
        mutual_information_stderr=mi_se,
    )


def simulate_attack(config: ProtocolConfig, attack: AttackConfig,
                    max_workers: Optional[int] = None) -> tuple[SessionTranscript, AttackOutcome]:
    t = run_session(config, attack, max_workers=max_workers)
    return t, analyze_attack(t)
