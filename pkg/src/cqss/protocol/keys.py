"""Key sifting, key-agreement verification and one-time-pad secret splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import combine_digits, inverse_digits, reduce_digits
from .sampling import SampleReport, alice_digits
from .transcript import SessionTranscript


class KeyLengthError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    """Sifted key digits: Alice's K_A and one string per agent.

    ``k_agent`` has shape (num_agents, length). In a noiseless session
    ``K_A`` equals the group combination of all agent strings.
    """

    positions: np.ndarray
    k_alice: np.ndarray
    k_agent: np.ndarray
    digit_base: int

    def __post_init__(self):
        if self.k_agent.ndim != 2 or self.k_agent.shape[1] != self.k_alice.size:
            raise ValueError("agent keys must be (num_agents, key_length)")
        if self.positions.size != self.k_alice.size:
            raise ValueError("one position per key digit is required")

    def __len__(self) -> int:
        return int(self.k_alice.size)

    @property
    def empty(self) -> bool:
        return len(self) == 0

    @property
    def num_agents(self) -> int:
        return self.k_agent.shape[0]

    def combined_agents(self, agents: Sequence[int] | None = None) -> np.ndarray:
        agents = range(self.num_agents) if agents is None else list(agents)
        return reduce_digits(self.k_agent[list(agents)], self.digit_base, axis=0)

    def consistent(self) -> bool:
        return bool(np.array_equal(self.k_alice, self.combined_agents()))

    def drop(self, idx) -> KeyMaterial:
        """Key with the digits at index positions ``idx`` removed."""
        keep = np.ones(len(self), dtype=bool)
        keep[np.asarray(idx, dtype=np.int64)] = False
        return KeyMaterial(self.positions[keep], self.k_alice[keep],
                           self.k_agent[:, keep], self.digit_base)

    def to_json(self) -> dict:
        return {
            "digit_base": self.digit_base,
            "length": len(self),
            "positions": self.positions.tolist(),
            "k_alice": self.k_alice.tolist(),
            "k_agent": self.k_agent.tolist(),
        }


def sift_keys(t: SessionTranscript, report: SampleReport) -> KeyMaterial:
    """Keep rounds that returned to Alice and were not disclosed in s2.

    Returns an empty key (``.empty`` is True) when nothing survives.
    """
    keep = t.returned.copy()
    keep[report.s2.positions] = False
    pos = np.flatnonzero(keep)
    return KeyMaterial(
        positions=pos,
        k_alice=alice_digits(t)[pos],
        k_agent=t.label[pos].T.astype(np.int64),
        digit_base=t.config.variant.digit_base,
    )


@dataclass(frozen=True, eq=False)
class VerificationResult:
    passed: bool
    disclosed: np.ndarray
    mismatches: int
    remaining: KeyMaterial


def verify_key_agreement(keys: KeyMaterial, check_fraction: float,
                         rng: np.random.Generator) -> VerificationResult:
    """Compare K_A with the agents' combined key on a random subset.

    ``ceil(check_fraction * length)`` positions are drawn without
    replacement; they are disclosed and dropped from the usable key.
    """
    if not 0.0 < check_fraction <= 1.0:
        raise ValueError("check_fraction must lie in (0, 1]")
    m = min(len(keys), math.ceil(check_fraction * len(keys)))
    idx = np.sort(rng.choice(len(keys), size=m, replace=False))
    mismatches = int(np.count_nonzero(keys.k_alice[idx] != keys.combined_agents()[idx]))
    return VerificationResult(
        passed=mismatches == 0,
        disclosed=keys.positions[idx],
        mismatches=mismatches,
        remaining=keys.drop(idx),
    )


def otp_split(message, keys: KeyMaterial) -> np.ndarray:
    """C_A = S_A + K_A digitwise modulo the digit base."""
    message = np.asarray(message, dtype=np.int64)
    if message.size > len(keys):
        raise KeyLengthError(f"message of {message.size} digits exceeds key of {len(keys)}")
    if np.any((message < 0) | (message >= keys.digit_base)):
        raise ValueError(f"message digits must lie in [0, {keys.digit_base})")
    return (message + keys.k_alice[: message.size]) % keys.digit_base


def otp_reconstruct(ciphertext, agent_keys: Sequence, digit_base: int = 2) -> np.ndarray:
    """Undo the pad using the agents' keys.

    The agents first combine their strings with the carrier's group law
    (XOR for bits and Pauli labels, componentwise mod d for qudit pairs),
    which reproduces K_A only if every agent contributes.
    """
    ciphertext = np.asarray(ciphertext, dtype=np.int64)
    n = ciphertext.size
    if not len(agent_keys):
        raise ValueError("at least one agent key is needed")
    combined = np.zeros(n, dtype=np.int64)
    for k in agent_keys:
        k = np.asarray(k, dtype=np.int64)
        if k.size < n:
            raise KeyLengthError("agent key shorter than ciphertext")
        combined = combine_digits(combined, k[:n], digit_base)
    return (ciphertext - combined) % digit_base


def text_to_digits(text: str, base: int) -> np.ndarray:
    """UTF-8 text as fixed-length big-endian base-``base`` digits."""
    data = text.encode("utf-8")
    width = math.ceil(8 * len(data) / math.log2(base)) if data else 0
    value = int.from_bytes(data, "big")
    digits = []
    for _ in range(width):
        value, r = divmod(value, base)
        digits.append(r)
    return np.array(digits[::-1], dtype=np.int64)


def digits_to_text(digits, base: int, nbytes: int) -> str:
    value = 0
    for d in np.asarray(digits, dtype=np.int64):
        value = value * base + int(d)
    value %= 256 ** nbytes
    return value.to_bytes(nbytes, "big").decode("utf-8", errors="replace")


__all__ = [
    "KeyLengthError", "KeyMaterial", "VerificationResult", "combine_digits",
    "digits_to_text", "inverse_digits", "otp_reconstruct", "otp_split", "sift_keys",
    "text_to_digits", "verify_key_agreement",
]
