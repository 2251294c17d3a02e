"""Session configuration and random-stream derivation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

# rounds are simulated in fixed blocks; block b always draws from the same
# child stream, so results do not depend on how blocks are scheduled
BLOCK_SIZE = 4096
_ROUND_STREAM = 0
_SAMPLE_STREAM = 1
_VERIFY_STREAM = 2


@dataclass(frozen=True)
class Variant:
    """Information carrier: single photons, EPR pairs, or d-level pairs."""

    kind: str = "single"
    d: int = 2

    def __post_init__(self):
        if self.kind not in ("single", "epr", "qudit"):
            raise ValueError(f"unknown variant {self.kind!r}")
        if self.kind in ("single", "epr") and self.d != 2:
            raise ValueError(f"variant {self.kind!r} is two-level only")
        if self.kind == "qudit" and not 2 <= self.d <= 16:
            raise ValueError(f"qudit dimension must be in [2, 16], got {self.d}")

    @classmethod
    def parse(cls, text: str) -> Variant:
        text = text.strip().lower()
        if text in ("single", "singlephoton", "single-photon"):
            return cls("single")
        if text == "epr":
            return cls("epr")
        if text.startswith("qudit"):
            _, _, d = text.partition(":")
            if not d:
                raise ValueError("qudit variant needs a dimension, e.g. 'qudit:3'")
            return cls("qudit", int(d))
        raise ValueError(f"unknown variant {text!r}")

    def __str__(self) -> str:
        return f"qudit:{self.d}" if self.kind == "qudit" else self.kind

    @property
    def digit_base(self) -> int:
        """Number of values one key digit can take."""
        return 2 if self.kind == "single" else self.d * self.d

    @property
    def entangled(self) -> bool:
        return self.kind != "single"

    def reduce(self, digits, axis=-1) -> np.ndarray:
        """Combine key digits along ``axis`` with this variant's group law."""
        return reduce_digits(digits, self.digit_base, axis=axis)


@dataclass(frozen=True)
class ProtocolConfig:
    num_agents: int = 2
    rounds: int = 1000
    p_control: float = 0.1
    f_sample2: float = 0.1
    rng_seed: int = 0
    variant: Variant = field(default_factory=Variant)

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        if int(self.num_agents) < 1:
            raise ValueError("the ring needs at least one agent")
        if int(self.rounds) < 1:
            raise ValueError("rounds must be >= 1")
        if not 0.0 <= self.p_control < 1.0:
            raise ValueError("p_control must lie in [0, 1)")
        if not 0.0 <= self.f_sample2 < 1.0:
            raise ValueError("f_sample2 must lie in [0, 1)")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    def to_json(self) -> dict:
        out = asdict(self)
        out["variant"] = str(self.variant)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> ProtocolConfig:
        obj = dict(obj)
        obj["variant"] = Variant.parse(str(obj.get("variant", "single")))
        return cls(**obj)


def _pair_dim(base: int) -> int:
    d = math.isqrt(base)
    if d * d != base or d < 2:
        raise ValueError(f"digit base {base} is neither 2 nor a square d*d")
    return d


def combine_digits(a, b, base: int) -> np.ndarray:
    """Group law on key digits.

    Base 2 digits combine by XOR. Base d*d digits encode pairs (n, m) as
    ``n * d + m`` and combine componentwise mod d; for d = 2 this is XOR on
    the two bits, which is the composition law of the Pauli coding ops.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if base == 2:
        return a ^ b
    d = _pair_dim(base)
    return ((a // d + b // d) % d) * d + (a % d + b % d) % d


def inverse_digits(a, base: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if base == 2:
        return a
    d = _pair_dim(base)
    return ((-(a // d)) % d) * d + (-(a % d)) % d


def reduce_digits(digits, base: int, axis: int = -1) -> np.ndarray:
    digits = np.asarray(digits, dtype=np.int64)
    digits = np.moveaxis(digits, axis, -1)
    out = np.zeros(digits.shape[:-1], dtype=np.int64)
    for j in range(digits.shape[-1]):
        out = combine_digits(out, digits[..., j], base)
    return out


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def block_stream(seed: int, block: int) -> np.random.Generator:
    return _stream(seed, _ROUND_STREAM, block)


def sample_stream(seed: int) -> np.random.Generator:
    return _stream(seed, _SAMPLE_STREAM)


def verify_stream(seed: int) -> np.random.Generator:
    return _stream(seed, _VERIFY_STREAM)


def block_ranges(rounds: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(rounds)``."""
    for b, start in enumerate(range(0, rounds, block_size)):
        yield b, start, min(start + block_size, rounds)
