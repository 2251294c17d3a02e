"""Per-round event records and the columnar session transcript."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Optional

import numpy as np

from .config import ProtocolConfig

if TYPE_CHECKING:
    from ..adversary import AttackConfig

ABSENT = -1
BASIS_NAMES = ("Z", "X")


class Mode(IntEnum):
    CODE = 0
    CONTROL = 1

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class AgentEntry:
    mode: Mode
    coding_label: Optional[int] = None
    control_basis: Optional[str] = None
    control_outcome: Optional[int] = None


@dataclass(frozen=True)
class RoundRecord:
    """One photon's life: preparation, the agents it reached, Alice's readout."""

    round_id: int
    alice_basis: str
    alice_bit: int
    agents: tuple[AgentEntry, ...]
    returned: bool
    alice_outcome: Optional[int] = None
    ancilla_outcome: Optional[int] = None


def _col(n, shape=(), fill=ABSENT, dtype=np.int16):
    return np.full((n, *shape), fill, dtype=dtype)


@dataclass(eq=False)
class SessionTranscript:
    """Columnar log of a whole session.

    Row r describes round r. Per-agent columns are (rounds, num_agents) and
    hold ``ABSENT`` (-1) for agents the carrier never reached. Single-photon
    sessions fill ``alice_basis``/``alice_bit``; entangled sessions fill
    ``alice_control_outcome`` (Alice's measurement of the kept particle in
    control rounds) and store Bell outcomes as ``n * d + m`` in
    ``alice_outcome``.
    """

    config: ProtocolConfig
    adversary: Optional["AttackConfig"] = None
    alice_basis: np.ndarray = field(default=None, repr=False)
    alice_bit: np.ndarray = field(default=None, repr=False)
    mode: np.ndarray = field(default=None, repr=False)
    label: np.ndarray = field(default=None, repr=False)
    ctrl_basis: np.ndarray = field(default=None, repr=False)
    ctrl_outcome: np.ndarray = field(default=None, repr=False)
    alice_outcome: np.ndarray = field(default=None, repr=False)
    alice_control_outcome: np.ndarray = field(default=None, repr=False)
    ancilla_outcome: np.ndarray = field(default=None, repr=False)

    COLUMNS = ("alice_basis", "alice_bit", "mode", "label", "ctrl_basis",
               "ctrl_outcome", "alice_outcome", "alice_control_outcome",
               "ancilla_outcome")

    @classmethod
    def empty(cls, config: ProtocolConfig, n: int | None = None, adversary=None):
        n = config.rounds if n is None else n
        k = config.num_agents
        return cls(
            config=config,
            adversary=adversary,
            alice_basis=_col(n, dtype=np.int8),
            alice_bit=_col(n, dtype=np.int8),
            mode=_col(n, (k,), dtype=np.int8),
            label=_col(n, (k,)),
            ctrl_basis=_col(n, (k,), dtype=np.int8),
            ctrl_outcome=_col(n, (k,)),
            alice_outcome=_col(n),
            alice_control_outcome=_col(n),
            ancilla_outcome=_col(n, dtype=np.int8),
        )

    @classmethod
    def concatenate(cls, config, parts, adversary=None) -> SessionTranscript:
        cols = {c: np.concatenate([getattr(p, c) for p in parts]) for c in cls.COLUMNS}
        t = cls(config=config, adversary=adversary, **cols)
        if len(t) != config.rounds:
            raise ValueError(f"assembled {len(t)} rounds, config says {config.rounds}")
        return t

    def __len__(self) -> int:
        return self.mode.shape[0]

    @property
    def returned(self) -> np.ndarray:
        return self.alice_outcome != ABSENT

    @property
    def all_code(self) -> np.ndarray:
        return np.all(self.mode == Mode.CODE, axis=1)

    def record(self, r: int):
        if self.config.variant.entangled:
            from ..epr_qudit import epr_record_from_transcript

            return epr_record_from_transcript(self, r)
        agents = []
        for i in range(self.config.num_agents):
            m = int(self.mode[r, i])
            if m == ABSENT:
                break
            if m == Mode.CODE:
                agents.append(AgentEntry(Mode.CODE, coding_label=int(self.label[r, i])))
            else:
                agents.append(AgentEntry(
                    Mode.CONTROL,
                    control_basis=BASIS_NAMES[self.ctrl_basis[r, i]],
                    control_outcome=int(self.ctrl_outcome[r, i]),
                ))
        out = int(self.alice_outcome[r])
        anc = int(self.ancilla_outcome[r])
        return RoundRecord(
            round_id=r,
            alice_basis=BASIS_NAMES[self.alice_basis[r]],
            alice_bit=int(self.alice_bit[r]),
            agents=tuple(agents),
            returned=out != ABSENT,
            alice_outcome=None if out == ABSENT else out,
            ancilla_outcome=None if anc == ABSENT else anc,
        )

    @property
    def records(self) -> list:
        return [self.record(r) for r in range(len(self))]

    def identical(self, other: SessionTranscript) -> bool:
        if self.config != other.config or self.adversary != other.adversary:
            return False
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in self.COLUMNS)
