"""Eavesdropping checks: the two sample sequences and their error rates.

The first sequence holds every round some agent measured in control mode
(one sub-sequence per agent). Agent i announces the positions first, the
agents upstream of it then declare their coding operations on those
positions, and only then are bases and outcomes revealed; the fields of
:class:`S1Sample` follow that order. The second sequence is a random subset
of the rounds that returned to Alice, for which every agent declares its
operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..epr_qudit import control_support, decode_bell_indices
from .config import sample_stream
from .transcript import ABSENT, Mode, SessionTranscript

BASIS_Z = 0
BASIS_X = 1


@dataclass(frozen=True, eq=False)
class S1Sample:
    agent: int
    positions: np.ndarray
    upstream_ops: np.ndarray
    bases: np.ndarray
    outcomes: np.ndarray
    conclusive: np.ndarray
    errors: np.ndarray
    # basis the conclusive check ran in (Alice's basis for single photons)
    check_basis: np.ndarray

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def n_conclusive(self) -> int:
        return int(np.count_nonzero(self.conclusive))

    @property
    def n_errors(self) -> int:
        return int(np.count_nonzero(self.errors))

    @property
    def error_rate(self) -> float:
        return self.n_errors / self.n_conclusive if self.n_conclusive else 0.0

    def counts_in_basis(self, basis: int) -> tuple[int, int]:
        """(conclusive, errors) restricted to checks made in ``basis``."""
        sel = self.conclusive & (self.check_basis == basis)
        return int(np.count_nonzero(sel)), int(np.count_nonzero(self.errors & sel))


@dataclass(frozen=True, eq=False)
class S2Sample:
    positions: np.ndarray
    declared_ops: np.ndarray
    errors: np.ndarray
    check_basis: np.ndarray

    @property
    def size(self) -> int:
        return int(self.positions.size)

    n_conclusive = size

    @property
    def n_errors(self) -> int:
        return int(np.count_nonzero(self.errors))

    @property
    def error_rate(self) -> float:
        return self.n_errors / self.size if self.size else 0.0

    def counts_in_basis(self, basis: int) -> tuple[int, int]:
        sel = self.check_basis == basis
        return int(np.count_nonzero(sel)), int(np.count_nonzero(self.errors & sel))


@dataclass(frozen=True, eq=False)
class SampleReport:
    s1: tuple[S1Sample, ...]
    s2: S2Sample

    @property
    def error_rates(self) -> dict[str, float]:
        rates = {f"s1[{s.agent}]": s.error_rate for s in self.s1}
        rates["s2"] = self.s2.error_rate
        return rates

    @property
    def max_error_rate(self) -> float:
        return max(self.error_rates.values())

    def to_json(self) -> dict:
        return {
            "s1": [
                {
                    "agent": s.agent,
                    "size": s.size,
                    "conclusive": s.n_conclusive,
                    "errors": s.n_errors,
                    "error_rate": s.error_rate,
                }
                for s in self.s1
            ],
            "s2": {"size": self.s2.size, "errors": self.s2.n_errors,
                   "error_rate": self.s2.error_rate},
        }


def alice_digits(t: SessionTranscript) -> np.ndarray:
    """Alice's key digit for every returned round, ABSENT elsewhere."""
    if t.config.variant.entangled:
        return decode_bell_indices(t.config.variant, t.alice_outcome)
    out = np.full(len(t), ABSENT, dtype=np.int64)
    ok = t.returned
    out[ok] = t.alice_bit[ok] ^ t.alice_outcome[ok]
    return out


def upstream_digits(t: SessionTranscript, agent: int, rows) -> np.ndarray:
    """Combined coding digit of agents 0..agent-1 on ``rows``."""
    return t.config.variant.reduce(t.label[rows, :agent], axis=-1)


def draw_s2_positions(t: SessionTranscript) -> np.ndarray:
    eligible = np.flatnonzero(t.returned)
    m = int(round(t.config.f_sample2 * eligible.size))
    rng = sample_stream(t.config.rng_seed)
    return np.sort(rng.choice(eligible, size=m, replace=False))


def check_samples(t: SessionTranscript) -> SampleReport:
    variant = t.config.variant
    s1 = []
    for i in range(t.config.num_agents):
        rows = np.flatnonzero(t.mode[:, i] == Mode.CONTROL)
        prior = upstream_digits(t, i, rows)
        bases = t.ctrl_basis[rows, i].astype(np.int64)
        outcomes = t.ctrl_outcome[rows, i].astype(np.int64)
        if variant.entangled:
            # both sides always measure in the announced basis
            conclusive = np.ones(rows.size, dtype=bool)
            alice = t.alice_control_outcome[rows].astype(np.int64)
            errors = ~control_support(variant)[prior, bases, alice, outcomes]
            check_basis = bases
        else:
            check_basis = t.alice_basis[rows].astype(np.int64)
            conclusive = bases == check_basis
            expected = t.alice_bit[rows] ^ prior
            errors = conclusive & (outcomes != expected)
        s1.append(S1Sample(
            agent=i,
            positions=rows,
            upstream_ops=t.label[rows, :i].copy(),
            bases=bases,
            outcomes=outcomes,
            conclusive=conclusive,
            errors=errors,
            check_basis=check_basis,
        ))

    pos = draw_s2_positions(t)
    declared = t.label[pos].copy()
    errors = alice_digits(t)[pos] != variant.reduce(declared, axis=-1)
    check_basis = (np.full(pos.size, ABSENT, dtype=np.int64) if variant.entangled
                   else t.alice_basis[pos].astype(np.int64))
    s2 = S2Sample(positions=pos, declared_ops=declared, errors=errors, check_basis=check_basis)
    return SampleReport(tuple(s1), s2)
