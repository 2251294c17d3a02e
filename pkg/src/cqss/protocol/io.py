"""Line-delimited transcript and sample-report files.

Every file starts with a version line (``cqss-transcript v1`` or
``cqss-samples v1``), followed by one compact JSON object per line with a
fixed key order. A transcript's second line carries the configuration and
the attack (or null); each following line is one round.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterator, Union

import numpy as np

from .config import ProtocolConfig
from .sampling import SampleReport
from .transcript import ABSENT, BASIS_NAMES, Mode, SessionTranscript

TRANSCRIPT_HEADER = "cqss-transcript v1"
SAMPLES_HEADER = "cqss-samples v1"

PathOrFile = Union[str, Path, IO[str]]


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _opt(v: int):
    return None if v == ABSENT else int(v)


def _round_line(t: SessionTranscript, r: int, digit_fmt, bell_fmt, basis_names) -> dict:
    entangled = t.config.variant.entangled
    line: dict = {"round": r}
    if not entangled:
        line["alice"] = {"basis": BASIS_NAMES[t.alice_basis[r]], "bit": int(t.alice_bit[r])}
    agents = []
    for i in range(t.config.num_agents):
        mode = t.mode[r, i]
        if mode == ABSENT:
            break
        if mode == Mode.CODE:
            agents.append({"mode": "code", "op": digit_fmt(int(t.label[r, i]))})
        else:
            agents.append({"mode": "control", "basis": basis_names[t.ctrl_basis[r, i]],
                           "outcome": int(t.ctrl_outcome[r, i])})
    line["agents"] = agents
    out = int(t.alice_outcome[r])
    line["returned"] = out != ABSENT
    if entangled:
        line["alice_bell"] = None if out == ABSENT else bell_fmt(out)
        line["alice_control"] = _opt(t.alice_control_outcome[r])
    else:
        line["alice_outcome"] = _opt(out)
    line["ancilla"] = _opt(t.ancilla_outcome[r])
    return line


def _formatters(t_config: ProtocolConfig):
    variant = t_config.variant
    if not variant.entangled:
        return int, None, BASIS_NAMES, int
    from ..epr_qudit import BellLabel, control_basis_names, format_digit, parse_digit

    d = variant.d

    def bell_fmt(idx):
        label = BellLabel.from_index(idx, d)
        return label.name if d == 2 else [label.n, label.m]

    return (lambda x: format_digit(variant, x)), bell_fmt, control_basis_names(d), \
        (lambda v: parse_digit(variant, v))


def iter_transcript_lines(t: SessionTranscript) -> Iterator[str]:
    digit_fmt, bell_fmt, basis_names, _ = _formatters(t.config)
    yield TRANSCRIPT_HEADER
    yield _dumps({
        "type": "session",
        "config": t.config.to_json(),
        "adversary": None if t.adversary is None else t.adversary.to_json(),
    })
    for r in range(len(t)):
        yield _dumps(_round_line(t, r, digit_fmt, bell_fmt, basis_names))


def _open(target: PathOrFile, mode: str):
    if isinstance(target, (str, Path)):
        return open(target, mode, encoding="utf-8", newline="\n")
    return _Borrowed(target)


class _Borrowed:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        return False


def write_transcript(t: SessionTranscript, target: PathOrFile) -> None:
    with _open(target, "w") as fh:
        for line in iter_transcript_lines(t):
            fh.write(line + "\n")


def dumps_transcript(t: SessionTranscript) -> str:
    return "".join(line + "\n" for line in iter_transcript_lines(t))


def read_transcript(source: PathOrFile) -> SessionTranscript:
    with _open(source, "r") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != TRANSCRIPT_HEADER:
        raise ValueError(f"not a {TRANSCRIPT_HEADER!r} file")
    head = json.loads(lines[1])
    config = ProtocolConfig.from_json(head["config"])
    adversary = None
    if head["adversary"] is not None:
        from ..adversary import AttackConfig

        adversary = AttackConfig.from_json(head["adversary"])
    rows = [json.loads(ln) for ln in lines[2:]]
    t = SessionTranscript.empty(config, len(rows), adversary=adversary)
    _, _, basis_names, digit_parse = _formatters(config)
    variant = config.variant
    for row in rows:
        r = row["round"]
        if not variant.entangled:
            t.alice_basis[r] = BASIS_NAMES.index(row["alice"]["basis"])
            t.alice_bit[r] = row["alice"]["bit"]
        for i, entry in enumerate(row["agents"]):
            if entry["mode"] == "code":
                t.mode[r, i] = Mode.CODE
                t.label[r, i] = digit_parse(entry["op"])
            else:
                t.mode[r, i] = Mode.CONTROL
                t.ctrl_basis[r, i] = basis_names.index(entry["basis"])
                t.ctrl_outcome[r, i] = entry["outcome"]
        if variant.entangled:
            bell = row["alice_bell"]
            if bell is not None:
                from ..epr_qudit import BellLabel

                label = BellLabel.named(bell) if isinstance(bell, str) else \
                    BellLabel(bell[0], bell[1], variant.d)
                t.alice_outcome[r] = label.index
            if row["alice_control"] is not None:
                t.alice_control_outcome[r] = row["alice_control"]
        elif row["alice_outcome"] is not None:
            t.alice_outcome[r] = row["alice_outcome"]
        if row["ancilla"] is not None:
            t.ancilla_outcome[r] = row["ancilla"]
    if len(t) != config.rounds:
        raise ValueError(f"file holds {len(t)} rounds, header says {config.rounds}")
    return t


def _ints(a) -> list:
    return np.asarray(a).astype(np.int64).tolist()


def iter_sample_lines(report: SampleReport) -> Iterator[str]:
    yield SAMPLES_HEADER
    for s in report.s1:
        yield _dumps({
            "sample": "s1",
            "agent": s.agent,
            "positions": _ints(s.positions),
            "upstream_ops": _ints(s.upstream_ops),
            "bases": _ints(s.bases),
            "outcomes": _ints(s.outcomes),
            "conclusive": s.n_conclusive,
            "errors": s.n_errors,
            "error_rate": s.error_rate,
        })
    yield _dumps({
        "sample": "s2",
        "positions": _ints(report.s2.positions),
        "declared_ops": _ints(report.s2.declared_ops),
        "size": report.s2.size,
        "errors": report.s2.n_errors,
        "error_rate": report.s2.error_rate,
    })


def write_samples(report: SampleReport, target: PathOrFile) -> None:
    with _open(target, "w") as fh:
        for line in iter_sample_lines(report):
            fh.write(line + "\n")


def write_json(obj, target: PathOrFile) -> None:
    with _open(target, "w") as fh:
        fh.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")
