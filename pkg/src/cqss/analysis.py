"""Information-vs-disturbance curve, efficiency and theory/simulation reports."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

from .adversary import AttackOutcome, detection_rate, eve_information
from .protocol.keys import KeyMaterial
from .protocol.sampling import SampleReport
from .protocol.transcript import Mode, SessionTranscript

# intrinsic efficiency of the GHZ-based and two-photon QSS schemes: half the
# instances are discarded for basis mismatch
HBB99_EFFICIENCY = 0.5
KKI_EFFICIENCY = 0.5

Z_FLAG = 3.0
LOW_CONFIDENCE = 100

CURVE_COLUMNS = ("phi", "epsilon_B_theory", "epsilon_B_empirical", "I_B_theory",
                 "I_empirical_estimate", "n_conclusive", "z_detection", "flag")


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else 0.0


def _z(observed: float, expected: float, se: float) -> float:
    if se > 0.0:
        return (observed - expected) / se
    if observed == expected:
        return 0.0
    return math.copysign(math.inf, observed - expected)


@dataclass(frozen=True)
class CurvePoint:
    phi: float
    epsilon_B: float
    I_B: float
    epsilon_B_empirical: Optional[float] = None
    epsilon_B_stderr: Optional[float] = None
    I_empirical: Optional[float] = None
    I_empirical_stderr: Optional[float] = None
    n_conclusive: Optional[int] = None

    @property
    def z_detection(self) -> Optional[float]:
        if self.epsilon_B_empirical is None:
            return None
        se = binomial_stderr(self.epsilon_B, self.n_conclusive) or self.epsilon_B_stderr
        return _z(self.epsilon_B_empirical, self.epsilon_B, se)

    @property
    def low_confidence(self) -> bool:
        return self.n_conclusive is not None and self.n_conclusive < LOW_CONFIDENCE


def information_curve(phi_grid: Sequence[float],
                      empirical: Optional[Sequence[Optional[AttackOutcome]]] = None
                      ) -> list[CurvePoint]:
    """Analytic (epsilon_B, I_B) per phi, joined with simulated outcomes if given."""
    phi_grid = [float(p) for p in phi_grid]
    if any(p < 0 for p in phi_grid):
        raise ValueError("phi values must be non-negative")
    if empirical is not None and len(empirical) != len(phi_grid):
        raise ValueError("one empirical outcome (or None) per grid point is required")
    points = []
    for i, phi in enumerate(phi_grid):
        sim = None if empirical is None else empirical[i]
        if sim is None:
            points.append(CurvePoint(phi, detection_rate(phi), eve_information(phi)))
            continue
        if not math.isclose(sim.phi, phi, abs_tol=1e-12):
            raise ValueError(f"outcome at phi={sim.phi} joined to grid point {phi}")
        points.append(CurvePoint(
            phi=phi,
            epsilon_B=detection_rate(phi),
            I_B=eve_information(phi),
            epsilon_B_empirical=sim.detection_rate,
            epsilon_B_stderr=sim.detection_stderr,
            I_empirical=sim.mutual_information,
            I_empirical_stderr=sim.mutual_information_stderr,
            n_conclusive=sim.z_conclusive,
        ))
    return points


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_curve_csv(points: Sequence[CurvePoint], target: Union[str, Path, IO[str]]) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for p in points:
            z = p.z_detection
            flag = "" if z is None else ("low-confidence" if p.low_confidence else
                                         ("z>3" if abs(z) > Z_FLAG else "ok"))
            w.writerow([_cell(p.phi), _cell(p.epsilon_B), _cell(p.epsilon_B_empirical),
                        _cell(p.I_B), _cell(p.I_empirical), _cell(p.n_conclusive),
                        _cell(z), flag])

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            emit(fh)
    else:
        emit(target)


@dataclass(frozen=True)
class EfficiencyReport:
    rounds: int
    key_length: int
    epsilon_q: float
    announcements: int
    asymptotic_epsilon_q: float
    baselines: dict

    def to_json(self) -> dict:
        return asdict(self)


def efficiency(t: SessionTranscript, k: KeyMaterial) -> EfficiencyReport:
    """Key digits per transmitted carrier.

    ``announcements`` counts classical disclosures: one per control
    measurement, plus every agent's operation on each s2 round.
    """
    cfg = t.config
    controls = int(np.count_nonzero(t.mode == Mode.CONTROL))
    s2_size = int(np.count_nonzero(t.returned)) - len(k)
    return EfficiencyReport(
        rounds=len(t),
        key_length=len(k),
        epsilon_q=len(k) / len(t),
        announcements=controls + cfg.num_agents * s2_size,
        asymptotic_epsilon_q=(1.0 - cfg.p_control) ** cfg.num_agents * (1.0 - cfg.f_sample2),
        baselines={"HBB99": HBB99_EFFICIENCY, "KKI": KKI_EFFICIENCY},
    )


@dataclass(frozen=True)
class TheoryComparison:
    phi_simulated: float
    phi_theory: float
    detection_empirical: float
    detection_theory: float
    n_conclusive: int
    z_detection: float
    information_empirical: float
    information_bound: float
    z_information: float
    low_confidence: bool

    @property
    def flags(self) -> list[str]:
        out = []
        if abs(self.z_detection) > Z_FLAG:
            out.append("detection")
        if self.z_information > Z_FLAG:
            out.append("information")
        return out

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


def compare_theory(sim: AttackOutcome, phi: float, strict: bool = True) -> TheoryComparison:
    """z-scores of a simulated attack against the closed forms at ``phi``.

    Detection is two-sided with the binomial standard error under the
    theoretical rate. The attacker's information is only bounded above by
    the ancilla entropy, so its z-score is one-sided. With ``strict`` a
    simulation run at a different phi is rejected; otherwise the comparison
    is made anyway and will normally be flagged.
    """
    if strict and not math.isclose(sim.phi, phi, abs_tol=1e-12):
        raise ValueError(f"simulation ran at phi={sim.phi}, theory requested at phi={phi}")
    eps = detection_rate(phi)
    n = sim.z_conclusive
    se = binomial_stderr(eps, n) or binomial_stderr(sim.detection_rate, n)
    bound = eve_information(phi)
    excess = sim.mutual_information - bound
    se_info = sim.mutual_information_stderr
    if se_info > 0.0:
        z_info = excess / se_info
    else:
        z_info = math.inf if excess > 1e-12 else 0.0
    return TheoryComparison(
        phi_simulated=sim.phi,
        phi_theory=phi,
        detection_empirical=sim.detection_rate,
        detection_theory=eps,
        n_conclusive=n,
        z_detection=_z(sim.detection_rate, eps, se),
        information_empirical=sim.mutual_information,
        information_bound=bound,
        z_information=z_info,
        low_confidence=n < LOW_CONFIDENCE,
    )


def session_summary(t: SessionTranscript, report: SampleReport, keys: KeyMaterial,
                    abort_threshold: Optional[float] = None) -> dict:
    eff = efficiency(t, keys)
    summary = {
        "format": "cqss-summary v1",
        "config": t.config.to_json(),
        "adversary": None if t.adversary is None else t.adversary.to_json(),
        "rounds": len(t),
        "returned": int(np.count_nonzero(t.returned)),
        "control_rounds": int(np.count_nonzero(t.mode == Mode.CONTROL)),
        "samples": report.to_json(),
        "error_rates": report.error_rates,
        "key_length": len(keys),
        "key_consistent": keys.consistent(),
        "efficiency": eff.to_json(),
    }
    if abort_threshold is not None:
        summary["abort_threshold"] = abort_threshold
        summary["aborted"] = report.max_error_rate > abort_threshold
    return summary
