"""Command-line entry point.

Every subcommand reads one JSON config (see ``--print-config`` for all keys
and their defaults), applies flag overrides, and writes its artifacts to the
output directory. Outputs depend only on the config, so the same seed gives
byte-identical files.

Exit codes: 0 success, 1 protocol abort or failed check, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import AttackConfig, analyze_attack, simulate_attack
from .analysis import compare_theory, information_curve, session_summary, write_curve_csv
from .epr_qudit import dense_coding_check, qudit_algebra_check
from .protocol.config import ProtocolConfig, Variant, verify_stream
from .protocol.engine import run_session
from .protocol.io import write_json, write_samples, write_transcript
from .protocol.keys import (
    digits_to_text,
    otp_reconstruct,
    otp_split,
    sift_keys,
    text_to_digits,
    verify_key_agreement,
)
from .protocol.sampling import check_samples

EXIT_OK = 0
EXIT_ABORT = 1
EXIT_USAGE = 2

DEFAULT_CONFIG = {
    "variant": "single",
    "num_agents": 2,
    "rounds": 1000,
    "p_control": 0.1,
    "f_sample2": 0.1,
    "seed": 0,
    "abort_threshold": 0.0,
    "check_fraction": None,
    "attack": None,
    "phi_grid": None,
    "message": "sixteen byte msg",
    "workers": None,
}
DEFAULT_ATTACK = {"phi": math.pi / 4, "adversary_agent": 0, "intercept_leg": None,
                  "ancilla_basis": "Z"}
SWEEP_GRID = [i * math.pi / 36 for i in range(10)]  # 0 .. pi/4 in 9 steps
CURVE_POINTS = 100
QUDIT_CHECK_DIMS = (2, 3, 5)


class ConfigError(ValueError):
    pass


def _merge_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg.update(user)
    if cfg["attack"] is not None:
        if not isinstance(cfg["attack"], dict):
            raise ConfigError("attack must be an object or null")
        bad = sorted(set(cfg["attack"]) - set(DEFAULT_ATTACK))
        if bad:
            raise ConfigError(f"unknown attack keys: {', '.join(bad)}")
        cfg["attack"] = {**DEFAULT_ATTACK, **cfg["attack"]}
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    """Config file, then command-line overrides."""
    cfg = _merge_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.rounds is not None:
        cfg["rounds"] = args.rounds
    if args.agents is not None:
        cfg["num_agents"] = args.agents
    if args.variant is not None:
        cfg["variant"] = args.variant
    if args.phi is not None:
        cfg["attack"] = {**(cfg["attack"] or DEFAULT_ATTACK), "phi": args.phi}
    try:
        variant = Variant.parse(str(cfg["variant"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.command == "epr" and variant.kind == "single":
        cfg["variant"] = "epr"
    return cfg


def protocol_config(cfg: dict, seed_offset: int = 0) -> ProtocolConfig:
    try:
        return ProtocolConfig(
            num_agents=int(cfg["num_agents"]),
            rounds=int(cfg["rounds"]),
            p_control=float(cfg["p_control"]),
            f_sample2=float(cfg["f_sample2"]),
            rng_seed=(int(cfg["seed"]) + seed_offset) % 2**64,
            variant=Variant.parse(str(cfg["variant"])),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def attack_config(cfg: dict, phi: float | None = None, config: ProtocolConfig | None = None):
    block = cfg["attack"]
    if block is None and phi is None:
        return None
    block = dict(block or DEFAULT_ATTACK)
    if phi is not None:
        block["phi"] = phi
    try:
        attack = AttackConfig(phi=float(block["phi"]),
                              adversary_agent=block["adversary_agent"],
                              intercept_leg=block["intercept_leg"],
                              ancilla_basis=block["ancilla_basis"])
        if config is not None:
            attack.validate_for(config)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return attack


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workers(cfg: dict):
    return None if cfg["workers"] is None else int(cfg["workers"])


def _session(cfg: dict):
    """Run, check and sift one session; returns (transcript, report, keys, summary)."""
    config = protocol_config(cfg)
    attack = attack_config(cfg, config=config)
    t = run_session(config, attack, max_workers=_workers(cfg))
    report = check_samples(t)
    keys = sift_keys(t, report)
    summary = session_summary(t, report, keys, abort_threshold=float(cfg["abort_threshold"]))
    if attack is not None:
        outcome = analyze_attack(t, report)
        summary["attack"] = {
            "detection_rate": outcome.detection_rate,
            "detection_stderr": outcome.detection_stderr,
            "z_conclusive": outcome.z_conclusive,
            "x_error_rate": outcome.x_error_rate,
            "mutual_information": outcome.mutual_information,
        }
    if cfg["check_fraction"] is not None and not keys.empty and not summary["aborted"]:
        try:
            check = verify_key_agreement(keys, float(cfg["check_fraction"]),
                                         verify_stream(config.rng_seed))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        summary["verification"] = {"passed": check.passed, "disclosed": int(check.disclosed.size),
                                   "mismatches": check.mismatches,
                                   "remaining": len(check.remaining)}
        if not check.passed:
            summary["aborted"] = True
        keys = check.remaining
    return t, report, keys, summary


def cmd_run(cfg: dict, args) -> int:
    t, report, keys, summary = _session(cfg)
    out = _out_dir(args)
    write_transcript(t, out / "transcript.jsonl")
    write_samples(report, out / "samples.jsonl")
    write_json(keys.to_json(), out / "keys.json")
    write_json(summary, out / "summary.json")
    eps = report.max_error_rate
    print(f"{t.config.variant} session, {len(t)} rounds: key length {len(keys)}, "
          f"max error rate {eps:.4f}")
    if summary["aborted"]:
        print(f"abort: error rate {eps:.4f} exceeds threshold {cfg['abort_threshold']}",
              file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _grid(cfg: dict, default) -> list[float]:
    grid = cfg["phi_grid"]
    if grid is None:
        return list(default)
    if not isinstance(grid, list) or not grid:
        raise ConfigError("phi_grid must be a non-empty list")
    try:
        return [float(p) for p in grid]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad phi_grid: {exc}") from exc


def cmd_attack_sweep(cfg: dict, args) -> int:
    grid = [float(args.phi)] if args.phi is not None else _grid(cfg, SWEEP_GRID)
    outcomes, rows = [], []
    for i, phi in enumerate(grid):
        config = protocol_config(cfg, seed_offset=i)
        attack = attack_config(cfg, phi=phi, config=config)
        _, sim = simulate_attack(config, attack, max_workers=_workers(cfg))
        outcomes.append(sim)
        cmp = compare_theory(sim, phi)
        rows.append({"phi": phi, "seed": config.rng_seed,
                     "detection_empirical": cmp.detection_empirical,
                     "detection_theory": cmp.detection_theory,
                     "n_conclusive": cmp.n_conclusive, "z_detection": cmp.z_detection,
                     "information_empirical": cmp.information_empirical,
                     "information_bound": cmp.information_bound,
                     "z_information": cmp.z_information,
                     "low_confidence": cmp.low_confidence, "flags": cmp.flags})
    out = _out_dir(args)
    write_curve_csv(information_curve(grid, outcomes), out / "curve.csv")
    write_json({"format": "cqss-sweep v1", "config": protocol_config(cfg).to_json(),
                "points": rows}, out / "sweep.json")
    flagged = sum(bool(r["flags"]) for r in rows)
    print(f"{len(grid)} attack strengths, {flagged} flagged against theory")
    return EXIT_OK


def cmd_curve(cfg: dict, args) -> int:
    default = np.linspace(0.0, math.pi / 2, CURVE_POINTS).tolist()
    grid = [float(args.phi)] if args.phi is not None else _grid(cfg, default)
    try:
        points = information_curve(grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_curve_csv(points, _out_dir(args) / "curve.csv")
    print(f"{len(points)} curve points written")
    return EXIT_OK


def cmd_qudit_check(cfg: dict, args) -> int:
    variant = Variant.parse(str(cfg["variant"]))
    dims = (variant.d,) if variant.kind == "qudit" else QUDIT_CHECK_DIMS
    result = {
        "dense_coding": dense_coding_check(),
        "qudit": [qudit_algebra_check(d) for d in dims],
    }
    failures = len(result["dense_coding"]["failures"]) + sum(
        len(r["composition_failures"]) + len(r["mapping_failures"]) for r in result["qudit"])
    result["passed"] = failures == 0
    write_json(result, _out_dir(args) / "qudit_check.json")
    print(f"dense coding and d in {list(dims)}: {failures} failures")
    return EXIT_OK if failures == 0 else EXIT_ABORT


def _bits(digits: np.ndarray, base: int):
    """Digits expanded to bits when the base is a power of two, else None."""
    width = base.bit_length() - 1
    if 1 << width != base:
        return None
    shifts = np.arange(width - 1, -1, -1)
    return ((digits[:, None] >> shifts) & 1).ravel()


def cmd_split_demo(cfg: dict, args) -> int:
    t, report, keys, summary = _session(cfg)
    if summary["aborted"]:
        print("abort: session failed its checks, no secret is split", file=sys.stderr)
        write_json(summary, _out_dir(args) / "summary.json")
        return EXIT_ABORT
    base = keys.digit_base
    text = str(cfg["message"])
    message = text_to_digits(text, base)
    if message.size > len(keys):
        raise ConfigError(f"message needs {message.size} key digits, session produced "
                          f"{len(keys)}; increase rounds")
    cipher = otp_split(message, keys)
    full = otp_reconstruct(cipher, list(keys.k_agent), base)
    nbytes = len(text.encode("utf-8"))
    msg_bits = _bits(message, base)
    shares = []
    for i in range(keys.num_agents):
        guess = otp_reconstruct(cipher, [keys.k_agent[i]], base)
        entry = {"agent": i, "digit_distance": int(np.count_nonzero(guess != message))}
        if msg_bits is not None:
            entry["bit_distance"] = int(np.count_nonzero(_bits(guess, base) != msg_bits))
        shares.append(entry)
    result = {
        "format": "cqss-split v1",
        "variant": str(t.config.variant),
        "digit_base": base,
        "message": text,
        "message_digits": int(message.size),
        "message_bits": None if msg_bits is None else int(msg_bits.size),
        "key_length": len(keys),
        "ciphertext": cipher.tolist(),
        "reconstructed": digits_to_text(full, base, nbytes),
        "round_trip": bool(np.array_equal(full, message)),
        "single_share": shares,
    }
    out = _out_dir(args)
    write_json(result, out / "split.json")
    write_json(summary, out / "summary.json")
    print(f"round trip {'exact' if result['round_trip'] else 'FAILED'}; "
          f"single-share distances {[s.get('bit_distance', s['digit_distance']) for s in shares]}")
    return EXIT_OK if result["round_trip"] else EXIT_ABORT


COMMANDS = {
    "run": cmd_run,
    "attack-sweep": cmd_attack_sweep,
    "epr": cmd_run,
    "qudit-check": cmd_qudit_check,
    "curve": cmd_curve,
    "split-demo": cmd_split_demo,
}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=_seed, help="override the config seed")
    common.add_argument("--out", default="cqss-out", help="output directory (default: %(default)s)")
    common.add_argument("--rounds", type=int, help="override the number of rounds")
    common.add_argument("--phi", type=float, help="attack strength in radians")
    common.add_argument("--agents", type=int, help="override the number of agents")
    common.add_argument("--variant", help="single, epr or qudit:d")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved config with all defaults and exit")
    parser = argparse.ArgumentParser(prog="cqss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "run": "run one session and write transcript, samples, keys and summary",
        "attack-sweep": "simulate the entangling attack over a phi grid, write curve.csv",
        "epr": "run one entangled-carrier session (EPR unless a qudit variant is given)",
        "qudit-check": "exhaustively check dense coding and the d-level operator algebra",
        "curve": "write the analytic information/disturbance curve",
        "split-demo": "split a message with the sifted keys and reconstruct it",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        protocol_config(cfg)
        if args.print_config:
            print(json.dumps(cfg, indent=2))
            return EXIT_OK
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"cqss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
