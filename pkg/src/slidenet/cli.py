"""Command-line front end.

    slidenet run <scenario.json> [--out DIR] [--trace]
    slidenet audit <trace.jsonl>
    slidenet gen <kind> [params...] [--out FILE]

Exit codes: 0 success, 2 configuration error, 3 conforming-constraint
violation, 4 invariant or audit failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .adversary import BEHAVIORS, ConfigError
from .codec import CodecError
from .engine import (ConformingError, Engine, InvariantError, Scenario)
from .localize import LocalizationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONFORMING = 3
EXIT_INVARIANT = 4


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_run(args) -> int:
    try:
        with open(args.scenario) as fh:
            data = json.load(fh)
        scenario = Scenario.from_dict(data)
        if args.trace:
            scenario.trace = True
        if args.seed is not None:
            scenario.seed = args.seed
        if args.mode is not None:
            scenario.mode = "auth" if args.mode == "auth" else "slide"
        engine = Engine(scenario)
    except (OSError, json.JSONDecodeError, CodecError, ConfigError,
            KeyError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConformingError as exc:
        print(f"conforming violation: {exc}", file=sys.stderr)
        return EXIT_CONFORMING
    try:
        report = engine.run()
    except (InvariantError, LocalizationError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "report.json"), report)
    if engine.trace is not None:
        trace_path = os.path.join(out_dir, "trace.jsonl")
        with open(trace_path, "w") as fh:
            header = {"k": "run", "scenario": scenario.to_dict(),
                      "digest": scenario.digest(),
                      "honest": not engine.corrupt_nodes,
                      "n": scenario.n}
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for rec in engine.trace:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    delivered = len(report["delivered"])
    print(f"delivered {delivered}/{report['messages_requested']} messages "
          f"in {len(report['transmissions'])} transmissions; "
          f"{len(report['failures'])} failed; "
          f"{len(report['eliminations'])} eliminations")
    return EXIT_OK


def _audit_state_row(rec, n, honest_nodes, errors) -> tuple:
    """Recompute buffer potentials from one per-round state row and check
    the height-derived invariants for honest nodes."""
    phi_nd = 0
    phi_dup = 0
    cap = 2 * n
    for node_str, bufs in sorted(rec["nodes"].items()):
        node = int(node_str)
        heights = []
        internal = all(kind in ("in", "out") for kind, *_ in bufs) \
            and node not in (0, n - 1)
        for kind, peer, h, extra, acc in bufs:
            heights.append(h)
            if h < 0 or h > cap:
                errors.append(f"round {rec['g']}: node {node} buffer "
                              f"height {h} outside [0, {cap}]")
            if node in (0, n - 1):
                continue
            if kind == "out":
                occupied = list(range(1, h + 1))
                if extra is not None and extra > h:
                    occupied = list(range(1, h)) + [extra]
                for hh in occupied:
                    if acc and extra is not None and hh == extra:
                        phi_dup += hh
                    else:
                        phi_nd += hh
            else:
                if extra is not None and extra <= h:
                    # ghost gap below the top: slots 1..h+1 minus the gap
                    phi_nd += (h + 1) * (h + 2) // 2 - extra
                else:
                    phi_nd += h * (h + 1) // 2
        if node in honest_nodes and node not in (0, n - 1) and heights:
            if max(heights) - min(heights) > 1:
                errors.append(f"round {rec['g']}: node {node} unbalanced "
                              f"heights {heights}")
    return phi_nd, phi_dup


def cmd_audit(args) -> int:
    try:
        with open(args.trace) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not lines or lines[0].get("k") != "run":
        print("configuration error: not a trace file", file=sys.stderr)
        return EXIT_CONFIG
    header = lines[0]
    n = header["n"]
    honest = header.get("honest", True)
    corrupt = {c["node"] for c in
               header["scenario"].get("corruptions", [])}
    honest_nodes = {i for i in range(n) if i not in corrupt}
    dup_bound = 2 * n**3 - 8 * n**2 + 8 * n

    errors = []
    prev_nd = None
    tx_gain = 0
    tx_blocked_unwasted = 0
    tx_start_nd = 0
    rounds_seen = 0
    for rec in lines[1:]:
        if rec["k"] == "state":
            rounds_seen += 1
            phi_nd, phi_dup = _audit_state_row(rec, n, honest_nodes, errors)
            if rec.get("nd") is not None and rec["nd"] != phi_nd:
                errors.append(f"round {rec['g']}: recorded potential "
                              f"{rec['nd']} != recomputed {phi_nd}")
            if honest:
                if not 0 <= phi_dup <= dup_bound:
                    errors.append(f"round {rec['g']}: duplication potential "
                                  f"{phi_dup} outside [0, {dup_bound}]")
                if prev_nd is not None and rec["r"] != 1 \
                        and phi_nd - prev_nd > rec["gain"]:
                    errors.append(
                        f"round {rec['g']}: potential rose {phi_nd - prev_nd}"
                        f" with insertions {rec['gain']}")
            prev_nd = phi_nd
            tx_gain += rec["gain"]
            if rec["r"] == 1:
                tx_start_nd = phi_nd - rec["gain"]
                tx_gain = rec["gain"]
                tx_blocked_unwasted = 0
            if rec.get("blocked") and not rec.get("wasted"):
                tx_blocked_unwasted += 1
        elif rec["k"] == "endT" and honest and prev_nd is not None:
            drop = tx_start_nd + tx_gain - prev_nd
            need = n * tx_blocked_unwasted
            if drop < need:
                errors.append(f"transmission {rec['T']}: potential drop "
                              f"{drop} below n*blocked = {need}")
    if rounds_seen == 0:
        errors.append("trace contains no state rows (was it recorded with "
                      "--trace?)")
    for err in errors[:20]:
        print(f"audit: {err}", file=sys.stderr)
    if errors:
        print(f"audit failed with {len(errors)} finding(s)", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"audit passed over {rounds_seen} recorded rounds")
    return EXIT_OK


def cmd_gen(args) -> int:
    corruptions = []
    backbone = args.backbone
    if args.kind == "honest":
        schedule = {"kind": "static", "p": 0.0, "seed": args.seed,
                    "script": None, "backbone": backbone}
    elif args.kind == "churn":
        schedule = {"kind": "churn", "p": args.p, "seed": args.seed,
                    "script": None, "backbone": backbone}
    elif args.kind == "attack":
        if args.behavior not in BEHAVIORS:
            print(f"configuration error: unknown behavior {args.behavior}",
                  file=sys.stderr)
            return EXIT_CONFIG
        node = args.corrupt_node
        if node is None:
            node = args.n - 2
        corruptions = [{"node": node, "round": args.corrupt_round,
                        "behavior": args.behavior, "params": {}}]
        schedule = {"kind": "churn", "p": args.p, "seed": args.seed,
                    "script": None, "backbone": backbone}
    else:
        print(f"configuration error: unknown kind {args.kind!r}",
              file=sys.stderr)
        return EXIT_CONFIG

    mode = args.mode or ("auth" if corruptions else "slide")
    data = {
        "n": args.n, "mode": mode, "lam": args.lam, "sigma": None,
        "fragment_bytes": 2, "messages": args.messages,
        "max_transmissions": args.max_transmissions,
        "schedule": schedule, "corruptions": corruptions,
        "crypto_backend": "oracle", "seed": args.seed,
        "checks": "light", "trace": False,
    }
    try:
        Engine(Scenario.from_dict(data))
    except (CodecError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConformingError as exc:
        print(f"conforming violation: {exc}", file=sys.stderr)
        return EXIT_CONFORMING
    if args.out:
        _write_json(args.out, data)
        print(f"wrote {args.out}")
    else:
        json.dump(data, sys.stdout, sort_keys=True, indent=1)
        print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slidenet",
        description="Deterministic Slide-protocol adversarial routing "
                    "simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--trace", action="store_true",
                       help="record a per-round trace")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--mode", choices=["slide", "auth"], default=None)
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="replay invariants over a trace")
    p_audit.add_argument("trace")
    p_audit.set_defaults(func=cmd_audit)

    p_gen = sub.add_parser("gen", help="emit a validated scenario file")
    p_gen.add_argument("kind", choices=["honest", "churn", "attack"])
    p_gen.add_argument("--n", type=int, default=4)
    p_gen.add_argument("--lam", default="3/8")
    p_gen.add_argument("--messages", type=int, default=1)
    p_gen.add_argument("--max-transmissions", type=int, default=None)
    p_gen.add_argument("--p", type=float, default=0.2)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--mode", choices=["slide", "auth"], default=None)
    p_gen.add_argument("--behavior", default="deleter")
    p_gen.add_argument("--corrupt-node", type=int, default=None)
    p_gen.add_argument("--corrupt-round", type=int, default=1)
    p_gen.add_argument("--backbone", type=int, nargs="+", default=None)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
