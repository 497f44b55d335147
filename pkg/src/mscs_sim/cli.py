"""Command-line interface.

Subcommands:
  run          execute a scenario config; writes the event log, metrics and
               figures into the output directory
  attacks      list the attack catalog as a table or as records
  risk         print the risk-assessment report; optionally write the
               delimited report plus a rendered figure
  validate     decode a message file (hex or binary) and print the result

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .attacks import catalog
from .config import ConfigError, load, parse_detector_list
from .mscm import DecodeError, decode
from .risk import audit_catalog, render_report

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def _cmd_run(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from . import harness

    try:
        config = load(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.detectors is not None:
            config = replace(config,
                             detectors=parse_detector_list(args.detectors))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    result = harness.run(config, trace_kinematics=args.trace_kinematics)
    metrics = result.metrics

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "events.jsonl").write_bytes(result.log.to_jsonl())
        with open(out / "attribution.jsonl", "w", encoding="utf-8") as fh:
            for rec in result.attribution:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        with open(out / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        (out / "digest.txt").write_text(result.digest() + "\n")
        if not args.no_figures:
            from .figures import render_metrics

            render_metrics(metrics, out / "metrics.png")

    print(f"seed {config.seed}, {config.duration_ms} ms, "
          f"{metrics.channel['messages_sent']} messages, "
          f"{metrics.total_detection_events} detection events")
    for attack, info in sorted(metrics.per_attack.items()):
        latency = info["detection_latency_ms"]
        status = (f"flagged by {info['expected_detector']} after {latency} ms"
                  if info["flagged"] else "not flagged")
        print(f"  {attack}: {info['emissions']} emissions, {status}")
    fp = metrics.false_positives["_total"]
    print(f"  honest stations flagged: {fp}")
    if args.out:
        print(f"artifacts written to {args.out}")
    return EXIT_OK


def _cmd_attacks_list(args: argparse.Namespace) -> int:
    entries = catalog()
    if args.format == "records":
        for e in entries:
            print(json.dumps({
                "id": e.attack_id.value,
                "name": e.name,
                "selected": e.selected,
                "description": e.description,
                "defense": e.defense,
                "reproducibility": e.reproducibility.value,
                "impact": e.impact.value,
                "stealthiness": e.stealthiness.value,
                "overall": e.overall_label.value,
            }, sort_keys=True))
        return EXIT_OK
    header = f"{'id':<5}{'name':<26}{'R':<8}{'I':<8}{'S':<8}{'overall':<8}"
    print(header)
    print("-" * len(header))
    for e in entries:
        print(f"{e.attack_id.value:<5}{e.name:<26}{e.reproducibility.value:<8}"
              f"{e.impact.value:<8}{e.stealthiness.value:<8}"
              f"{e.overall_label.value:<8}")
    return EXIT_OK


def _cmd_risk_report(args: argparse.Namespace) -> int:
    audit = audit_catalog(catalog())
    print(render_report(audit, fmt=args.format), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "risk_report.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["attack", "reproducibility", "impact",
                             "stealthiness", "rule_overall",
                             "published_label", "discrepant"])
            for row in audit.rows:
                writer.writerow([row.attack, row.reproducibility.value,
                                 row.impact.value, row.stealthiness.value,
                                 row.rule_overall.value,
                                 row.paper_label.value, row.discrepant])
        (out / "risk_report.txt").write_text(render_report(audit, "table"))
        from .figures import render_risk_matrix

        render_risk_matrix(audit, out / "risk_matrix.png")
        print(f"report written to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.file)
    try:
        data = path.read_bytes()
    except OSError as err:
        print(f"cannot read {path}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    stripped = bytes(data.strip())
    if stripped and all(c in b"0123456789abcdefABCDEF \n\r\t" for c in stripped):
        try:
            data = bytes.fromhex(stripped.decode().replace("\n", "")
                                 .replace(" ", "").replace("\r", "")
                                 .replace("\t", ""))
        except ValueError:
            pass  # treat as binary after all
    try:
        msg = decode(data)
    except DecodeError as err:
        print(f"decode error: {err}")
        return EXIT_VALIDATION
    print(f"msg_type: {msg.msg_type.name}")
    print(f"source_id: {msg.source_id}")
    print(f"msg_timestamp: {msg.msg_timestamp}")
    print(f"maneuver_id: {msg.maneuver_id}")
    print(f"destination_ids: {list(msg.destination_ids)}")
    if msg.executant_ids:
        print(f"executant_ids: {list(msg.executant_ids)}")
    if msg.maneuver is not None:
        print(f"sub_maneuvers: {len(msg.maneuver.sub_maneuvers)}")
        for i, sub in enumerate(msg.maneuver.sub_maneuvers):
            loc = sub.trr.location
            print(f"  [{i}] executant {sub.executant_id} "
                  f"{sub.trr.trr_type.name} {loc} "
                  f"t=[{sub.start_time},{sub.end_time}] "
                  f"v=[{sub.min_speed},{sub.max_speed}] "
                  f"dims=({sub.executant_width},{sub.executant_length})")
    if msg.reason_code is not None:
        verdict = "agree" if msg.reason_code.agree else "disagree"
        print(f"reason_code: {verdict} ({msg.reason_code.code})")
    if msg.execution_status is not None:
        print(f"execution_status: {msg.execution_status.name}")
    if msg.signature is not None:
        print(f"signer: {msg.signature.signer_id}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mscs-sim",
        description="maneuver-coordination misbehavior sandbox")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config (and MSCS_SEED) seed")
    p_run.add_argument("--out", default=None,
                       help="directory for events.jsonl, metrics and figures")
    p_run.add_argument("--detectors", default=None,
                       help="comma-separated detector ids, e.g. D1,D5,D7x")
    p_run.add_argument("--trace-kinematics", action="store_true",
                       help="log per-tick vehicle states")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip rendering metrics figures")
    p_run.set_defaults(fn=_cmd_run)

    p_attacks = sub.add_parser("attacks", help="attack catalog")
    attacks_sub = p_attacks.add_subparsers(dest="attacks_command",
                                           required=True)
    p_list = attacks_sub.add_parser("list", help="print the 16-entry catalog")
    p_list.add_argument("--format", choices=("table", "records"),
                        default="table")
    p_list.set_defaults(fn=_cmd_attacks_list)

    p_risk = sub.add_parser("risk", help="risk assessment")
    risk_sub = p_risk.add_subparsers(dest="risk_command", required=True)
    p_report = risk_sub.add_parser("report", help="label audit report")
    p_report.add_argument("--format", choices=("table", "records"),
                          default="table")
    p_report.add_argument("--out", default=None,
                          help="directory for csv/txt report and figure")
    p_report.set_defaults(fn=_cmd_risk_report)

    p_val = sub.add_parser("validate", help="decode a message file")
    p_val.add_argument("file", help="hex or binary encoded message")
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if os.environ.get("MSCS_SEED") and getattr(args, "seed", None) is None \
            and args.command == "run":
        args.seed = int(os.environ["MSCS_SEED"])
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
