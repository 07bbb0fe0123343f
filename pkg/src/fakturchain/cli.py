"""Command-line operations over a persisted network workspace.

A workspace directory pins a network config and an operation log. Every
command rebuilds the simulated network by replaying the log from the config
seed, applies its own operation, and persists the resulting block store, so
successive invocations observe one continuous ledger without a daemon. Replay
is deterministic, which is also what makes `export-trace` reproducible: equal
seeds and equal logs yield byte-identical trace files.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import crypto, identity, ledger
from .identity import IdentityError, Role
from .netsim import (
    BadConfig,
    Network,
    config_from_dict,
    config_to_dict,
    default_config,
    spawn_network,
)
from .scenarios import RUNNERS, ScenarioAssertionFailure, report_to_dict

CONFIG_FILE = "config.json"
OPLOG_FILE = "oplog.json"
STORE_FILE = "blocks.bin"
HEAD_FILE = "head.json"
CERTS_DIR = "certs"

BOOT_TICKS = 400


class CliError(Exception):
    pass


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _workspace(args: argparse.Namespace) -> Path:
    ws = Path(args.workspace)
    if not (ws / CONFIG_FILE).is_file():
        raise CliError(f"{ws} is not a workspace (missing {CONFIG_FILE})")
    return ws


def _issue(net: Network, index: int, subject: str, role: Role):
    """Deterministically derive and register one member credential."""
    rng = random.Random(f"{net.config.seed}/cli-cert/{index}")
    seed = rng.randbytes(32)
    keypair = crypto.KeyPair(seed)
    cert = identity.issue_certificate(net.ca, subject, role, keypair.public_bundle)
    net.certs[cert.cert_id] = cert
    return cert, seed


def _apply_op(net: Network, index: int, op: dict):
    kind = op.get("kind")
    if kind == "issue-cert":
        cert, _ = _issue(net, index, op["subject"], Role(op["role"]))
        return cert
    if kind == "submit-nsfp":
        body = {"tax_year": op["tax_year"], "count": op["count"]}
        return net.api(op["org"], "POST", "/api/v1/nsfp", body)
    if kind == "submit-faktur":
        return net.api(op["org"], "POST", "/api/v1/faktur", op["body"])
    raise CliError(f"unknown operation kind {kind!r} at log index {index}")


def _load_network(ws: Path) -> tuple[Network, list[dict]]:
    config = config_from_dict(_read_json(ws / CONFIG_FILE))
    oplog = _read_json(ws / OPLOG_FILE)
    net = spawn_network(config)
    if not net.run_until(lambda n: n.leader() is not None, BOOT_TICKS):
        raise CliError("no orderer leader elected within the boot budget")
    for index, op in enumerate(oplog):
        result = _apply_op(net, index, op)
        if hasattr(result, "status") and not result.ok:
            raise CliError(
                f"workspace replay diverged at log index {index}: {_describe(result)}"
            )
    return net, oplog


def _persist(ws: Path, net: Network) -> None:
    chain = net.org(net.djp_org).chain
    (ws / STORE_FILE).write_bytes(ledger.store_bytes(chain.blocks))
    head = {
        "height": chain.height,
        "state_hash": chain.state.state_hash().hex(),
        "tick": net.tick,
    }
    _write_json(ws / HEAD_FILE, head)


def _describe(resp) -> str:
    parts = [f"status {resp.status}"]
    if resp.error:
        parts.append(resp.error)
    reasons = (resp.body or {}).get("reasons")
    if reasons:
        parts.append("reasons: " + ", ".join(reasons))
    return "; ".join(parts)


def cmd_bootstrap(args: argparse.Namespace) -> int:
    if args.config:
        config = config_from_dict(_read_json(Path(args.config)))
        if args.seed is not None:
            from dataclasses import replace

            config = replace(config, seed=args.seed)
    else:
        config = default_config(seed=args.seed if args.seed is not None else 0)

    ws = Path(args.out)
    if (ws / CONFIG_FILE).exists():
        raise CliError(f"{ws} already holds a workspace")
    ws.mkdir(parents=True, exist_ok=True)

    net = spawn_network(config)
    if not net.run_until(lambda n: n.leader() is not None, BOOT_TICKS):
        raise CliError("no orderer leader elected within the boot budget")

    _write_json(ws / CONFIG_FILE, config_to_dict(config))
    _write_json(ws / OPLOG_FILE, [])
    _persist(ws, net)
    orgs = ", ".join(s.name for s in config.orgs)
    print(f"workspace {ws}: {len(config.orgs)} orgs ({orgs}), "
          f"{len(config.orderers)} orderers, leader {net.leader()} at tick {net.tick}")
    return 0


def cmd_issue_cert(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    net, oplog = _load_network(ws)
    op = {"kind": "issue-cert", "subject": args.org, "role": args.role}
    cert, seed = _issue(net, len(oplog), args.org, Role(args.role))
    oplog.append(op)
    _write_json(ws / OPLOG_FILE, oplog)

    certs_dir = ws / CERTS_DIR
    certs_dir.mkdir(exist_ok=True)
    _write_json(
        certs_dir / f"{cert.cert_id}.json",
        {
            "cert_id": cert.cert_id,
            "subject": cert.subject,
            "role": cert.role.value,
            "issued_at": cert.issued_at,
            "expires_at": cert.expires_at,
            "verification_key": cert.verification_key.hex(),
            "key_seed": seed.hex(),
        },
    )
    print(f"issued {cert.cert_id} for {cert.subject} ({cert.role.value})")
    return 0


def _run_mutation(ws: Path, op: dict) -> int:
    """Apply one mutating operation; the log records accepted operations only."""
    net, oplog = _load_network(ws)
    resp = _apply_op(net, len(oplog), op)
    if resp.ok:
        oplog.append(op)
        _write_json(ws / OPLOG_FILE, oplog)
        _persist(ws, net)
    if not resp.ok:
        print(_describe(resp), file=sys.stderr)
        return 1
    if op["kind"] == "submit-nsfp":
        serials = resp.body["serials"]
        print(f"allocated {len(serials)} serials in block {resp.block_number}: "
              f"{serials[0]} .. {serials[-1]}")
    else:
        print(f"faktur committed in block {resp.block_number}, "
              f"anchored {resp.body['anchored_hash']}")
    return 0


def cmd_submit_nsfp(args: argparse.Namespace) -> int:
    op = {
        "kind": "submit-nsfp",
        "org": args.org,
        "tax_year": args.tax_year,
        "count": args.count,
    }
    return _run_mutation(_workspace(args), op)


def cmd_submit_faktur(args: argparse.Namespace) -> int:
    if args.body == "-":
        body = json.load(sys.stdin)
    else:
        body = _read_json(Path(args.body))
    if not isinstance(body, dict):
        raise CliError("faktur body must be a JSON object")
    op = {"kind": "submit-faktur", "org": args.org, "body": body}
    return _run_mutation(_workspace(args), op)


def cmd_query(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    net, _ = _load_network(ws)
    query = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--param expects key=value, got {item!r}")
        query[key] = value
    resp = net.api(args.org, "GET", args.path, query=query or None)
    if not resp.ok:
        print(_describe(resp), file=sys.stderr)
        return 1
    print(json.dumps(resp.body, indent=2, sort_keys=True))
    return 0


def cmd_verify_chain(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    data = (ws / STORE_FILE).read_bytes()
    report = ledger.verify_store(data)
    if not report.ok:
        print(f"bad block at height {report.first_bad_block}", file=sys.stderr)
        return 1
    blocks = ledger.load_store(data)
    print(f"block store ok: {len(blocks)} blocks, head {blocks[-1].block_hash().hex()}")
    return 0


def cmd_run_scenario(args: argparse.Namespace) -> int:
    runner = RUNNERS[args.name]
    kwargs = {} if args.seed is None else {"seed": args.seed}
    try:
        report = runner(**kwargs)
    except ScenarioAssertionFailure as exc:
        print(f"scenario assertion failed: {exc}", file=sys.stderr)
        return 1
    print(report.summary())
    if args.out:
        _write_json(Path(args.out), report_to_dict(report))
        print(f"report written to {args.out}")
    return 0 if report.verdict.ok else 1


def cmd_export_trace(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    net, _ = _load_network(ws)
    out = Path(args.out) if args.out else ws / "trace.json"
    trace = net.export_trace()
    _write_json(out, trace)
    print(f"{len(trace)} trace events written to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="fakturchain",
        description="Operate a simulated e-invoice ledger network from a workspace directory.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bootstrap-network", help="create a workspace and spawn its network")
    b.add_argument("--out", required=True, help="workspace directory to create")
    b.add_argument("--config", help="network config JSON (defaults to a 3 PKP + DJP layout)")
    b.add_argument("--seed", type=int, help="override the config seed")
    b.set_defaults(func=cmd_bootstrap)

    i = sub.add_parser("issue-cert", help="issue a member credential from the network CA")
    i.add_argument("workspace")
    i.add_argument("--org", required=True, help="subject name for the new credential")
    i.add_argument("--role", choices=[Role.PKP.value, Role.DJP.value], default=Role.PKP.value)
    i.set_defaults(func=cmd_issue_cert)

    n = sub.add_parser("submit-nsfp", help="request a block of invoice serial numbers")
    n.add_argument("workspace")
    n.add_argument("--org", required=True)
    n.add_argument("--tax-year", type=int, required=True, help="two-digit allocation year")
    n.add_argument("--count", type=int, required=True)
    n.set_defaults(func=cmd_submit_nsfp)

    f = sub.add_parser("submit-faktur", help="submit one tax invoice for validation")
    f.add_argument("workspace")
    f.add_argument("--org", required=True)
    f.add_argument("--body", required=True, help="JSON file with the invoice fields, or - for stdin")
    f.set_defaults(func=cmd_submit_faktur)

    q = sub.add_parser("query", help="run one read-only API route")
    q.add_argument("workspace")
    q.add_argument("path", help="route path, e.g. /api/v1/nsfp or /api/v1/blocks/latest")
    q.add_argument("--org", required=True, help="org whose gateway answers (and signs the call)")
    q.add_argument("--param", action="append", help="query parameter as key=value")
    q.set_defaults(func=cmd_query)

    v = sub.add_parser("verify-chain", help="check the persisted block store end to end")
    v.add_argument("workspace")
    v.set_defaults(func=cmd_verify_chain)

    r = sub.add_parser("run-scenario", help="run one scripted attack scenario")
    r.add_argument("name", choices=sorted(RUNNERS))
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="write the scenario report JSON here")
    r.set_defaults(func=cmd_run_scenario)

    e = sub.add_parser("export-trace", help="replay the workspace and write its event trace")
    e.add_argument("workspace")
    e.add_argument("--out", help="trace file path (defaults to trace.json in the workspace)")
    e.set_defaults(func=cmd_export_trace)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, BadConfig, IdentityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
