"""Workspace CLI: bootstrap, mutate, replay, verify, and trace export.

Commands run in-process through cli.main so exit codes and stdout/stderr are
asserted directly. Every mutating command replays the operation log from the
seed, so the checks here lean on byte-level comparisons between runs.
"""

import json
import random

import pytest

from fakturchain import cli
from fakturchain.scenarios import faktur_body


def _run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def ws(tmp_path, capsys):
    path = tmp_path / "ws"
    assert _run("bootstrap-network", "--out", path, "--seed", "7") == 0
    capsys.readouterr()
    return path


def _allocate(ws, capsys, count=3):
    assert _run("submit-nsfp", ws, "--org", "pkp-01", "--tax-year", "25",
                "--count", count) == 0
    out = capsys.readouterr().out
    first = out.split(": ", 1)[1].split(" ..")[0].strip()
    return [first[:-8] + f"{int(first[-8:]) + i:08d}" for i in range(count)]


def test_bootstrap_creates_workspace(ws):
    assert (ws / "config.json").is_file()
    assert json.loads((ws / "oplog.json").read_text()) == []
    assert (ws / "blocks.bin").is_file()
    head = json.loads((ws / "head.json").read_text())
    assert head["height"] == 0


def test_bootstrap_refuses_existing_workspace(ws, capsys):
    assert _run("bootstrap-network", "--out", ws, "--seed", "7") == 1
    assert "already holds a workspace" in capsys.readouterr().err


def test_bootstrap_with_config_file(tmp_path, capsys):
    from fakturchain.netsim import config_to_dict, default_config

    config_path = tmp_path / "net.json"
    config_path.write_text(json.dumps(config_to_dict(default_config(seed=3, pkp_count=2))))
    out_dir = tmp_path / "custom"
    assert _run("bootstrap-network", "--out", out_dir, "--config", config_path,
                "--seed", "9") == 0
    stored = json.loads((out_dir / "config.json").read_text())
    assert stored["seed"] == 9
    assert len(stored["orgs"]) == 3


def test_submit_nsfp_and_head_advances(ws, capsys):
    serials = _allocate(ws, capsys)
    assert serials[0].startswith("010.000.25.")
    head = json.loads((ws / "head.json").read_text())
    assert head["height"] >= 1
    oplog = json.loads((ws / "oplog.json").read_text())
    assert [op["kind"] for op in oplog] == ["submit-nsfp"]


def test_rejected_submission_exits_1_and_leaves_log(ws, capsys):
    before = (ws / "oplog.json").read_bytes()
    assert _run("submit-nsfp", ws, "--org", "pkp-01", "--tax-year", "99",
                "--count", "1") == 1
    err = capsys.readouterr().err
    assert "BadYear" in err
    assert (ws / "oplog.json").read_bytes() == before


def test_submit_faktur_from_file(ws, capsys, tmp_path):
    serials = _allocate(ws, capsys)
    body_path = tmp_path / "invoice.json"
    body_path.write_text(json.dumps(faktur_body(serials[0], "pkp-01", 0)))
    assert _run("submit-faktur", ws, "--org", "pkp-01", "--body", body_path) == 0
    out = capsys.readouterr().out
    assert "anchored" in out
    oplog = json.loads((ws / "oplog.json").read_text())
    assert oplog[-1]["kind"] == "submit-faktur"


def test_submit_faktur_from_stdin(ws, capsys, monkeypatch):
    import io

    serials = _allocate(ws, capsys)
    body = faktur_body(serials[0], "pkp-01", 1)
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(body)))
    assert _run("submit-faktur", ws, "--org", "pkp-01", "--body", "-") == 0


def test_duplicate_faktur_rejected_on_second_run(ws, capsys, tmp_path):
    serials = _allocate(ws, capsys)
    body_path = tmp_path / "invoice.json"
    body_path.write_text(json.dumps(faktur_body(serials[0], "pkp-01", 0)))
    assert _run("submit-faktur", ws, "--org", "pkp-01", "--body", body_path) == 0
    capsys.readouterr()
    assert _run("submit-faktur", ws, "--org", "pkp-01", "--body", body_path) == 1
    assert "duplicate" in capsys.readouterr().err


def test_issue_cert_writes_credential_file(ws, capsys):
    assert _run("issue-cert", ws, "--org", "pkp-99", "--role", "pkp") == 0
    out = capsys.readouterr().out
    cert_id = out.split()[1]
    record = json.loads((ws / "certs" / f"{cert_id}.json").read_text())
    assert record["subject"] == "pkp-99"
    assert len(bytes.fromhex(record["key_seed"])) == 32
    # The derived credential signs requests the replayed network accepts.
    assert _run("query", ws, "/api/v1/nsfp", "--org", "pkp-01") == 0


def test_query_routes(ws, capsys):
    _allocate(ws, capsys)
    assert _run("query", ws, "/api/v1/nsfp", "--org", "pkp-01",
                "--param", "tax_year=25") == 0
    body = json.loads(capsys.readouterr().out)
    assert body["allocations"]
    assert _run("query", ws, "/api/v1/blocks/latest", "--org", "pkp-01") == 0
    block = json.loads(capsys.readouterr().out)
    assert block["block"]["number"] >= 1

    assert _run("query", ws, "/api/v1/missing", "--org", "pkp-01") == 1
    assert "status 404" in capsys.readouterr().err

    assert _run("query", ws, "/api/v1/nsfp", "--org", "pkp-01", "--param", "oops") == 1
    assert "key=value" in capsys.readouterr().err


def test_verify_chain_clean_and_corrupted(ws, capsys):
    _allocate(ws, capsys)
    assert _run("verify-chain", ws) == 0
    assert "block store ok" in capsys.readouterr().out

    data = bytearray((ws / "blocks.bin").read_bytes())
    rng = random.Random("cli-flip")
    data[rng.randrange(len(data))] ^= 0x20
    (ws / "blocks.bin").write_bytes(bytes(data))
    assert _run("verify-chain", ws) == 1
    assert "bad block at height" in capsys.readouterr().err


def test_traces_are_byte_identical_across_replays(ws, capsys, tmp_path):
    _allocate(ws, capsys)
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    assert _run("export-trace", ws, "--out", first) == 0
    assert _run("export-trace", ws, "--out", second) == 0
    assert first.read_bytes() == second.read_bytes()


def test_equal_seeds_build_identical_workspaces(tmp_path, capsys):
    stores = []
    for name in ("one", "two"):
        path = tmp_path / name
        assert _run("bootstrap-network", "--out", path, "--seed", "21") == 0
        assert _run("submit-nsfp", path, "--org", "pkp-02", "--tax-year", "25",
                    "--count", "2") == 0
        stores.append((path / "blocks.bin").read_bytes())
        capsys.readouterr()
    assert stores[0] == stores[1]


def test_commands_refuse_non_workspace(tmp_path, capsys):
    stray = tmp_path / "empty"
    stray.mkdir()
    assert _run("submit-nsfp", stray, "--org", "pkp-01", "--tax-year", "25",
                "--count", "1") == 1
    assert "not a workspace" in capsys.readouterr().err


def test_run_scenario_writes_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert _run("run-scenario", "phishing", "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["scenario"] == "phishing"
    assert all(report["verdict"].values())
    stdout = capsys.readouterr().out
    assert "verdict: PASS" in stdout
