"""Command-line front end: workspace lifecycle, exit codes, output modes."""

from __future__ import annotations

import json
import os

import pytest

from spada import dfci
from spada.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    LOCK_NAME,
    Workspace,
    main,
)


def run_cli(*argv: str) -> int:
    return main(list(argv))


@pytest.fixture
def ws(tmp_path):
    """An initialized workspace directory (reference study, pre-combination)."""
    root = tmp_path / "study"
    assert run_cli("-w", str(root), "init") == EXIT_OK
    return root


def test_init_writes_every_workspace_file(tmp_path, capsys):
    root = tmp_path / "fresh"
    assert run_cli("-w", str(root), "init") == EXIT_OK
    for name in dfci.WORKSPACE_FILES:
        assert (root / name).is_file(), name
    assert "initialized" in capsys.readouterr().out


def test_init_refuses_to_overwrite_without_force(ws, capsys):
    assert run_cli("-w", str(ws), "init") == EXIT_DATA
    assert "already exists" in capsys.readouterr().err
    assert run_cli("-w", str(ws), "init", "--force") == EXIT_OK


def test_bad_subcommand_is_a_usage_error(capsys):
    assert run_cli("no-such-command") == EXIT_USAGE
    assert run_cli() == EXIT_USAGE


def test_replay_is_deterministic_across_invocations(ws, capsys):
    assert run_cli("-w", str(ws), "replay", "--json") == EXIT_OK
    first = json.loads(capsys.readouterr().out)
    assert run_cli("-w", str(ws), "replay", "--json") == EXIT_OK
    second = json.loads(capsys.readouterr().out)
    assert first["digest"] == second["digest"]
    assert first["counts"] == second["counts"]
    assert first["counts"]["collected"] == 46


def test_run_completes_the_combination_pass(ws, capsys):
    assert run_cli("-w", str(ws), "run", "--json") == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["counts"]["combined"] == 291
    assert payload["counts"]["total"] == 298
    steps = [f["step"] for f in payload["flows"]]
    assert steps == ["Step1", "Step2", "Step3"]
    # The combine records persist: a later replay sees the same state.
    assert run_cli("-w", str(ws), "replay", "--json") == EXIT_OK
    again = json.loads(capsys.readouterr().out)
    assert again["digest"] == payload["digest"]


def test_verify_passes_on_the_completed_study(ws, capsys):
    assert run_cli("-w", str(ws), "run") == EXIT_OK
    capsys.readouterr()
    assert run_cli("-w", str(ws), "verify") == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("PASS")


def test_verify_fails_with_exit_three_on_mismatch(ws, tmp_path, capsys):
    assert run_cli("-w", str(ws), "run") == EXIT_OK
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"combined": 290}), encoding="utf-8")
    assert run_cli("-w", str(ws), "verify", "--expect", str(wrong)) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "MISMATCH" in out and "FAIL" in out


def test_verify_before_combination_reports_the_gap(ws, capsys):
    # The initialized ledger stops after asset grouping, so the combined
    # count is still zero and verification honestly fails.
    assert run_cli("-w", str(ws), "verify") == EXIT_VERIFY


def test_apply_discard_of_unknown_id_is_a_data_error(ws, capsys):
    # The initialized ledger already carries Step-2 records, so the operation
    # is tagged Step2 to reach the id lookup rather than the step-order guard.
    rc = run_cli(
        "-w", str(ws), "apply", "discard", "no-such-id", "--reason", "x", "--step", "Step2"
    )
    assert rc == EXIT_DATA
    assert "no threat" in capsys.readouterr().err


def test_apply_step_going_backwards_is_a_data_error(ws, capsys):
    # The packaged ledger has progressed to Step2; Step1 can't follow it.
    rc = run_cli(
        "-w", str(ws), "apply", "discard", "no-such-id", "--reason", "x", "--step", "Step1"
    )
    assert rc == EXIT_DATA
    assert "backwards" in capsys.readouterr().err


def test_apply_without_step_follows_the_study(ws, capsys):
    # No --step: the record is tagged with the ledger's current step, so the
    # only complaint is about the unknown threat, not about step order.
    rc = run_cli("-w", str(ws), "apply", "discard", "no-such-id", "--reason", "x")
    assert rc == EXIT_DATA
    err = capsys.readouterr().err
    assert "no threat" in err
    assert "backwards" not in err


def test_apply_discard_appends_to_the_ledger(ws, capsys):
    workspace = Workspace.resolve(str(ws))
    head_before = workspace.load_ledger().head_seq
    # Pick an active, never-combined threat id from the catalog.
    from spada.oplog import replay

    snapshot = replay(workspace.load_ledger(), workspace.load_catalog())
    target = snapshot.find_threat_by_description("Poor training")
    rc = run_cli(
        "-w", str(ws), "apply", "discard", target.id,
        "--reason", "test", "--step", "Step2", "--json",
    )
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["record"]["seq"] == head_before + 1
    assert workspace.load_ledger().head_seq == head_before + 1


def test_apply_embrace_and_derive_round_trip(ws, capsys):
    from spada.oplog import replay

    workspace = Workspace.resolve(str(ws))
    snapshot = replay(workspace.load_ledger(), workspace.load_catalog())
    a = snapshot.find_threat_by_description("Poor training")
    b = snapshot.find_threat_by_description("Unclear data ownership and accountability")
    rc = run_cli(
        "-w", str(ws), "apply", "embrace", a.id, b.id,
        "--description", "Organizational readiness gaps", "--step", "Step2", "--json",
    )
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["record"]["kind"] == "Embrace"
    snapshot = replay(workspace.load_ledger(), workspace.load_catalog())
    assert snapshot.find_threat_by_description("Organizational readiness gaps") is not None


def test_suggest_reports_threshold_and_metric(ws, capsys):
    assert run_cli("-w", str(ws), "suggest", "--json") == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["threshold"] == 0.5  # from config.toml
    assert payload["metric"] == "jaccard"
    rc = run_cli("-w", str(ws), "suggest", "--threshold", "0.9", "--metric", "cosine", "--json")
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["threshold"] == 0.9
    assert payload["metric"] == "cosine"


def test_environment_overrides_threshold_and_metric(ws, capsys, monkeypatch):
    monkeypatch.setenv("SPADA_THRESHOLD", "0.25")
    monkeypatch.setenv("SPADA_METRIC", "cosine")
    assert run_cli("-w", str(ws), "suggest", "--json") == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["threshold"] == 0.25
    assert payload["metric"] == "cosine"


def test_workspace_resolves_from_environment(ws, capsys, monkeypatch):
    monkeypatch.setenv("SPADA_WORKSPACE", str(ws))
    assert run_cli("replay", "--json") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["counts"]["collected"] == 46


def test_invalid_threshold_is_a_data_error(ws, capsys):
    assert run_cli("-w", str(ws), "suggest", "--threshold", "1.5") == EXIT_DATA


def test_export_writes_the_model_table(ws, tmp_path, capsys):
    assert run_cli("-w", str(ws), "run") == EXIT_OK
    out_file = tmp_path / "model.csv"
    assert run_cli("-w", str(ws), "export", "-o", str(out_file)) == EXIT_OK
    text = out_file.read_text(encoding="utf-8")
    assert text.startswith("id,description,dependency,")
    assert "Cross-border data privacy concerns" in text


def test_export_reserve_list_to_stdout(ws, capsys):
    assert run_cli("-w", str(ws), "export", "--reserve") == EXIT_OK
    out = capsys.readouterr().out
    assert "Denial of service attack" in out
    assert dfci.DISCARD_REASON in out


def test_diagram_emits_parseable_mermaid(ws, capsys):
    assert run_cli("-w", str(ws), "run") == EXIT_OK
    capsys.readouterr()
    assert run_cli("-w", str(ws), "diagram") == EXIT_OK
    from spada.reportio import parse_mermaid_flowchart

    nodes, _, _ = parse_mermaid_flowchart(capsys.readouterr().out)
    assert nodes["step1_collected"] == "collected: 46"
    assert nodes["step3_total"] == "total: 298"


def test_missing_workspace_is_a_data_error(tmp_path, capsys):
    assert run_cli("-w", str(tmp_path / "vacant"), "replay") == EXIT_DATA
    assert "no catalog" in capsys.readouterr().err


def test_mutations_respect_a_live_lock(ws, capsys):
    lock = ws / LOCK_NAME
    lock.write_text(str(os.getpid()), encoding="utf-8")
    try:
        rc = run_cli("-w", str(ws), "apply", "discard", "any", "--reason", "x", "--step", "Step2")
        # Same-pid locks are treated as our own; use an impossible live pid
        # to simulate another holder. PID 1 always exists.
        lock.write_text("1", encoding="utf-8")
        rc = run_cli("-w", str(ws), "apply", "discard", "any", "--reason", "x", "--step", "Step2")
        assert rc == EXIT_DATA
        assert "locked by pid 1" in capsys.readouterr().err
    finally:
        lock.unlink(missing_ok=True)


def test_stale_lock_from_a_dead_process_is_replaced(ws, capsys):
    lock = ws / LOCK_NAME
    lock.write_text("999999999", encoding="utf-8")  # far beyond pid_max
    rc = run_cli("-w", str(ws), "suggest")
    assert rc == EXIT_OK  # read path ignores locks entirely
    # A mutating command clears the stale lock and proceeds to its own error.
    rc = run_cli("-w", str(ws), "apply", "discard", "missing", "--reason", "x", "--step", "Step2")
    assert rc == EXIT_DATA
    assert not lock.exists()


def test_import_collects_new_threats(ws, tmp_path, capsys):
    csv_file = tmp_path / "extra.csv"
    csv_file.write_text(
        "description,origin,dependency,agents,properties\n"
        "Brand new synthetic threat,nist,,,\n",
        encoding="utf-8",
    )
    assert run_cli("-w", str(ws), "import", "threats", str(csv_file)) == EXIT_OK
    workspace = Workspace.resolve(str(ws))
    catalog = workspace.load_catalog()
    assert catalog.find_threat_by_description("Brand new synthetic threat") is not None
