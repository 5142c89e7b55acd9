"""CLI tests: JSON validity of every output, the exit-code contract, and
golden determinism."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from contentoracle.cli import EX_CONFIG, EX_IOERR, EX_USAGE, REPORT_SCHEMA, main
from tests.conftest import zip_with_script


@pytest.fixture
def config_file(tmp_path) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "sidecar_path": str(tmp_path / "sidecar.jsonl"),
        "backend": "sidecar",
    }))
    return str(path)


def run_cli(capsys, *argv: str) -> tuple[int, str]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def report_of(out: str) -> dict:
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


class TestCheck:
    def test_consistent_pdf_exits_zero(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4 body")
        code, out = run_cli(capsys, "--config", config_file, "check", str(target))
        doc = report_of(out)
        assert code == 0
        assert doc["verdict"] == "allow"
        assert doc["discrepancies"] == []
        assert doc["resolved_mime"] == "application/pdf"

    def test_zip_as_pdf_fixture_flags_and_fails(self, capsys, config_file, tmp_path):
        target = tmp_path / "report.pdf"
        target.write_bytes(zip_with_script())
        code, out = run_cli(capsys, "--config", config_file, "check", str(target))
        doc = report_of(out)
        assert code >= 1
        kinds = {d["kind"] for d in doc["discrepancies"]}
        assert "activity_flip" in kinds or "extension_sniff_mismatch" in kinds

    def test_warn_level_fixture_exits_one(self, capsys, config_file, tmp_path):
        # double extension over matching content: warning, not denial
        import gzip

        target = tmp_path / "notes.tar.gz"
        target.write_bytes(gzip.compress(b"inner"))
        code, out = run_cli(capsys, "--config", config_file, "check", str(target))
        doc = report_of(out)
        assert doc["verdict"] == "warn"
        assert code == 1

    def test_handler_policy_denies(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4 body")
        code, _ = run_cli(capsys, "--config", config_file,
                          "policy", "handlers", "set", str(target), "--apps", "viewerA")
        assert code == 0
        code, out = run_cli(capsys, "--config", config_file,
                            "check", str(target), "--handler", "viewerB")
        assert code == 2
        assert report_of(out)["verdict"] == "deny"

    def test_missing_file_is_io_error(self, capsys, config_file, tmp_path):
        code, _ = run_cli(capsys, "--config", config_file,
                          "check", str(tmp_path / "missing.bin"))
        assert code == EX_IOERR

    def test_determinism_with_pinned_now(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4 body")
        _, first = run_cli(capsys, "--config", config_file, "--now", "777",
                           "check", str(target))
        _, second = run_cli(capsys, "--config", config_file, "--now", "777",
                            "check", str(target))
        assert first == second


class TestIdentify:
    def test_reports_without_verdict(self, capsys, config_file, tmp_path):
        target = tmp_path / "img.gif"
        target.write_bytes(b"GIF89a\x01\x00\x01\x00")
        code, out = run_cli(capsys, "--config", config_file, "identify", str(target))
        doc = report_of(out)
        assert code == 0
        assert doc["verdict"] is None
        assert doc["sniff"]["candidates"][0]["mime"] == "image/gif"
        assert doc["name_report"]["logical_extension"] == "gif"


class TestScan:
    def test_ndjson_sorted_by_path(self, capsys, config_file, tmp_path):
        inbox = tmp_path / "inbox"
        inbox.mkdir()
        (inbox / "b.pdf").write_bytes(b"%PDF-1.4 ok")
        (inbox / "a.gif").write_bytes(b"GIF89a\x01\x00")
        (inbox / "c.txt").write_bytes(b"plain text\n")
        code, out = run_cli(capsys, "--config", config_file, "scan", str(inbox))
        lines = [json.loads(line) for line in out.strip().splitlines()]
        assert [Path(doc["path"]).name for doc in lines] == ["a.gif", "b.pdf", "c.txt"]
        for doc in lines:
            jsonschema.validate(doc, REPORT_SCHEMA)
        assert code == 0

    def test_parallel_output_identical(self, capsys, config_file, tmp_path):
        inbox = tmp_path / "inbox"
        inbox.mkdir()
        for i in range(6):
            (inbox / f"f{i}.pdf").write_bytes(b"%PDF-1.4 " + bytes([65 + i]))
        _, serial = run_cli(capsys, "--config", config_file, "scan", str(inbox))
        _, parallel = run_cli(capsys, "--config", config_file,
                              "scan", str(inbox), "--parallel", "4")
        assert serial == parallel

    def test_worst_verdict_wins(self, capsys, config_file, tmp_path):
        inbox = tmp_path / "inbox"
        inbox.mkdir()
        (inbox / "fine.pdf").write_bytes(b"%PDF-1.4 ok")
        (inbox / "evil.pdf").write_bytes(zip_with_script())
        code, _ = run_cli(capsys, "--config", config_file, "scan", str(inbox))
        assert code == 2


class TestViewTrustPolicy:
    def test_view_record_and_list(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4")
        code, out = run_cli(capsys, "--config", config_file, "--now", "100",
                            "view", "record", str(target),
                            "--app", "viewer", "--mime", "application/pdf")
        assert code == 0
        assert json.loads(out)["recorded"]["app"] == "viewer"
        code, out = run_cli(capsys, "--config", config_file, "view", "list", str(target))
        views = json.loads(out)["views"]
        assert len(views) == 1
        assert views[0]["t"] == 100
        assert views[0]["stale"] is False

    def test_trust_set_get(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4")
        _, out = run_cli(capsys, "--config", config_file, "--now", "100",
                         "trust", "set", str(target), "trusted")
        assert json.loads(out)["trust"] == "trusted"
        target.write_bytes(b"%PDF-1.4 modified")
        _, out = run_cli(capsys, "--config", config_file, "trust", "get", str(target))
        assert json.loads(out)["trust"] == "invalidated"

    def test_policy_set_get(self, capsys, config_file, tmp_path):
        target = tmp_path / "doc.pdf"
        target.write_bytes(b"%PDF-1.4")
        run_cli(capsys, "--config", config_file,
                "policy", "handlers", "set", str(target), "--apps", "a,b")
        _, out = run_cli(capsys, "--config", config_file,
                         "policy", "handlers", "get", str(target))
        doc = json.loads(out)
        assert doc["handlers"] == ["a", "b"]
        assert doc["restricts"] is True


class TestBrowser:
    def test_run_bundled_model(self, capsys, config_file):
        ctx = json.dumps({
            "content_type": "application/pdf",
            "extension_mime": "application/pdf",
            "auto_download": True,
        })
        code, out = run_cli(capsys, "--config", config_file,
                            "browser", "run", "firefox-like", "--ctx", ctx)
        assert code == 0
        assert json.loads(out)["action"] == "PromptDocType"

    def test_diff_bundled_models(self, capsys, config_file, runtime):
        from contentoracle.browser_model import differential, enumerate_grid, load_tree

        code, out = run_cli(capsys, "--config", config_file,
                            "browser", "diff", "firefox-like", "opera-like")
        doc = json.loads(out)
        assert code == 0
        assert doc["divergence_count"] > 0
        assert doc["grid_size"] == 5184
        # oracle: the unit-level differential over the same models
        ff = load_tree((runtime.models_dir / "firefox-like.tree").read_text(), "ff")
        op = load_tree((runtime.models_dir / "opera-like.tree").read_text(), "op")
        expected = differential(ff, op, enumerate_grid())
        assert doc["divergence_count"] == len(expected)


class TestFetchCommand:
    def test_fetch_then_check(self, capsys, config_file, tmp_path, http_server):
        url = http_server.add("/cli/report.pdf", b"%PDF-1.4 streamed",
                              headers=[("Content-Type", "application/pdf")])
        out_dir = tmp_path / "downloads"
        code, out = run_cli(capsys, "--config", config_file, "--now", "123",
                            "fetch", url, "--out", str(out_dir))
        doc = report_of(out)
        assert code == 0
        assert doc["url"] == url
        assert doc["provenance"]["origin_url"] == url
        assert doc["views"][0]["app"] == "contentoracle.ingest"

    def test_fetch_error_exit(self, capsys, config_file, tmp_path, http_server):
        code, _ = run_cli(capsys, "--config", config_file,
                          "fetch", http_server.url("/cli/absent"),
                          "--out", str(tmp_path / "d"))
        assert code == EX_IOERR


class TestDbStats:
    def test_bundled_snapshot(self, capsys, config_file):
        from contentoracle.config import DATA_DIR

        code, out = run_cli(capsys, "--config", config_file,
                            "db", "stats", str(DATA_DIR / "mime.snapshot.types"))
        doc = json.loads(out)
        assert code == 0
        assert doc["families"]["chemical"]["unknown_family"] > 0
        assert doc["malformed_lines"] == 0
        assert doc["total_types"] == sum(
            sum(f.values()) for f in doc["families"].values()
        )


class TestExitCodes:
    def test_exit_code_is_function_of_verdict_only(self):
        # property over the whole decision truth table: the code depends on
        # nothing but the verdict
        import itertools

        from contentoracle.cli import _VERDICT_CODE
        from contentoracle.policy_engine import Verdict, decide
        from tests.test_policy_engine import (
            HANDLER_CASES, SEVERITIES, TRUSTS, oracle, report_with,
        )

        expected_code = {Verdict.ALLOW: 0, Verdict.WARN: 1, Verdict.DENY: 2}
        for severity, trust, case in itertools.product(SEVERITIES, TRUSTS, HANDLER_CASES):
            handler, policy = HANDLER_CASES[case]
            decision = decide(report_with(severity), trust, handler, policy)
            assert _VERDICT_CODE[decision.verdict] == \
                expected_code[oracle(severity, trust, case)]

    def test_usage_error_is_64(self, capsys, config_file):
        assert main(["no-such-command"]) == EX_USAGE

    def test_missing_required_arg_is_64(self, capsys):
        assert main(["view", "record"]) == EX_USAGE

    def test_bad_mime_argument_is_64(self, capsys, config_file, tmp_path):
        target = tmp_path / "f.bin"
        target.write_bytes(b"x")
        code, _ = run_cli(capsys, "--config", config_file, "view", "record",
                          str(target), "--app", "a", "--mime", "notamime")
        assert code == EX_USAGE

    def test_config_error_is_78(self, capsys, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        assert main(["--config", str(bad), "trust", "get", "x"]) == EX_CONFIG

    def test_missing_explicit_config_is_78(self, capsys, tmp_path):
        assert main(["--config", str(tmp_path / "absent.json"),
                     "trust", "get", "x"]) == EX_CONFIG

    def test_unknown_config_key_is_78(self, capsys, tmp_path):
        bad = tmp_path / "extra.json"
        bad.write_text(json.dumps({"surprise": 1}))
        assert main(["--config", str(bad), "trust", "get", "x"]) == EX_CONFIG
