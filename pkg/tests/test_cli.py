from __future__ import annotations

import io
import json

import pytest

from incident_rag.cli import run_command


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    status, manifest = run_command(list(argv), out, err)
    return status, manifest, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def malware_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("malware")
    status, *_ = run("fixture", "--kind", "malware-fakeauth", "--seed", "0", "--out", str(path))
    assert status == 0
    return path


@pytest.fixture(scope="module")
def ad_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("ad")
    assert run("fixture", "--kind", "ad-redteam", "--out", str(path))[0] == 0
    return path


@pytest.fixture(autouse=True)
def _isolate(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("K", "PROVIDER", "SEED", "TOKEN_BUDGET", "PARALLEL", "WINDOW_MINUTES", "REGISTRY"):
        monkeypatch.delenv(f"INCIDENT_RAG_{name}", raising=False)


def test_fixture_writes_bundle_and_manifest(malware_dir):
    names = {p.name for p in malware_dir.iterdir()}
    assert {"events.ndjson", "references.json", "scenario.yaml", "run_manifest.json"} <= names
    manifest = json.loads((malware_dir / "run_manifest.json").read_text())
    assert manifest["command"] == "fixture" and manifest["exit_status"] == 0


def test_eval_perfect_oracle_run(malware_dir, tmp_path):
    out = tmp_path / "scores.json"
    status, manifest, stdout, _ = run("eval", "--scenario", str(malware_dir), "--out", str(out))
    assert status == 0
    assert stdout.splitlines()[1].split()[-1] == "100"
    assert json.loads(out.read_text())["mean_recall"] == 1.0
    assert json.loads((tmp_path / "scores.json.manifest.json").read_text())["config"]["k"] == 7


def test_analyze_then_eval_report(malware_dir, tmp_path):
    report = tmp_path / "report.json"
    assert run("analyze", "--scenario", str(malware_dir), "--k", "3", "--out", str(report))[0] == 0
    doc = json.loads(report.read_text())
    assert len(doc["findings"]) == 5 and doc["metadata"]["k"] == 3
    status, _, stdout, _ = run("eval", "--scenario", str(malware_dir), "--report", str(report))
    assert status == 0
    assert stdout.splitlines()[1].split()[-1] == "93"


def test_index_then_analyze_from_index(malware_dir, tmp_path):
    index = tmp_path / "idx.bin"
    assert run("index", "--scenario", str(malware_dir), "--index", str(index))[0] == 0
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("analyze", "--scenario", str(malware_dir), "--index", str(index), "--out", str(a))[0] == 0
    assert run("analyze", "--scenario", str(malware_dir), "--out", str(b))[0] == 0
    docs = [json.loads(p.read_text())["findings"] for p in (a, b)]
    assert [f["answer"] for f in docs[0]] == [f["answer"] for f in docs[1]]


def test_rerun_is_deterministic(malware_dir, tmp_path):
    outs = []
    for name in ("one.json", "two.json"):
        assert run("sweep-k", "--scenario", str(malware_dir), "--k-values", "1,3,7", "--out", str(tmp_path / name))[0] == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    rows = json.loads(outs[0])["rows"]
    assert [round(100 * r["mean_recall"]) for r in rows] == [60, 93, 100]


def test_environment_and_flag_precedence(malware_dir, monkeypatch):
    monkeypatch.setenv("INCIDENT_RAG_K", "1")
    status, manifest, stdout, _ = run("eval", "--scenario", str(malware_dir))
    assert status == 0 and manifest.config["k"] == 1
    assert stdout.splitlines()[1].split()[-1] == "60"
    status, manifest, stdout, _ = run("eval", "--scenario", str(malware_dir), "--k", "3")
    assert manifest.config["k"] == 3
    assert stdout.splitlines()[1].split()[-1] == "93"


def test_ingest_and_extract(malware_dir, tmp_path):
    status, _, stdout, _ = run("ingest", "--scenario", str(malware_dir))
    assert status == 0 and "3694" in stdout
    out = tmp_path / "chunks.json"
    assert run("extract", "--scenario", str(malware_dir), "--out", str(out))[0] == 0
    assert out.exists()


def test_baseline_norag(malware_dir, tmp_path):
    out = tmp_path / "norag.json"
    assert run("baseline-norag", "--scenario", str(malware_dir), "--out", str(out))[0] == 0
    meta = json.loads(out.read_text())["metadata"]
    assert meta["events_included"] == 160 and meta["events_total"] == 3694


def test_windows_and_window_eval(ad_dir, tmp_path):
    out = tmp_path / "windows.json"
    assert run("windows", "--scenario", str(ad_dir), "--out", str(out))[0] == 0
    status, _, stdout, _ = run("eval", "--scenario", str(ad_dir))
    assert status == 0
    rows = stdout.strip().splitlines()
    assert len(rows) == 4
    assert "100%" in rows[1] and "75%" in rows[2] and "71%" in rows[3]


def test_cost_command():
    status, _, stdout, _ = run("cost", "--pricing", "claude")
    assert status == 0 and stdout.startswith("claude: 0.120")
    assert run("cost", "--pricing", "0.28/0.42")[2].startswith("0.28/0.42: 0.007")
    listing = run("cost")[2]
    assert "deepseek" in listing and "oracle" not in listing


def test_usage_errors_exit_2(tmp_path):
    assert run("frobnicate")[0] == 2
    assert run()[0] == 2
    assert run("cost", "--calls", "many")[0] == 2
    manifest = json.loads((tmp_path / "incident_rag_run.json").read_text())
    assert manifest["exit_status"] == 2


def test_domain_errors_exit_1_and_write_manifest(malware_dir, tmp_path):
    status, manifest, _, err = run("analyze", "--scenario", str(malware_dir), "--provider", "nope",
                                   "--manifest", str(tmp_path / "m.json"))
    assert status == 1 and "nope" in err
    assert json.loads((tmp_path / "m.json").read_text())["error"] == manifest.error
    assert run("ingest", "--scenario", str(tmp_path / "missing"))[0] == 1
    assert run("cost", "--pricing", "oracle?")[0] == 1


def test_missing_api_key_is_a_domain_error(malware_dir, monkeypatch):
    monkeypatch.delenv("ANTHROPIC_API_KEY", raising=False)
    status, _, _, err = run("analyze", "--scenario", str(malware_dir), "--provider", "claude")
    assert status == 1
    assert "question Q1" in err and "ANTHROPIC_API_KEY" in err
