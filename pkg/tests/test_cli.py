from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
import yaml

from conftest import sample_html
from secextract.cli import build_parser, main
from secextract.corpus import build_corpus
from secextract.edgar import read_manifest, write_manifest
from secextract.pipeline import STAGES


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def corpus(tmp_path) -> Path:
    build_corpus(tmp_path)
    return tmp_path


def edit_config(root: Path, **changes) -> Path:
    path = root / "config.yaml"
    raw = yaml.safe_load(path.read_text())
    for k, v in changes.items():
        if v is None:
            raw.pop(k, None)
        else:
            raw[k] = v
    path.write_text(yaml.safe_dump(raw))
    return path


def keep_only(root: Path, ciks: set[int]) -> None:
    """Trim the corpus manifest to the given CIKs."""
    records = read_manifest(root / "manifest.csv")
    write_manifest([r for r in records if r.cik in ciks], root / "manifest.csv")


def test_help_lists_every_stage(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for stage in STAGES + ("run-all", "demo-corpus"):
        assert stage in out


def test_missing_config_key_is_usage_error(corpus, capsys):
    cfg = edit_config(corpus, cache_dir=None)
    assert main(["parse", "-c", str(cfg)]) == 2
    assert "cache_dir" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(corpus):
    with pytest.raises(SystemExit) as exc:
        main(["parse", "-c", str(corpus / "config.yaml"), "--bogus"])
    assert exc.value.code == 2


def test_stage_out_of_order_fails(corpus, capsys):
    assert main(["extract", "-c", str(corpus / "config.yaml")]) == 3
    assert "run parse first" in capsys.readouterr().err


SAMPLE_10K_CIKS = {896156, 1568100}


def test_extract_cam_on_sample_10ks(corpus, capsys):
    keep_only(corpus, SAMPLE_10K_CIKS)
    cfg = str(corpus / "config.yaml")
    assert main(["download", "-c", cfg]) == 0
    assert main(["parse", "-c", cfg]) == 0
    assert main(["extract", "-c", cfg, "--task", "cam"]) == 0
    rows = read_csv(corpus / "out" / "cam" / "extraction_log.csv")
    assert len(rows) == 2
    assert {r["doc_id"].split("_")[0]: r["report_status"] for r in rows} == {
        "896156": "BegEnd", "1568100": "CamEnd"}
    assert all(r["cam_status"] == "CamFound" for r in rows)
    capsys.readouterr()
    assert main(["extract", "-c", cfg, "--task", "cam"]) == 0
    assert "skipped, up to date" in capsys.readouterr().out


def test_dispatch_rerun_reports_zero_pending(corpus, capsys):
    cfg = str(corpus / "config.yaml")
    assert main(["download", "-c", cfg]) == 0
    assert main(["parse", "-c", cfg]) == 0
    for stage in ("extract", "build-prompts", "dispatch"):
        assert main([stage, "-c", cfg, "--task", "payratio"]) == 0
    jobs = read_csv(corpus / "out" / "payratio" / "jobs.csv")
    assert f"dispatch [payratio]: {len(jobs)} pending jobs" in capsys.readouterr().out
    assert main(["dispatch", "-c", cfg, "--task", "payratio"]) == 0
    assert "dispatch [payratio]: 0 pending jobs" in capsys.readouterr().out


def test_dispatch_failure_points_at_error_logs(corpus, capsys):
    cfg = edit_config(corpus, backend={"kind": "offline", "p_rate_limit": 1.0},
                      max_attempts=2, cooldown_s=1)
    rc = main(["run-all", "-c", str(cfg), "--task", "payratio"])
    err = capsys.readouterr().err
    assert rc == 3
    assert "api_errors.csv" in err
    rows = read_csv(corpus / "out" / "payratio" / "api_errors.csv")
    assert rows and {r["error_class"] for r in rows} == {"rate_limit"}


def test_run_all_payratio_offline(corpus, capsys):
    cfg = str(corpus / "config.yaml")
    assert main(["run-all", "-c", cfg, "--task", "payratio", "--backend", "offline"]) == 0
    out_dir = corpus / "out" / "payratio"
    rows = read_csv(out_dir / "payratio.csv")
    truth = read_csv(corpus / "payratio_truth.csv")
    assert {r["doc_id"] for r in rows} >= {t["doc_id"] for t in truth}
    report = (out_dir / "validation_report.txt").read_text()
    assert "<=1" in report
    assert (out_dir / "run_report.txt").exists()
    assert (corpus / "out" / "logs" / "run-all.log").exists()
    assert not (corpus / "out" / "cam").exists()


def test_out_dir_override(corpus, tmp_path_factory):
    other = tmp_path_factory.mktemp("elsewhere")
    assert main(["download", "-c", str(corpus / "config.yaml"), "--out-dir", str(other)]) == 0
    assert (other / "filings.csv").exists() and not (corpus / "out" / "filings.csv").exists()


def test_demo_corpus_command(tmp_path, capsys):
    assert main(["demo-corpus", str(tmp_path / "demo")]) == 0
    assert (tmp_path / "demo" / "config.yaml").exists()
    assert "wrote 33 filings" in capsys.readouterr().out


def test_fetch_index_and_download_over_http(tmp_path, mock_http):
    doc = sample_html("proxy_irobot_2022").encode()
    acc = "0001159167-22-000019"
    row = f"1159167|iRobot Corp|DEF 14A|2022-04-08|edgar/data/1159167/{acc}.txt"
    master = ("CIK|Company Name|Form Type|Date Filed|Filename\n" + "-" * 40 + "\n"
              + row + "\n" + row.replace("DEF 14A", "8-K").replace("019", "020") + "\n")
    page = ('<table class="tableFile"><tr><th>Seq</th><th>Description</th><th>Document</th>'
            '<th>Type</th></tr><tr><td>1</td><td>DEF 14A</td><td>'
            '<a href="/Archives/edgar/data/1159167/000115916722000019/proxy.htm">proxy.htm</a>'
            '</td><td>DEF 14A</td></tr></table>')

    def handler(rec):
        if rec.path.endswith("master.idx"):
            body = master if "2022/QTR2" in rec.path else master.split("\n-")[0] + "\n" + "-" * 40
            return 200, {}, body.encode()
        if rec.path.endswith("-index.htm"):
            return 200, {}, page.encode()
        if rec.path.endswith("proxy.htm"):
            return 200, {}, doc
        return 404, {}, b""

    srv = mock_http(handler)
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({
        "task": "payratio", "manifest": "manifest.csv", "cache_dir": "cache", "out_dir": "out",
        "edgar": {"user_agent": "Test Research test@example.com", "base_url": srv.url,
                  "quarters": ["2022Q1", "2022Q2"], "max_per_second": 50}}))
    assert main(["fetch-index", "-c", str(cfg)]) == 0
    [record] = read_manifest(tmp_path / "manifest.csv")
    assert record.cik == 1159167 and record.form_type == "DEF 14A"
    assert main(["download", "-c", str(cfg)]) == 0
    assert (tmp_path / "cache" / "1159167" / f"{acc}.htm").read_bytes() == doc
    assert all("Test Research" in r.headers.get("User-Agent", "") for r in srv.requests)
    n = len(srv.requests)
    assert main(["fetch-index", "-c", str(cfg)]) == 0
    assert len(srv.requests) == n  # stamped: no refetch on unchanged settings
    assert main(["run-all", "-c", str(cfg)]) == 0
    [row_out] = read_csv(tmp_path / "out" / "payratio" / "payratio.csv")
    assert (row_out["ceo_pay"], row_out["median_pay"], row_out["ratio_value"]) == (
        "6273391", "122236", "51")
    assert row_out["cik"] == "1159167" and row_out["filing_date"] == "2022-04-08"
    stats = json.loads((tmp_path / "out" / "payratio" / "dispatch_stats.json").read_text())
    assert stats["requests"] == 1
