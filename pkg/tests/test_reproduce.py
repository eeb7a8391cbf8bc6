import csv
import json

import pytest

from classtab.cli import main
from classtab.reproduce import CSV_COLUMNS, reproduce_paper, strip_timing, write_report


@pytest.fixture(scope="module")
def report():
    return reproduce_paper(seed=42, sections=["stability", "closed_forms", "invariance"])


def _case(report, name):
    return next(c for c in report["cases"] if c["name"] == name)


def test_f1_case(report):
    c = _case(report, "stability_f1_interior")
    assert c["status"] == "pass" and c["computed"] == pytest.approx(1.0, abs=0.01)
    assert c["paper_value"] == 1.0


def test_f2_is_documented_deviation(report):
    c = _case(report, "stability_f2_interior")
    assert c["status"] == "documented deviation"
    assert c["paper_value"] == 0.5 and c["computed"] == pytest.approx(0.375, abs=0.005)


def test_ratio_cases(report):
    assert _case(report, "ratio_n2")["computed"] == pytest.approx(1.12838, abs=1e-5)
    assert _case(report, "ratio_monotone_n1_64")["computed"] is True


def test_every_case_has_provenance(report):
    assert all(c["provenance"] in {"paper", "derived-oracle", "trivial"} for c in report["cases"])
    assert report["seed"] == 42 and report["failed"] == []


def test_write_report(tmp_path, report):
    jp, cp = write_report(report, tmp_path / "rep")
    assert json.loads(jp.read_text())["summary"] == report["summary"]
    rows = list(csv.DictReader(open(cp)))
    assert list(rows[0]) == CSV_COLUMNS and len(rows) == len(report["cases"])


def test_strip_timing():
    rep = {"runtime_s": 1.0, "cases": [{"name": "a", "runtime_s": 2.0}]}
    assert strip_timing(rep) == {"cases": [{"name": "a"}]}


def test_cli_exit_code_on_failure(monkeypatch, tmp_path):
    import classtab.cli as cli

    def fake(seed, out_path):
        return {"summary": {"pass": 0, "documented_deviation": 0, "fail": 1}, "runtime_s": 0.0,
                "failed": ["broken_case"]}

    monkeypatch.setattr(cli, "reproduce_paper", fake)
    assert main(["reproduce", "--out", str(tmp_path / "r")]) == 1
