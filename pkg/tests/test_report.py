import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bkfourier.errors import ReportError
from bkfourier.report import (
    FAIL,
    FINDING,
    PASS,
    STATUSES,
    CheckRecord,
    Report,
    emit_report,
    render_json,
    render_text,
)

words = st.text(st.characters(blacklist_categories=("Cs",)), max_size=12)
records = st.builds(
    CheckRecord,
    check_id=words,
    suite=st.sampled_from(["gauss", "kernels", "involutivity"]),
    group=st.sampled_from(["sl2", "pgl2", "torus"]),
    q=st.sampled_from([2, 3, 4, 5, 7]),
    status=st.sampled_from(STATUSES),
    theorem=st.booleans(),
    computed=st.none() | words,
    witness=st.none() | words,
    compared=st.none() | st.integers(0, 10**6),
    detail=st.dictionaries(words, words, max_size=3),
    seconds=st.floats(0, 100, allow_nan=False),
)


def record(status, theorem=True, name="check"):
    return CheckRecord(f"sl2-q3:kernels:{name}", "kernels", "sl2", 3, status, theorem=theorem)


class TestReport:
    def test_empty(self):
        report = Report("0.1.0", {})
        assert report.exit_code == 0
        assert report.summary() == {s: 0 for s in STATUSES}
        assert render_text(report).splitlines()[-1] == "0 pass, 0 fail, 0 finding"

    def test_exit_code(self):
        report = Report("0.1.0", {}, [record(PASS), record(FINDING, theorem=False)])
        assert report.exit_code == 0
        report.records.append(record(FAIL, name="broken"))
        assert report.exit_code == 1
        assert report.summary()[FAIL] == 1

    def test_failed_non_theorems_do_not_count(self):
        assert not record(FAIL, theorem=False).failed

    def test_timing_can_be_dropped(self):
        report = Report("0.1.0", {}, [record(PASS)])
        data = report.to_dict(timing=False)
        assert "seconds" not in data["records"][0]
        assert "seconds" in report.to_dict()["records"][0]

    @given(st.lists(records, max_size=5))
    def test_json_round_trip(self, rows):
        report = Report("0.1.0", {"groups": ["sl2"], "q_list": [3]}, rows, {"3": [1, 2, 0]})
        assert Report.from_dict(json.loads(render_json(report))) == report

    def test_text_lists_every_check(self):
        report = Report("0.1.0", {}, [record(PASS, name="a"), record(FINDING, False, "b")])
        text = render_text(report)
        assert text.startswith("bkfourier 0.1.0")
        assert "PASS     sl2-q3:kernels:a" in text
        assert "FINDING  sl2-q3:kernels:b" in text

    def test_emit_writes_the_file(self, tmp_path):
        report = Report("0.1.0", {}, [record(PASS)])
        path = tmp_path / "out" / "report.json"
        text = emit_report(report, "json", path)
        assert path.read_text(encoding="utf-8") == text
        assert json.loads(text)["summary"][PASS] == 1

    def test_emit_reports_io_errors(self, tmp_path):
        with pytest.raises(ReportError):
            emit_report(Report("0.1.0", {}), "text", tmp_path)
