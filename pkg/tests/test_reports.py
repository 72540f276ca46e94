import json
import math

from parametrix.reports import VerificationReport, write_jsonl


def test_report_round_trip(tmp_path):
    rep = VerificationReport("demo")
    rep.add({"t": 0.1}, 1.0, 2.0)
    rep.add({"t": 0.2}, 3.0, 0.0)
    rep.fitted["c"] = math.inf
    assert rep.worst()["grid_point"] == {"t": 0.2}
    path = tmp_path / "r.jsonl"
    write_jsonl(path, [rep])
    lines = [json.loads(s) for s in path.read_text().splitlines()]
    assert [r["type"] for r in lines] == ["check", "check", "summary"]
    assert lines[-1]["fitted"]["c"] == "inf"
    assert lines[0]["ratio"] == 0.5
