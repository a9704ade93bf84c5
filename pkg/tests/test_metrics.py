import json

import pytest

from prefalign.errors import InputError, UndefinedResultError
from prefalign.jsonl import canonical_lines, read_jsonl, write_jsonl
from prefalign.metrics import (
    PrefRecord,
    dim_accuracy,
    preference_accuracy,
    summarize_run,
    summarize_run_file,
    write_curves_csv,
)
from prefalign.tokens import Verdict

A, B, T = Verdict.A, Verdict.B, Verdict.TIE


def records(preds, labels):
    return [PrefRecord(prediction=p, label=l) for p, l in zip(preds, labels)]


def test_protocol_fixture_from_contract():
    recs = records([A, B, T], [A, T, T])
    assert preference_accuracy(recs, "diff") == pytest.approx(1.0)
    assert preference_accuracy(recs, "tau") == pytest.approx(2 / 3)


def test_perfect_predictions_both_modes():
    recs = records([A, B, T, B], [A, B, T, B])
    assert preference_accuracy(recs, "tau") == 1.0
    assert preference_accuracy(recs, "diff") == 1.0


def test_tau_equals_diff_without_ties():
    recs = records([A, B, A, B], [A, A, A, B])
    assert preference_accuracy(recs, "tau") == preference_accuracy(recs, "diff") == 0.75


def test_diff_counts_tie_predictions_wrong():
    recs = records([T, T], [A, B])
    assert preference_accuracy(recs, "diff") == 0.0


def test_permutation_invariance():
    recs = records([A, B, T, A, B], [B, B, T, A, T])
    rev = list(reversed(recs))
    for mode in ("tau", "diff"):
        assert preference_accuracy(recs, mode) == preference_accuracy(rev, mode)


def test_protocol_errors():
    with pytest.raises(InputError):
        preference_accuracy([], "tau")
    with pytest.raises(UndefinedResultError):
        preference_accuracy(records([A, B], [T, T]), "diff")
    with pytest.raises(InputError):
        preference_accuracy(records([A], [A]), "kendall")


def test_dim_accuracy():
    assert dim_accuracy([3, 3, 2], [3, 2, 2]) == pytest.approx(2 / 3)
    assert dim_accuracy([1, 2], [1, 2]) == 1.0
    assert dim_accuracy([1, 2], [3, 4]) == 0.0
    with pytest.raises(InputError):
        dim_accuracy([1], [1, 2])
    with pytest.raises(InputError):
        dim_accuracy([], [])


# --- run summaries -----------------------------------------------------------------------


def test_summarize_empty_stream():
    report = summarize_run([])
    assert report.n_rows == 0 and report.n_malformed == 0
    assert report.means == {}


def test_summarize_single_line():
    report = summarize_run(['{"step": 0, "loss": 2.0}'])
    assert report.n_rows == 1
    assert report.first == {"step": 0.0, "loss": 2.0}
    assert report.last == report.first


def test_summarize_fixture_aggregates():
    lines = [
        '{"step": 0, "loss": 3.0, "dynamic_degree": 0.5}',
        '{"step": 1, "loss": 2.0, "dynamic_degree": 0.4}',
        '{"step": 2, "loss": 1.0, "dynamic_degree": 0.6}',
    ]
    report = summarize_run(lines)
    assert report.n_rows == 3
    assert report.means["loss"] == pytest.approx(2.0)
    assert report.first["dynamic_degree"] == 0.5
    assert report.last["dynamic_degree"] == 0.6
    text = report.to_text()
    assert "mean loss: 2" in text


def test_summarize_malformed_line_reported_and_skipped():
    lines = ['{"step": 0, "loss": 1.0}', "{broken", '{"step": 1, "loss": 3.0}']
    report = summarize_run(lines)
    assert report.n_rows == 2
    assert report.n_malformed == 1
    assert report.malformed_lines[0][0] == 2
    assert report.means["loss"] == pytest.approx(2.0)


def test_jsonl_roundtrip_and_ts_isolation(tmp_path):
    rows = [{"step": 0, "loss": 1.5}, {"step": 1, "loss": 1.25}]
    path = tmp_path / "m.jsonl"
    write_jsonl(path, rows)
    loaded = read_jsonl(path)
    assert all("ts" in r for r in loaded)
    canon = canonical_lines(path)
    assert canon == [json.dumps(r) for r in rows]
    report = summarize_run_file(path)
    assert "ts" not in report.means


def test_curves_csv(tmp_path):
    rows = [{"step": 0, "loss": 1.0, "extra": "x"}, {"step": 1, "loss": 0.5}]
    path = tmp_path / "curves.csv"
    write_curves_csv(path, rows, ["step", "loss"])
    lines = path.read_text().splitlines()
    assert lines[0] == "step,loss"
    assert lines[1] == "0,1.0"
    assert len(lines) == 3
