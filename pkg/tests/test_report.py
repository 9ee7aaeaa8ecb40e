import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mockcheck.errors import ContractError
from mockcheck.findings import (
    DATA_CHECK_IDS,
    FIX_CATALOG,
    MODEL_CHECK_IDS,
    Finding,
    fix_for,
    json_number,
    majority_vote,
    sort_findings,
)
from mockcheck.report import Report, render_report, run_repeated


def _f(check_id="missing_values", locus="", severity="error", **evidence):
    return Finding(check_id, severity, f"{check_id} at {locus}", evidence, locus)


class TestCatalog:
    def test_every_id_has_text(self):
        assert all(fix_for(c) for c in FIX_CATALOG)
        assert set(DATA_CHECK_IDS) | set(MODEL_CHECK_IDS) == set(FIX_CATALOG)

    def test_known_texts(self):
        assert fix_for("missing_values") == "remove or replace (impute) missing values before training"
        assert fix_for("oscillating_loss") == "reduce the learning rate or decrease batch size"

    def test_unknown(self):
        with pytest.raises(ContractError):
            fix_for("made_up")
        with pytest.raises(ContractError):
            _f("made_up")

    def test_severity_validated(self):
        with pytest.raises(ContractError):
            _f(severity="info")

    def test_stage_and_fix_filled(self):
        f = _f("learning_rate")
        assert f.stage == "model" and f.fix == fix_for("learning_rate")


class TestMajority:
    def test_two_of_three_kept(self):
        a = _f(locus="x")
        kept = majority_vote([[a], [a], []], 3)
        assert [k.key for k in kept] == [a.key]
        assert kept[0].evidence["runs_flagged"] == [0, 1]

    def test_one_of_three_dropped(self):
        assert majority_vote([[], [_f()], []], 3) == []

    def test_single_run_identity(self):
        run = [_f(locus="b"), _f(locus="a")]
        assert majority_vote([run], 1) == run

    def test_identity_ignores_message(self):
        a = _f(locus="x")
        b = Finding(a.check_id, a.severity, "reworded", {}, "x")
        assert len(majority_vote([[a], [b], []], 3)) == 1

    def test_locus_distinguishes(self):
        assert majority_vote([[_f(locus="a")], [_f(locus="b")], []], 3) == []

    @pytest.mark.parametrize("runs", [0, 2, 4])
    def test_runs_must_be_odd_positive(self, runs):
        with pytest.raises(ContractError):
            majority_vote([[]] * runs, runs)

    def test_length_must_match(self):
        with pytest.raises(ContractError):
            majority_vote([[], []], 3)

    @given(st.lists(st.sets(st.sampled_from(["a", "b", "c", "d"])), min_size=1, max_size=7).filter(
        lambda runs: len(runs) % 2 == 1))
    def test_never_invents_never_drops_unanimous(self, runs):
        per_run = [[_f(locus=k) for k in sorted(run)] for run in runs]
        kept = {f.locus for f in majority_vote(per_run, len(runs))}
        union = set().union(*runs)
        assert kept <= union
        assert set.intersection(*runs) <= kept
        for key in union:
            assert (key in kept) == (sum(key in r for r in runs) * 2 > len(runs))


class TestRepeated:
    def test_seeds_and_traces(self):
        seen = []

        def check(i, seed):
            seen.append((i, seed))
            return ([_f()] if i != 1 else []), {"run": i}

        kept, per_run, traces = run_repeated(check, 3, 10)
        assert seen == [(0, 10), (1, 11), (2, 12)]
        assert len(kept) == 1 and [len(r) for r in per_run] == [1, 0, 1]
        assert traces == [{"run": 0}, {"run": 1}, {"run": 2}]


def _report(findings=(), **kw):
    return Report(
        stage="model", interfaces={"data_interface": {"num_features": 3}}, config={"seed": 42},
        executed_checks=["input_shape"], findings=list(findings), **kw,
    )


class TestReport:
    def test_verdict(self):
        assert _report().verdict == "pass"
        assert _report([_f("missing_activation", severity="warning")]).verdict == "pass"
        assert _report([_f("input_shape")]).verdict == "fail"

    def test_sorted_by_check_then_index(self):
        findings = [_f(locus="z", column_index=2), _f("label_mismatch"), _f(locus="a", column_index=0)]
        assert [(f.check_id, f.locus) for f in _report(findings).findings] == [
            ("label_mismatch", ""), ("missing_values", "a"), ("missing_values", "z")]
        assert sort_findings(findings) == _report(findings).findings

    def test_empty_text_says_pass(self):
        text = render_report(_report()).decode()
        assert "PASS" in text and text.startswith("mockcheck model stage: PASS")

    def test_text_line_format(self):
        f = _f("loss_function")
        text = render_report(_report([f])).decode()
        assert f"LOSS_FUNCTION [error] {f.message} → {f.fix}" in text

    def test_json_round_trip(self):
        r = _report([_f(locus="a", count=3)], skipped_checks={"training_dynamics": "gated"},
                    per_run_findings=[[_f()]], traces=[{"losses": [1.0, "nan"]}])
        doc = json.loads(render_report(r, "json"))
        assert (doc["schema_version"], doc["verdict"]) == (1, "fail")
        assert Report.from_dict(doc) == r

    def test_json_stable_and_excludes_timings(self):
        r1 = _report([_f()], timings={"x": 0.1})
        r2 = _report([_f()], timings={"x": 0.2})
        assert render_report(r1, "json") == render_report(r2, "json")
        assert "timings" in json.loads(render_report(r1, "json", include_timings=True))

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_report(_report(), "xml")

    def test_schema_version_checked(self):
        with pytest.raises(ValueError):
            Report.from_dict({"schema_version": 2})

    def test_json_number(self):
        assert [json_number(v) for v in (1.5, float("nan"), float("inf"), float("-inf"))] == [1.5, "nan", "inf", "-inf"]
