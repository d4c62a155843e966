"""HTTP predictor client: label parsing, retry/backoff policy, batching.

All transports here are in-memory mocks and the sleeper is injected, so
nothing in this file touches the network or the wall clock.
"""

import pytest

from crashkit.errors import InvalidLabel, OutOfRange, TransportError
from crashkit.llm_client import (
    MockTransport,
    PredictRequest,
    backoff_schedule,
    parse_label,
    predict_batch,
    predict_one,
)
from crashkit.model import Task


def request(case_id="X1", task=Task.SEVERITY):
    return PredictRequest(task=task, system_text="You are a crash analyst.",
                          user_text="A crash happened.", case_id=case_id)


class TestPredictRequest:
    def test_payload_keys(self):
        payload = request().payload()
        assert list(payload) == ["task", "system", "user", "case_id"]
        assert payload["task"] == "severity"

    def test_empty_texts_rejected(self):
        with pytest.raises(OutOfRange):
            PredictRequest(task=Task.SEVERITY, system_text="",
                           user_text="x", case_id="a")
        with pytest.raises(OutOfRange):
            PredictRequest(task=Task.SEVERITY, system_text="x",
                           user_text="", case_id="a")


class TestParseLabel:
    def test_strict_exact_token(self):
        assert parse_label(Task.SEVERITY, " <FATAL> \n") == "K"

    def test_strict_rejects_prose(self):
        with pytest.raises(InvalidLabel):
            parse_label(Task.SEVERITY, "The answer is <FATAL>.")

    def test_lenient_extracts_single_token(self):
        text = "Based on the narrative I predict <REAR END COLLISIONS> here."
        assert parse_label(Task.ACCIDENT_TYPE, text, lenient=True) == "REC"

    def test_lenient_ambiguous_rejected(self):
        text = "Either <FATAL> or <MINOR INJURY> could apply."
        with pytest.raises(InvalidLabel):
            parse_label(Task.SEVERITY, text, lenient=True)

    def test_lenient_no_token_rejected(self):
        with pytest.raises(InvalidLabel):
            parse_label(Task.INJURY, "no idea", lenient=True)

    def test_injury_vocabulary(self):
        assert parse_label(Task.INJURY, "<THREE OR MORE>") == "THREE_OR_MORE"


class TestBackoffSchedule:
    def test_doubles_from_base(self):
        assert backoff_schedule(4, 0.5, 64.0) == [0.5, 1.0, 2.0, 4.0]

    def test_cumulative_ceiling_truncates(self):
        # 0.5 + 1.0 + 2.0 = 3.5; the fourth wait is capped to the remainder.
        assert backoff_schedule(5, 0.5, 4.0) == [0.5, 1.0, 2.0, 0.5]

    def test_zero_retries(self):
        assert backoff_schedule(0, 0.5, 30.0) == []

    def test_tight_ceiling_stops_early(self):
        assert backoff_schedule(8, 1.0, 1.0) == [1.0]


class TestPredictOne:
    def test_clean_success(self):
        transport = MockTransport({"X1": "<FATAL>"})
        outcome = predict_one(transport, request("X1"))
        assert outcome.label == "K"
        assert outcome.token == "<FATAL>"
        assert outcome.retries == 0
        assert outcome.error is None

    def test_transient_failures_retried(self):
        transport = MockTransport(
            {"X1": {"label": "<FATAL>", "fail_first": 2}})
        waits = []
        outcome = predict_one(transport, request("X1"),
                              retries=3, sleeper=waits.append)
        assert outcome.label == "K"
        assert outcome.retries == 2
        assert waits == [0.5, 1.0]

    def test_exhausted_retries_reported(self):
        transport = MockTransport({})
        waits = []
        outcome = predict_one(transport, request("gone"),
                              retries=2, sleeper=waits.append)
        assert outcome.label is None
        assert outcome.token is None
        assert outcome.error_code == TransportError.code
        assert outcome.retries == 2
        assert waits == [0.5, 1.0]

    def test_invalid_label_is_terminal(self):
        transport = MockTransport({"X1": "gibberish"})
        waits = []
        outcome = predict_one(transport, request("X1"),
                              retries=3, sleeper=waits.append)
        assert outcome.label is None
        assert outcome.error_code == InvalidLabel.code
        assert outcome.retries == 0
        assert waits == []
        # Raw text is kept for the error report.
        assert outcome.token == "gibberish"

    def test_lenient_mode_threads_through(self):
        transport = MockTransport({"X1": "I'd say <FATAL> overall."})
        strict = predict_one(transport, request("X1"))
        assert strict.label is None
        lenient = predict_one(transport, request("X1"), lenient=True)
        assert lenient.label == "K"

    def test_zero_retries_fail_fast(self):
        transport = MockTransport({"X1": {"label": "<FATAL>", "fail_first": 1}})
        waits = []
        outcome = predict_one(transport, request("X1"),
                              retries=0, sleeper=waits.append)
        assert outcome.label is None
        assert outcome.retries == 0
        assert waits == []


class TestPredictBatch:
    def test_order_preserved(self):
        transcript = {f"B{i:03d}": "<FATAL>" for i in range(20)}
        transport = MockTransport(transcript)
        requests = [request(cid) for cid in transcript]
        outcomes, report = predict_batch(transport, requests,
                                         max_in_flight=4,
                                         sleeper=lambda s: None)
        assert [o.case_id for o in outcomes] == list(transcript)
        assert report.total == 20
        assert report.succeeded == 20
        assert report.failed == 0
        assert report.retried_cases == 0

    def test_poison_case_does_not_sink_batch(self):
        transport = MockTransport({"good1": "<FATAL>", "bad": "mush",
                                   "good2": "<MINOR INJURY>"})
        requests = [request("good1"), request("bad"), request("missing"),
                    request("good2")]
        outcomes, report = predict_batch(transport, requests, retries=1,
                                         sleeper=lambda s: None)
        assert [o.label for o in outcomes] == ["K", None, None, "B"]
        assert report.succeeded == 2
        assert report.failed == 2
        codes = {e["case_id"]: e["code"] for e in report.errors}
        assert codes == {"bad": InvalidLabel.code,
                         "missing": TransportError.code}

    def test_retried_cases_counted(self):
        transport = MockTransport(
            {"flaky": {"label": "<FATAL>", "fail_first": 1},
             "steady": "<FATAL>"})
        outcomes, report = predict_batch(
            transport, [request("flaky"), request("steady")],
            sleeper=lambda s: None)
        assert report.retried_cases == 1
        assert all(o.label == "K" for o in outcomes)

    def test_deterministic_across_runs(self):
        transcript = {f"B{i:03d}": "<FATAL>" for i in range(30)}
        requests = [request(cid) for cid in transcript]
        runs = []
        for _ in range(2):
            outcomes, _ = predict_batch(MockTransport(transcript), requests,
                                        max_in_flight=8,
                                        sleeper=lambda s: None)
            runs.append([(o.case_id, o.label, o.retries) for o in outcomes])
        assert runs[0] == runs[1]

    def test_bad_concurrency_rejected(self):
        with pytest.raises(OutOfRange):
            predict_batch(MockTransport({}), [request()], max_in_flight=0)

    def test_empty_batch(self):
        outcomes, report = predict_batch(MockTransport({}), [],
                                         sleeper=lambda s: None)
        assert outcomes == []
        assert (report.total, report.succeeded, report.failed) == (0, 0, 0)
        assert report.errors == []

    def test_report_as_dict_keys(self):
        _, report = predict_batch(MockTransport({"X1": "<FATAL>"}),
                                  [request("X1")], sleeper=lambda s: None)
        assert list(report.as_dict()) == ["total", "succeeded", "failed",
                                          "retried_cases", "errors"]
