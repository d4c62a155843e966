"""HTTP client for external predictor services.

Wire protocol: POST ``<endpoint>/predict`` with a JSON body
``{"task", "system", "user", "case_id"}``; the service answers
``{"label": "<TOKEN>", "raw": <anything>}``. The label must be one of the
task's canonical tokens. Transport failures are retried with exponential
backoff under a cumulative wait ceiling; a response carrying an unknown label
is a terminal error for that case and is never retried.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Protocol

from .errors import InvalidLabel, OutOfRange, TransportError
from .model import Task, token_to_class

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_BASE_S = 0.5
DEFAULT_BACKOFF_CEILING_S = 30.0


@dataclass(frozen=True)
class PredictRequest:
    task: Task
    system_text: str
    user_text: str
    case_id: str

    def __post_init__(self):
        if not self.system_text or not self.user_text:
            raise OutOfRange("prompt texts must be non-empty", case_id=self.case_id)

    def payload(self) -> dict:
        return {
            "task": self.task.value,
            "system": self.system_text,
            "user": self.user_text,
            "case_id": self.case_id,
        }


@dataclass(frozen=True)
class PredictResponse:
    label_token: str
    raw: object


@dataclass(frozen=True)
class PredictOutcome:
    case_id: str
    label: str | None        # class name, None on failure
    token: str | None
    retries: int
    error: str | None = None
    error_code: str | None = None


class Transport(Protocol):
    def send(self, request: PredictRequest) -> PredictResponse: ...


class HttpTransport:
    """requests-based transport; any network or non-2xx failure is TransportError.

    ``bearer_token`` is supplied by the caller from an environment variable;
    it never appears on a command line.
    """

    def __init__(self, endpoint: str, timeout_s: float = DEFAULT_TIMEOUT_S,
                 bearer_token: str | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._headers = {"Authorization": f"Bearer {bearer_token}"} if bearer_token else {}

    def send(self, request: PredictRequest) -> PredictResponse:
        import requests

        url = f"{self.endpoint}/predict"
        try:
            response = requests.post(url, json=request.payload(),
                                     headers=self._headers, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}", url=url,
                                 case_id=request.case_id) from exc
        if response.status_code != 200:
            raise TransportError(
                "predictor returned a non-200 status",
                status=response.status_code, url=url, case_id=request.case_id,
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise TransportError("predictor returned non-JSON body", url=url,
                                 case_id=request.case_id) from exc
        if not isinstance(body, dict) or "label" not in body:
            raise TransportError("predictor response lacks a label field", url=url,
                                 case_id=request.case_id)
        return PredictResponse(label_token=str(body["label"]), raw=body.get("raw"))


class MockTransport:
    """Offline transport backed by a case_id -> label transcript.

    The transcript maps each case_id to either a plain label string or an
    object ``{"label": ..., "fail_first": n}`` that fails with a transport
    error on the first n attempts. Unknown case ids always fail, mimicking an
    unreachable record.
    """

    def __init__(self, transcript: dict[str, object]):
        self._transcript = dict(transcript)
        self._attempts: dict[str, int] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "MockTransport":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def send(self, request: PredictRequest) -> PredictResponse:
        entry = self._transcript.get(request.case_id)
        if entry is None:
            raise TransportError("no transcript entry", case_id=request.case_id)
        self._attempts[request.case_id] = self._attempts.get(request.case_id, 0) + 1
        if isinstance(entry, dict):
            fail_first = int(entry.get("fail_first", 0))
            if self._attempts[request.case_id] <= fail_first:
                raise TransportError(
                    "scripted transport failure",
                    case_id=request.case_id, attempt=self._attempts[request.case_id],
                )
            label = str(entry["label"])
        else:
            label = str(entry)
        return PredictResponse(label_token=label, raw={"mock": True})


def parse_label(task: Task, text: str, lenient: bool = False) -> str:
    """Map a response label to a class name.

    Strict mode requires the stripped text to equal one canonical token.
    Lenient mode additionally accepts any text containing exactly one of the
    task's tokens as a substring, for providers that wrap the token in prose.
    """
    stripped = text.strip()
    tokens = task.tokens
    if stripped in tokens:
        return token_to_class(task, stripped)
    if lenient:
        found = [tok for tok in tokens if tok in text]
        if len(found) == 1:
            return token_to_class(task, found[0])
    raise InvalidLabel("response is not a valid task token", raw=text, task=task.value)


def backoff_schedule(retries: int, base_s: float, ceiling_s: float) -> list[float]:
    """Exponential wait per retry, truncated so the cumulative wait <= ceiling."""
    waits: list[float] = []
    total = 0.0
    for attempt in range(retries):
        wait = min(base_s * (2 ** attempt), max(ceiling_s - total, 0.0))
        if wait <= 0.0:
            break
        waits.append(wait)
        total += wait
    return waits


def predict_one(
    transport: Transport,
    request: PredictRequest,
    retries: int = DEFAULT_RETRIES,
    lenient: bool = False,
    backoff_base_s: float = DEFAULT_BACKOFF_BASE_S,
    backoff_ceiling_s: float = DEFAULT_BACKOFF_CEILING_S,
    sleeper: Callable[[float], None] = time.sleep,
) -> PredictOutcome:
    """Send one request, retrying transport failures only."""
    waits = backoff_schedule(retries, backoff_base_s, backoff_ceiling_s)
    attempts = 0
    while True:
        try:
            response = transport.send(request)
        except TransportError as exc:
            if attempts < len(waits):
                sleeper(waits[attempts])
                attempts += 1
                continue
            return PredictOutcome(
                case_id=request.case_id, label=None, token=None, retries=attempts,
                error=str(exc), error_code=exc.code,
            )
        try:
            label = parse_label(request.task, response.label_token, lenient=lenient)
        except InvalidLabel as exc:
            return PredictOutcome(
                case_id=request.case_id, label=None, token=response.label_token,
                retries=attempts, error=str(exc), error_code=exc.code,
            )
        return PredictOutcome(
            case_id=request.case_id, label=label, token=response.label_token,
            retries=attempts,
        )


@dataclass
class BatchReport:
    total: int = 0
    succeeded: int = 0
    failed: int = 0
    retried_cases: int = 0
    errors: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "total": self.total, "succeeded": self.succeeded, "failed": self.failed,
            "retried_cases": self.retried_cases, "errors": list(self.errors),
        }


def predict_batch(
    transport: Transport,
    requests_in: list[PredictRequest],
    max_in_flight: int = 4,
    retries: int = DEFAULT_RETRIES,
    lenient: bool = False,
    backoff_base_s: float = DEFAULT_BACKOFF_BASE_S,
    backoff_ceiling_s: float = DEFAULT_BACKOFF_CEILING_S,
    sleeper: Callable[[float], None] = time.sleep,
) -> tuple[list[PredictOutcome], BatchReport]:
    """Run requests with bounded concurrency; output order equals input order.

    Per-case failures are isolated: a failed case yields an outcome with
    ``label=None`` and an entry in the report, never an exception.
    """
    if max_in_flight < 1:
        raise OutOfRange("max_in_flight must be at least 1", given=max_in_flight)

    def run(request: PredictRequest) -> PredictOutcome:
        return predict_one(
            transport, request, retries=retries, lenient=lenient,
            backoff_base_s=backoff_base_s, backoff_ceiling_s=backoff_ceiling_s,
            sleeper=sleeper,
        )

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        outcomes = list(pool.map(run, requests_in))

    report = BatchReport(total=len(outcomes))
    for outcome in outcomes:
        if outcome.label is None:
            report.failed += 1
            report.errors.append({
                "case_id": outcome.case_id, "error": outcome.error,
                "code": outcome.error_code, "retries": outcome.retries,
            })
        else:
            report.succeeded += 1
        if outcome.retries:
            report.retried_cases += 1
    return outcomes, report
