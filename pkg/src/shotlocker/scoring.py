"""Label probability scoring through a pluggable scorer.

A scorer takes a prompt plus candidate continuation strings and returns one
log-probability per continuation (the summed token log-probabilities: the
product of token probabilities computed in log space). Two kinds exist:

* ``remote`` - HTTP POST ``<endpoint>/v1/score`` with body
  ``{"model", "prompt", "continuations"}`` answered by
  ``{"scores": [{"logprob", "token_count"}, ...]}`` in request order.
  ``SHOTLOCKER_SCORER_URL`` overrides the configured endpoint. An optional
  cassette file (JSON lines of request/response pairs) records live
  responses or replays them offline.
* ``mock`` - a deterministic test double, see :func:`mock_score`.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

from .errors import (
    CassetteMissError,
    ConfigError,
    EmptyInputError,
    ScorerTransportError,
)

ENV_SCORER_URL = "SHOTLOCKER_SCORER_URL"

SCORER_KINDS = ("remote", "mock")
MOCK_MODES = ("hash", "label-echo")
CASSETTE_MODES = ("record", "replay")


@dataclass(frozen=True)
class ScoreRequest:
    prompt: str
    continuations: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "continuations", tuple(self.continuations))
        if not self.continuations:
            raise ValueError("continuations must be non-empty")
        if len(set(self.continuations)) != len(self.continuations):
            raise ValueError("continuations must be duplicate-free")


@dataclass(frozen=True)
class ScoredLabel:
    label: str
    logprob: float
    token_count: int

    def __post_init__(self) -> None:
        if self.token_count < 1:
            raise ValueError(f"token_count must be >= 1, got {self.token_count}")


@dataclass(frozen=True)
class ScorerDescriptor:
    """How to reach a scorer.

    ``remote`` requires an endpoint, either here or through the
    ``SHOTLOCKER_SCORER_URL`` environment variable (checked when the scorer
    is constructed, since the environment can change between runs).
    """

    kind: str = "mock"
    endpoint: str = ""
    model_id: str = ""
    timeout: float = 30.0
    max_concurrent: int = 1
    max_attempts: int = 3
    backoff_base: float = 0.25
    mock_mode: str = "hash"
    mock_salt: int = 0
    cassette: str = ""
    cassette_mode: str = ""

    def __post_init__(self) -> None:
        if self.kind not in SCORER_KINDS:
            raise ConfigError(f"unknown scorer kind {self.kind!r}")
        if self.mock_mode not in MOCK_MODES:
            raise ConfigError(f"unknown mock mode {self.mock_mode!r}")
        if self.cassette_mode and self.cassette_mode not in CASSETTE_MODES:
            raise ConfigError(f"unknown cassette mode {self.cassette_mode!r}")
        if self.cassette_mode and not self.cassette:
            raise ConfigError("cassette_mode set but no cassette path given")
        if self.max_concurrent < 1:
            raise ConfigError("max_concurrent must be >= 1")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")


def _shot_block_labels(prompt: str) -> list[str]:
    # Assumes the default block layout: blocks split on blank lines; a block
    # with two or more non-empty lines is a shot whose label is its last
    # line. Single-line instruction and query blocks fall through.
    labels: list[str] = []
    for block in prompt.split("\n\n"):
        lines = [line for line in block.splitlines() if line.strip()]
        if len(lines) >= 2:
            labels.append(lines[-1])
    return labels


def mock_score(prompt: str, continuation: str, salt: int = 0, mode: str = "hash") -> float:
    """Deterministic stand-in for a real scorer.

    ``hash`` mode maps a stable hash of (prompt, continuation, salt) into
    [-10, 0]. ``label-echo`` mode returns -0.1 * r where r counts the shot
    blocks in the prompt whose label string differs from the continuation,
    which makes the argmax prefer the majority shot label.
    """
    if mode == "hash":
        digest = hashlib.sha256()
        for part in (prompt, "\x1f", continuation, "\x1f", str(salt)):
            digest.update(part.encode("utf-8"))
        value = int.from_bytes(digest.digest(), "big")
        return -10.0 * value / float(2 ** 256)
    if mode == "label-echo":
        mismatches = sum(1 for label in _shot_block_labels(prompt) if label != continuation)
        return -0.1 * mismatches
    raise ConfigError(f"unknown mock mode {mode!r}")


def _mock_token_count(continuation: str) -> int:
    return max(1, len(continuation.split()))


def _parse_payload(payload, expected: int) -> list[tuple[float, int]]:
    if not isinstance(payload, dict) or not isinstance(payload.get("scores"), list):
        raise ValueError("response body lacks a 'scores' array")
    scores = payload["scores"]
    if len(scores) != expected:
        raise ValueError(f"expected {expected} scores, got {len(scores)}")
    out = []
    for item in scores:
        if not isinstance(item, dict) or "logprob" not in item or "token_count" not in item:
            raise ValueError("score entries need 'logprob' and 'token_count'")
        out.append((float(item["logprob"]), int(item["token_count"])))
    return out


def _load_cassette(path: str) -> dict[str, deque]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"cassette file {path!r} not found for replay")
    table: dict[str, deque] = defaultdict(deque)
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        key = json.dumps(entry["request"], sort_keys=True, separators=(",", ":"))
        table[key].append(entry["response"])
    return table


class Scorer:
    """Scores continuations per a descriptor; safe for concurrent calls."""

    def __init__(self, descriptor: ScorerDescriptor):
        self.descriptor = descriptor
        self._lock = threading.Lock()
        self._replay: dict[str, deque] | None = None
        self.endpoint = ""
        if descriptor.kind == "remote":
            self.endpoint = os.environ.get(ENV_SCORER_URL, "") or descriptor.endpoint
            if not self.endpoint:
                raise ConfigError(
                    f"remote scorer needs an endpoint (descriptor or ${ENV_SCORER_URL})"
                )
            if descriptor.cassette_mode == "replay":
                self._replay = _load_cassette(descriptor.cassette)

    def score(self, request: ScoreRequest) -> list[ScoredLabel]:
        """One ScoredLabel per continuation, in request order."""
        if not request.prompt:
            raise ConfigError("prompt is empty")
        if self.descriptor.kind == "mock":
            d = self.descriptor
            return [
                ScoredLabel(
                    label=c,
                    logprob=mock_score(request.prompt, c, d.mock_salt, d.mock_mode),
                    token_count=_mock_token_count(c),
                )
                for c in request.continuations
            ]
        return self._score_remote(request)

    def _score_remote(self, request: ScoreRequest) -> list[ScoredLabel]:
        body = {
            "model": self.descriptor.model_id,
            "prompt": request.prompt,
            "continuations": list(request.continuations),
        }
        if self._replay is not None:
            key = json.dumps(body, sort_keys=True, separators=(",", ":"))
            with self._lock:
                bucket = self._replay.get(key)
                if not bucket:
                    raise CassetteMissError("no recorded response for this request")
                payload = bucket.popleft()
            parsed = _parse_payload(payload, len(request.continuations))
        else:
            payload = self._post(body, expected=len(request.continuations))
            parsed = _parse_payload(payload, len(request.continuations))
            if self.descriptor.cassette_mode == "record":
                line = json.dumps({"request": body, "response": payload}, sort_keys=True)
                with self._lock, open(self.descriptor.cassette, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        return [
            ScoredLabel(label=c, logprob=lp, token_count=tc)
            for c, (lp, tc) in zip(request.continuations, parsed)
        ]

    def _post(self, body: dict, *, expected: int) -> dict:
        url = self.endpoint.rstrip("/") + "/v1/score"
        last_status: int | None = None
        last_error = "no attempt made"
        for attempt in range(1, self.descriptor.max_attempts + 1):
            try:
                resp = requests.post(url, json=body, timeout=self.descriptor.timeout)
                last_status = resp.status_code
                if 200 <= resp.status_code < 300:
                    payload = resp.json()
                    _parse_payload(payload, expected)
                    return payload
                last_error = _status_error(resp)
            except (requests.RequestException, ValueError) as err:
                last_error = str(err)
            if attempt < self.descriptor.max_attempts:
                time.sleep(self.descriptor.backoff_base * (2 ** (attempt - 1)))
        raise ScorerTransportError(
            f"scorer call failed: {last_error}",
            attempts=self.descriptor.max_attempts,
            last_status=last_status,
        )


def _status_error(resp: requests.Response) -> str:
    try:
        detail = resp.json().get("error", "")
    except ValueError:
        detail = ""
    return f"HTTP {resp.status_code}" + (f": {detail}" if detail else "")


def score_labels(descriptor: ScorerDescriptor, request: ScoreRequest) -> list[ScoredLabel]:
    """One-shot convenience wrapper around :class:`Scorer`."""
    return Scorer(descriptor).score(request)


def normalize_by_length(scored: Sequence[ScoredLabel]) -> list[ScoredLabel]:
    """Per-token mean logprob.

    Summed scores penalize multi-token verbalizations; this optional mode
    divides each score by its token count. Off by default (the summed form
    is the reference behavior); callers record the flag in run metadata.
    """
    return [
        ScoredLabel(label=sl.label, logprob=sl.logprob / sl.token_count, token_count=sl.token_count)
        for sl in scored
    ]


def predict_label(
    scored: Sequence[ScoredLabel],
    *,
    label_order: Sequence[str] | None = None,
) -> str:
    """Label with the maximum logprob.

    Exact ties resolve by position in ``label_order`` when given (making
    the result independent of input order), else by input position.
    """
    if not scored:
        raise EmptyInputError("no scored labels to predict from")
    if label_order is not None:
        pos = {label: i for i, label in enumerate(label_order)}
        missing = [sl.label for sl in scored if sl.label not in pos]
        if missing:
            raise ConfigError(f"scored labels {missing} are missing from the declared label order")

        def tiebreak(i: int) -> int:
            return pos[scored[i].label]
    else:

        def tiebreak(i: int) -> int:
            return i

    best = min(range(len(scored)), key=lambda i: (-scored[i].logprob, tiebreak(i)))
    return scored[best].label
