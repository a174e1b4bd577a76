"""Wire-protocol conformance checks, reusable against any server.

The suite exercises all six backend roles (summarize, answer in both agm
and qam modes, question, score, embed), validating response schemas,
byte-level determinism of repeated requests at temperature 0, and error
shape for malformed bodies. It returns a list of failure strings; an empty
list means the server conforms.
"""

from __future__ import annotations

import json
import math

import requests

_FIXTURE_PASSAGE = (
    "The old miller kept a grey goose near the river. "
    "One winter morning the goose found a golden ring in the frozen reeds. "
    "The miller sold the ring and bought bread for the whole village."
)
_FIXTURE_QUERY = "One winter morning the goose found a golden ring in the frozen reeds."
_FIXTURE_ANSWER = "a golden ring in the frozen reeds"
_FIXTURE_QUESTION = "What did the goose find in the frozen reeds?"

_DECODE = {"beam_size": 4, "max_len": 64, "temperature": 0.0}


def _post_raw(base_url: str, route: str, body: bytes, timeout_s: float) -> tuple[int, bytes]:
    resp = requests.post(base_url.rstrip("/") + route, data=body,
                         headers={"Content-Type": "application/json"}, timeout=timeout_s)
    return resp.status_code, resp.content


def _post_json(base_url: str, route: str, payload: dict, timeout_s: float) -> tuple[int, bytes]:
    return _post_raw(base_url, route,
                     json.dumps(payload, ensure_ascii=False).encode("utf-8"), timeout_s)


def _check_endpoint(failures: list[str], base_url: str, name: str, route: str,
                    payload: dict, validate, timeout_s: float) -> None:
    try:
        status, body = _post_json(base_url, route, payload, timeout_s)
    except requests.RequestException as e:
        failures.append(f"{name}: request failed ({e})")
        return
    if not 200 <= status < 300:
        failures.append(f"{name}: expected 2xx, got {status} {body[:200]!r}")
        return
    try:
        obj = json.loads(body.decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        failures.append(f"{name}: response body is not JSON")
        return
    problem = validate(obj)
    if problem:
        failures.append(f"{name}: {problem}")
        return
    # determinism: an identical request must yield identical bytes
    status2, body2 = _post_json(base_url, route, payload, timeout_s)
    if status2 != status or body2 != body:
        failures.append(f"{name}: repeated identical request produced a different response")


def _nonempty_str(key: str):
    def validate(obj):
        v = obj.get(key)
        if not isinstance(v, str) or not v.strip():
            return f"missing or empty {key!r} field"
        return None
    return validate


def _validate_score(obj):
    for key in ("pos_logit", "neg_logit"):
        v = obj.get(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            return f"{key!r} must be a finite number"
    return None


def _validate_vectors(obj):
    vectors = obj.get("vectors")
    if not isinstance(vectors, list) or not vectors:
        return "vectors must be a non-empty list"
    dims = set()
    for i, vec in enumerate(vectors):
        if not isinstance(vec, list) or not vec:
            return f"vector {i} is not a non-empty list"
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in vec):
            return f"vector {i} has non-numeric components"
        dims.add(len(vec))
        norm = math.sqrt(sum(float(c) ** 2 for c in vec))
        if abs(norm - 1.0) > 1e-6:
            return f"vector {i} is not unit length (norm {norm})"
    if len(dims) != 1:
        return "vectors do not share one dimension"
    return None


def run_protocol_checks(base_url: str, timeout_s: float = 30.0) -> list[str]:
    """Run the full conformance suite; returns failure descriptions (empty = pass)."""
    failures: list[str] = []
    checks = [
        ("summarize", "/v1/summarize",
         {"passage": _FIXTURE_PASSAGE, "query": _FIXTURE_QUERY, **_DECODE},
         _nonempty_str("summary")),
        ("answer/agm", "/v1/answer",
         {"passage": _FIXTURE_PASSAGE, "context": _FIXTURE_QUERY, "mode": "agm", **_DECODE},
         _nonempty_str("answer")),
        ("answer/qam", "/v1/answer",
         {"passage": _FIXTURE_PASSAGE, "context": _FIXTURE_QUESTION, "mode": "qam", **_DECODE},
         _nonempty_str("answer")),
        ("question", "/v1/question",
         {"passage": _FIXTURE_PASSAGE, "answer": _FIXTURE_ANSWER, "wh": "What", **_DECODE},
         _nonempty_str("question")),
        ("score", "/v1/score",
         {"passage": _FIXTURE_PASSAGE, "question": _FIXTURE_QUESTION, "answer": _FIXTURE_ANSWER},
         _validate_score),
        ("embed", "/v1/embed", {"text": "cat cat sat"}, _validate_vectors),
    ]
    for name, route, payload, validate in checks:
        _check_endpoint(failures, base_url, name, route, payload, validate, timeout_s)

    # malformed body must yield a 4xx with an error object
    try:
        status, body = _post_raw(base_url, "/v1/summarize", b"{not json", timeout_s)
        if not 400 <= status < 500:
            failures.append(f"malformed: expected 4xx, got {status}")
        else:
            try:
                obj = json.loads(body.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                obj = None
            if not isinstance(obj, dict) or not isinstance(obj.get("error"), str):
                failures.append("malformed: body lacks an 'error' string")
    except requests.RequestException as e:
        failures.append(f"malformed: request failed ({e})")
    return failures
