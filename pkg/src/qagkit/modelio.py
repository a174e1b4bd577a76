"""Backend abstraction for the neural roles the pipeline calls.

Two implementations ship here: a deterministic mock whose constants are
frozen (docs/backends.md) so golden-file tests stay bit-stable, and an HTTP
client speaking the wire protocol below. Both are shareable handles; the
mock is stateless and every operation is safe to call concurrently.

Wire protocol (all POST, JSON bodies, UTF-8):

    /v1/summarize  {"passage","query"}                 -> {"summary"}
    /v1/answer     {"passage","context","mode":"agm|qam"} -> {"answer"}
    /v1/question   {"passage","answer","wh"}           -> {"question"}
    /v1/score      {"passage","question","answer"}     -> {"pos_logit","neg_logit"}
    /v1/embed      {"text"}                            -> {"vectors":[[...],...]}

Generation requests additionally carry beam_size, max_len and temperature.
Non-2xx responses carry {"error": "..."}.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from .corpus import WH_WORDS, Passage
from .textproc import content_tokens, tokenize

EMBED_DIM = 16
_AGM_TOKENS = 10
_QGM_TOKENS = 6

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Network-level failure or non-2xx response; retriable."""


class BackendContractError(BackendError):
    """The backend violated its contract (empty output, bad schema); never retried."""


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 4
    max_len: int = 64
    temperature: float = 0.0

    def __post_init__(self):
        if self.beam_size < 1 or self.max_len < 1 or self.temperature < 0:
            raise ValueError("invalid decode configuration")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint: str | None = None
    timeout_ms: int = 10_000
    max_in_flight: int = 4
    decode: DecodeConfig = field(default_factory=DecodeConfig)

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if (self.endpoint is not None) != (self.kind == "remote"):
            raise ValueError("endpoint must be set iff kind is remote")
        if self.timeout_ms <= 0 or self.max_in_flight <= 0:
            raise ValueError("timeout_ms and max_in_flight must be positive")


@dataclass(frozen=True)
class PairScore:
    pos_logit: float
    neg_logit: float

    def __post_init__(self):
        if not (math.isfinite(self.pos_logit) and math.isfinite(self.neg_logit)):
            raise ValueError("logits must be finite")


class Backend(Protocol):
    def summarize(self, passage: Passage, query: str) -> str: ...
    def agm_answer(self, passage: Passage, summary: str) -> str: ...
    def gen_question(self, passage: Passage, answer: str, wh: str) -> str: ...
    def qam_answer(self, passage: Passage, question: str) -> str: ...
    def score_pair(self, passage: Passage, question: str, answer: str) -> PairScore: ...
    def embed_tokens(self, text: str) -> list[list[float]]: ...


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


def _overlap(a_tokens: list[str], b_tokens: list[str]) -> int:
    return len(set(a_tokens) & set(b_tokens))


class MockBackend:
    """Pure-function stand-in for the four generation roles, scorer and embedder.

    Constants are frozen: answers keep the first 10 content tokens, questions
    keep 6, embeddings are 16-dimensional FNV-1a hash vectors, and the score
    is 4*J - 2 for the content-token Jaccard J between the pair and passage.
    """

    def summarize(self, passage: Passage, query: str) -> str:
        if not query:
            raise ValueError("query must be non-empty")
        q_content = content_tokens(query)
        best_idx = -1
        best = -1
        for i, sent in enumerate(passage.sentences):
            if sent == query:
                continue
            shared = _overlap(q_content, content_tokens(sent))
            if shared > best:
                best, best_idx = shared, i
        if best_idx < 0:
            return query
        return query + " " + passage.sentences[best_idx]

    def agm_answer(self, passage: Passage, summary: str) -> str:
        if not summary:
            raise ValueError("summary must be non-empty")
        toks = content_tokens(summary)[:_AGM_TOKENS]
        if not toks:
            toks = tokenize(summary)[:_AGM_TOKENS]
        return " ".join(toks) if toks else summary.strip()

    def gen_question(self, passage: Passage, answer: str, wh: str) -> str:
        if wh not in WH_WORDS:
            raise ValueError(f"wh must be one of {WH_WORDS}, got {wh!r}")
        if not answer:
            raise ValueError("answer must be non-empty")
        toks = content_tokens(answer)[:_QGM_TOKENS]
        body = (" " + " ".join(toks)) if toks else ""
        return wh + body + "?"

    def qam_answer(self, passage: Passage, question: str) -> str:
        if not question:
            raise ValueError("question must be non-empty")
        q_content = content_tokens(question)
        best_idx = 0
        best = -1
        for i, sent in enumerate(passage.sentences):
            shared = _overlap(q_content, content_tokens(sent))
            if shared > best:
                best, best_idx = shared, i
        return passage.sentences[best_idx]

    def score_pair(self, passage: Passage, question: str, answer: str) -> PairScore:
        if not question or not answer:
            raise ValueError("question and answer must be non-empty")
        pair_toks = set(content_tokens(question + " " + answer))
        psg_toks = set(content_tokens(passage.norm_text))
        union = pair_toks | psg_toks
        j = len(pair_toks & psg_toks) / len(union) if union else 1.0
        pos = 4.0 * j - 2.0
        return PairScore(pos_logit=pos, neg_logit=-pos)

    def embed_tokens(self, text: str) -> list[list[float]]:
        vectors = []
        for tok in tokenize(text):
            raw = [
                _fnv1a64(f"{i}:{tok}".encode("utf-8")) / 2.0**63 - 1.0
                for i in range(EMBED_DIM)
            ]
            norm = math.sqrt(sum(c * c for c in raw))
            if norm == 0.0:  # unreachable for real hashes, kept for totality
                raw[0] = 1.0
                norm = 1.0
            vectors.append([c / norm for c in raw])
        return vectors


def _requests_transport(url: str, payload: dict, timeout_s: float) -> tuple[int, bytes]:
    try:
        resp = requests.post(url, json=payload, timeout=timeout_s)
    except requests.RequestException as e:
        raise TransportError(f"POST {url} failed: {e}") from e
    return resp.status_code, resp.content


class RemoteBackend:
    """Wire-protocol client with bounded concurrency and retry on transport errors.

    Transport errors (connection failures, timeouts, non-2xx) are retried up
    to 3 times with exponential backoff starting at 200 ms. Contract errors
    are never retried. At most cfg.max_in_flight requests are in flight at
    any moment.
    """

    MAX_RETRIES = 3
    BACKOFF_S = 0.2

    def __init__(self, cfg: BackendConfig,
                 transport: Callable[[str, dict, float], tuple[int, bytes]] | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        if cfg.kind != "remote":
            raise ValueError("RemoteBackend requires a remote BackendConfig")
        self.cfg = cfg
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)

    def _post(self, route: str, payload: dict) -> dict:
        url = self.cfg.endpoint.rstrip("/") + route
        timeout_s = self.cfg.timeout_ms / 1000.0
        last: TransportError | None = None
        for attempt in range(self.MAX_RETRIES + 1):
            if attempt:
                self._sleep(self.BACKOFF_S * 2 ** (attempt - 1))
            try:
                with self._slots:
                    status, body = self._transport(url, payload, timeout_s)
                if not 200 <= status < 300:
                    detail = ""
                    try:
                        detail = json.loads(body.decode("utf-8")).get("error", "")
                    except (ValueError, UnicodeDecodeError):
                        pass
                    raise TransportError(f"POST {url} -> {status} {detail}".rstrip())
            except TransportError as e:
                last = e
                continue
            try:
                return json.loads(body.decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as e:
                raise BackendContractError(f"POST {url}: unparseable response body") from e
        raise last

    def _decode_fields(self) -> dict:
        d = self.cfg.decode
        return {"beam_size": d.beam_size, "max_len": d.max_len, "temperature": d.temperature}

    def _text_field(self, resp: dict, key: str, route: str) -> str:
        value = resp.get(key)
        if not isinstance(value, str) or not value.strip():
            raise BackendContractError(f"{route}: missing or empty {key!r} in response")
        return value

    def summarize(self, passage: Passage, query: str) -> str:
        if not query:
            raise ValueError("query must be non-empty")
        payload = {"passage": passage.norm_text, "query": query, **self._decode_fields()}
        return self._text_field(self._post("/v1/summarize", payload), "summary", "/v1/summarize")

    def agm_answer(self, passage: Passage, summary: str) -> str:
        if not summary:
            raise ValueError("summary must be non-empty")
        payload = {"passage": passage.norm_text, "context": summary, "mode": "agm",
                   **self._decode_fields()}
        return self._text_field(self._post("/v1/answer", payload), "answer", "/v1/answer")

    def gen_question(self, passage: Passage, answer: str, wh: str) -> str:
        if wh not in WH_WORDS:
            raise ValueError(f"wh must be one of {WH_WORDS}, got {wh!r}")
        if not answer:
            raise ValueError("answer must be non-empty")
        payload = {"passage": passage.norm_text, "answer": answer, "wh": wh,
                   **self._decode_fields()}
        return self._text_field(self._post("/v1/question", payload), "question", "/v1/question")

    def qam_answer(self, passage: Passage, question: str) -> str:
        if not question:
            raise ValueError("question must be non-empty")
        payload = {"passage": passage.norm_text, "context": question, "mode": "qam",
                   **self._decode_fields()}
        return self._text_field(self._post("/v1/answer", payload), "answer", "/v1/answer")

    def score_pair(self, passage: Passage, question: str, answer: str) -> PairScore:
        if not question or not answer:
            raise ValueError("question and answer must be non-empty")
        resp = self._post("/v1/score", {"passage": passage.norm_text,
                                        "question": question, "answer": answer})
        try:
            return PairScore(pos_logit=float(resp["pos_logit"]),
                             neg_logit=float(resp["neg_logit"]))
        except (KeyError, TypeError, ValueError) as e:
            raise BackendContractError("/v1/score: bad logits in response") from e

    def embed_tokens(self, text: str) -> list[list[float]]:
        resp = self._post("/v1/embed", {"text": text})
        vectors = resp.get("vectors")
        if not isinstance(vectors, list) or any(
            not isinstance(v, list) or not all(isinstance(c, (int, float)) for c in v)
            for v in vectors
        ):
            raise BackendContractError("/v1/embed: bad vectors in response")
        return [[float(c) for c in v] for v in vectors]


def make_backend(cfg: BackendConfig) -> Backend:
    if cfg.kind == "mock":
        return MockBackend()
    return RemoteBackend(cfg)
