"""FastAPI application implementing the wire protocol.

Bodies are parsed by hand so error responses always carry the protocol's
{"error": "..."} shape: malformed JSON and missing fields are 400, inference
failures are 500. Responses are plain JSONResponse payloads, so identical
requests against the same process produce identical bytes at temperature 0.
"""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ServerConfig
from .modelpool import ModelPool

log = logging.getLogger(__name__)

WH_SET = ("Who", "When", "What", "Where", "Why", "How")


class BadRequest(Exception):
    pass


async def _parse_body(request: Request) -> dict:
    raw = await request.body()
    try:
        body = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise BadRequest(f"malformed JSON body: {e}")
    if not isinstance(body, dict):
        raise BadRequest("request body must be a JSON object")
    return body


def _get_str(body: dict, key: str, allow_empty: bool = False) -> str:
    value = body.get(key)
    if not isinstance(value, str) or (not allow_empty and not value.strip()):
        raise BadRequest(f"missing or empty string field {key!r}")
    return value


def _decode_args(body: dict) -> dict:
    out = {}
    for key, name in (("beam_size", "beam_size"), ("max_len", "max_len"),
                      ("temperature", "temperature")):
        if key in body:
            value = body[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise BadRequest(f"invalid {key!r}")
            out[name] = value
    if "beam_size" in out:
        out["beam_size"] = int(out["beam_size"])
    if "max_len" in out:
        out["max_len"] = int(out["max_len"])
    return out


def create_app(cfg: ServerConfig, pool: ModelPool | None = None) -> FastAPI:
    pool = pool or ModelPool(cfg)
    app = FastAPI(title="qag model server", docs_url=None, redoc_url=None)

    def handle(fn):
        async def endpoint(request: Request):
            try:
                body = await _parse_body(request)
                return JSONResponse(fn(body))
            except BadRequest as e:
                return JSONResponse({"error": str(e)}, status_code=400)
            except Exception as e:  # inference failure
                log.exception("request failed")
                return JSONResponse({"error": str(e)}, status_code=500)
        return endpoint

    def summarize(body):
        passage = _get_str(body, "passage")
        query = _get_str(body, "query")
        return {"summary": pool.generate("qfs", [passage, query], **_decode_args(body))}

    def answer(body):
        passage = _get_str(body, "passage")
        context = _get_str(body, "context")
        mode = _get_str(body, "mode")
        if mode == "agm":
            out = pool.generate("agm", [passage, context], **_decode_args(body))
        elif mode == "qam":
            out = pool.generate("qam", [passage, context], **_decode_args(body))
        else:
            raise BadRequest("mode must be 'agm' or 'qam'")
        return {"answer": out}

    def question(body):
        passage = _get_str(body, "passage")
        ans = _get_str(body, "answer")
        wh = _get_str(body, "wh")
        if wh not in WH_SET:
            raise BadRequest(f"wh must be one of {WH_SET}")
        return {"question": pool.generate("qgm", [passage, ans, wh], **_decode_args(body))}

    def score(body):
        passage = _get_str(body, "passage")
        q = _get_str(body, "question")
        a = _get_str(body, "answer")
        pos, neg = pool.score(q, a, passage)
        return {"pos_logit": pos, "neg_logit": neg}

    def embed(body):
        text = _get_str(body, "text", allow_empty=True)
        return {"vectors": pool.embed(text)}

    app.post("/v1/summarize")(handle(summarize))
    app.post("/v1/answer")(handle(answer))
    app.post("/v1/question")(handle(question))
    app.post("/v1/score")(handle(score))
    app.post("/v1/embed")(handle(embed))
    return app
