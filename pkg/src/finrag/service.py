"""HTTP query service.

Endpoints:
    POST /v1/query   {"question": ..., "mode"?: ..., "k"?: ...} -> QueryResult JSON
    GET  /v1/health  -> {"status": "ok", "index_count": n, "dim": d}

Malformed bodies return 400, upstream model or embedder failures return 502.
The service never mutates the index; requests are handled on separate
threads with read-only index access.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import (
    EmbedderUnavailable,
    EmptyQuestion,
    UpstreamRejected,
    UpstreamTimeout,
    UpstreamUnavailable,
)
from .pipeline import MODES, RagPipeline

_UPSTREAM_ERRORS = (EmbedderUnavailable, UpstreamUnavailable, UpstreamTimeout, UpstreamRejected)


class QueryHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], pipeline: RagPipeline):
        super().__init__(address, _QueryHandler)
        self.pipeline = pipeline


class _QueryHandler(BaseHTTPRequestHandler):
    server: QueryHTTPServer
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass  # request logging off; tests and CLI read structured output only

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/v1/health":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        index = self.server.pipeline.index
        self._send_json(
            200,
            {
                "status": "ok",
                "index_count": index.count if index is not None else 0,
                "dim": index.dim if index is not None else 0,
            },
        )

    def do_POST(self):
        if self.path != "/v1/query":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send_json(400, {"error": "body is not valid JSON"})
            return
        if not isinstance(payload, dict):
            self._send_json(400, {"error": "body must be a JSON object"})
            return
        question = payload.get("question")
        if not isinstance(question, str) or not question.strip():
            self._send_json(400, {"error": "a non-empty 'question' string is required"})
            return
        mode = payload.get("mode", "rag")
        if mode not in MODES:
            self._send_json(400, {"error": f"mode must be one of {list(MODES)}"})
            return
        k = payload.get("k")
        if k is not None and (not isinstance(k, int) or isinstance(k, bool) or k < 1):
            self._send_json(400, {"error": "'k' must be a positive integer"})
            return
        try:
            result = self.server.pipeline.answer(question, mode=mode, k=k)
        except EmptyQuestion as exc:
            self._send_json(400, {"error": str(exc)})
            return
        except _UPSTREAM_ERRORS as exc:
            self._send_json(502, {"error": str(exc)})
            return
        except Exception as exc:  # defensive: a handler must always respond
            self._send_json(500, {"error": str(exc)})
            return
        self._send_json(200, result.to_dict())


def create_server(bind: str, pipeline: RagPipeline) -> QueryHTTPServer:
    """Bind the service; raises OSError on a bind conflict (before serving)."""
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    return QueryHTTPServer((host, int(port_text)), pipeline)
