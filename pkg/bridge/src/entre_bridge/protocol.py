"""Server-side wire protocol: line-delimited JSON on stdio, or HTTP.

The first stdout line is the handshake ``{"labels": [...]}``; afterwards
every request line gets exactly one response line (order may be changed
with ``reverse_chunk``, which exists so protocol test suites can check
a client's id matching).  A malformed request yields
``{"id": <id or null>, "error": "..."}`` instead of killing the server.

Over HTTP, GET returns the handshake and POST exchanges a JSON array of
requests for a JSON array of responses.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO, Callable

Handler = Callable[[list[dict]], list[dict]]


def _answer_one(handle: Handler, payload: object) -> dict:
    if not isinstance(payload, dict):
        return {"id": None, "error": "request is not a JSON object"}
    try:
        return handle([payload])[0]
    except Exception as exc:  # noqa: BLE001 - report, keep serving
        return {"id": payload.get("id"), "error": str(exc)}


def _answer_batch(handle: Handler, payloads: list) -> list[dict]:
    try:
        if all(isinstance(p, dict) for p in payloads):
            return handle(list(payloads))
    except Exception:  # noqa: BLE001 - fall back to per-item reporting
        pass
    return [_answer_one(handle, p) for p in payloads]


def serve_stdio(
    handle: Handler,
    labels: list[str],
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
    *,
    reverse_chunk: int = 0,
) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    emit({"labels": list(labels)})
    buffered: list[dict] = []
    for line in stdin:
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": f"request line is not JSON: {exc}"}
        else:
            response = _answer_one(handle, payload)
        if reverse_chunk > 0:
            buffered.append(response)
            if len(buffered) >= reverse_chunk:
                for item in reversed(buffered):
                    emit(item)
                buffered.clear()
        else:
            emit(response)
    for item in reversed(buffered):
        emit(item)


def make_http_server(
    handle: Handler,
    labels: list[str],
    host: str = "127.0.0.1",
    port: int = 0,
    *,
    reverse: bool = False,
) -> ThreadingHTTPServer:
    class RequestHandler(BaseHTTPRequestHandler):
        def _send(self, code: int, obj: object) -> None:
            body = json.dumps(obj).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 (http.server API)
            self._send(200, {"labels": list(labels)})

        def do_POST(self):  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            try:
                payloads = json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                self._send(400, {"error": "body is not JSON"})
                return
            if not isinstance(payloads, list):
                self._send(400, {"error": "body is not a JSON array"})
                return
            responses = _answer_batch(handle, payloads)
            self._send(200, responses[::-1] if reverse else responses)

        def log_message(self, fmt, *args):
            pass

    return ThreadingHTTPServer((host, port), RequestHandler)
