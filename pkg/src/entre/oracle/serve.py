"""Serve an in-process oracle over the stdio or HTTP transport.

Used by the runnable stub server (``python -m entre.stub_server``) and
by tests that need a live endpoint without a model behind it.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO

from .stubs import NerStub, StubOracle
from .wire import NerRequest, OracleRequest, ProtocolError, encode_handshake

Oracle = StubOracle | NerStub


def _decoder(oracle: Oracle):
    return NerRequest.from_wire if isinstance(oracle, NerStub) else OracleRequest.from_wire


def _answer(oracle: Oracle, payload: object) -> dict:
    try:
        if not isinstance(payload, dict):
            raise ProtocolError("request is not an object", payload)
        return oracle(_decoder(oracle)(payload)).to_wire()
    except ProtocolError as exc:
        rid = payload.get("id") if isinstance(payload, dict) else None
        return {"id": rid, "error": str(exc)}


def serve_stdio(
    oracle: Oracle,
    stdin: IO[str] = None,
    stdout: IO[str] = None,
    *,
    reverse_chunk: int = 0,
) -> None:
    """Answer request lines until EOF; handshake goes out first.

    With ``reverse_chunk`` > 0 the server buffers that many request
    lines and answers them in reverse order, which lets tests exercise
    the client's id matching over this transport.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    emit(encode_handshake(list(oracle.labels)))
    buffered: list[dict] = []
    for line in stdin:
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            payload = None
            response = {"id": None, "error": f"request line is not JSON: {exc}"}
        else:
            response = _answer(oracle, payload)
        if reverse_chunk > 0:
            buffered.append(response)
            if len(buffered) >= reverse_chunk:
                for resp in reversed(buffered):
                    emit(resp)
                buffered.clear()
        else:
            emit(response)
    for resp in reversed(buffered):
        emit(resp)


def make_http_server(
    oracle: Oracle,
    host: str = "127.0.0.1",
    port: int = 0,
    *,
    reverse: bool = False,
) -> ThreadingHTTPServer:
    """Build (without starting) an HTTP server for the oracle.

    GET returns the handshake, POST of a JSON array returns the
    response array (reversed when ``reverse`` is set).  Call
    ``serve_forever`` on the result; the bound port is
    ``server.server_address[1]``.
    """

    class Handler(BaseHTTPRequestHandler):
        def _send(self, code: int, obj: object) -> None:
            body = json.dumps(obj).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 (http.server API)
            self._send(200, encode_handshake(list(oracle.labels)))

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
            responses = [_answer(oracle, p) for p in payloads]
            self._send(200, responses[::-1] if reverse else responses)

        def log_message(self, fmt, *args):
            pass  # keep test output quiet

    return ThreadingHTTPServer((host, port), Handler)
