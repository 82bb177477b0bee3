"""Batching oracle client over in-process, child-process, and HTTP transports.

The client never depends on response arrival order: servers may answer
a batch in any order and results are matched by id.  Transient
transport failures are retried with exponential backoff; protocol
violations abort immediately with the offending payload attached.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import requests as _requests

from ..corpus import REInstance
from .stubs import NerStub, StubOracle
from .wire import (
    NerRequest,
    NerResponse,
    OraclePrediction,
    OracleRequest,
    ProtocolError,
    TransportError,
    decode_handshake,
)


class InProcessTransport:
    """Runs a stub oracle in-process, still round-tripping wire dicts.

    ``reverse`` answers each batch back to front, for exercising the
    client's order independence.
    """

    def __init__(self, oracle: StubOracle | NerStub, *, reverse: bool = False):
        self._oracle = oracle
        self._reverse = reverse
        self.identity = oracle.identity
        if isinstance(oracle, NerStub):
            self._decode = NerRequest.from_wire
        else:
            self._decode = OracleRequest.from_wire

    def handshake(self) -> list[str]:
        return list(self._oracle.labels)

    def exchange(self, payloads: list[dict]) -> list[dict]:
        out = [self._oracle(self._decode(p)).to_wire() for p in payloads]
        return out[::-1] if self._reverse else out

    def close(self) -> None:
        pass


class StdioTransport:
    """Line-delimited JSON over a child process's standard streams.

    The child prints the handshake as its first stdout line, then
    answers one response line per request line.  A dead or wedged child
    surfaces as :class:`TransportError`; the next attempt respawns it.
    """

    def __init__(self, cmd: str | Sequence[str]):
        self._argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.identity = "stdio:" + " ".join(self._argv)
        self._proc: subprocess.Popen | None = None
        self._labels: list[str] | None = None
        self._lock = threading.Lock()

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
            line = self._read_line(self._proc)
            try:
                self._labels = decode_handshake(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"handshake is not JSON: {exc}", line)
        return self._proc

    @staticmethod
    def _read_line(proc: subprocess.Popen) -> str:
        line = proc.stdout.readline()
        if line == "":
            raise TransportError("oracle process closed its stdout")
        return line

    def handshake(self) -> list[str]:
        with self._lock:
            self._ensure_process()
            return list(self._labels)

    def exchange(self, payloads: list[dict]) -> list[dict]:
        with self._lock:
            proc = self._ensure_process()
            try:
                for payload in payloads:
                    proc.stdin.write(json.dumps(payload) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._drop_process()
                raise TransportError(f"oracle process pipe failed: {exc}") from exc
            out = []
            for _ in payloads:
                try:
                    line = self._read_line(proc)
                except TransportError:
                    self._drop_process()
                    raise
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"response line is not JSON: {exc}", line)
            return out

    def _drop_process(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
            self._proc = None


class HttpTransport:
    """JSON batches POSTed to a configurable URL.

    ``GET url`` must return the handshake object; ``POST url`` with a
    JSON array of requests must return a JSON array of responses.
    """

    def __init__(self, url: str, *, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout
        self.identity = url

    def handshake(self) -> list[str]:
        try:
            resp = _requests.get(self.url, timeout=self.timeout)
        except _requests.RequestException as exc:
            raise TransportError(f"handshake GET failed: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"handshake GET returned {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(f"handshake GET returned {resp.status_code}", resp.text)
        return decode_handshake(resp.json())

    def exchange(self, payloads: list[dict]) -> list[dict]:
        try:
            resp = _requests.post(self.url, json=payloads, timeout=self.timeout)
        except _requests.RequestException as exc:
            raise TransportError(f"batch POST failed: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"batch POST returned {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(f"batch POST returned {resp.status_code}", resp.text)
        body = resp.json()
        if not isinstance(body, list):
            raise ProtocolError("batch response is not a JSON array", body)
        return body

    def close(self) -> None:
        pass


class _BatchClient:
    """Shared chunking/retry/matching machinery for both task flavors."""

    def __init__(
        self,
        transport,
        *,
        batch_size: int = 64,
        max_attempts: int = 3,
        backoff_base: float = 0.1,
        workers: int = 1,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.transport = transport
        self.batch_size = batch_size
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.workers = workers
        self._labels: frozenset[str] | None = None
        #: Batches sent since construction, for trace accounting.
        self.n_batches = 0
        self.n_requests = 0

    @property
    def identity(self) -> str:
        return self.transport.identity

    @property
    def labels(self) -> frozenset[str]:
        if self._labels is None:
            labels = self._with_retries(self.transport.handshake)
            if not labels:
                raise ProtocolError("handshake listed no labels")
            self._labels = frozenset(labels)
        return self._labels

    def _with_retries(self, fn, *args):
        for attempt in range(1, self.max_attempts + 1):
            try:
                return fn(*args)
            except TransportError:
                if attempt == self.max_attempts:
                    raise
                time.sleep(self.backoff_base * 2 ** (attempt - 1))

    def _decode(self, payload: dict, by_id: dict):
        raise NotImplementedError

    def _exchange_chunk(self, chunk) -> dict:
        labels = self.labels  # force the handshake before the first batch
        by_id = {req.id: req for req in chunk}
        raw = self._with_retries(self.transport.exchange, [r.to_wire() for r in chunk])
        self.n_batches += 1
        self.n_requests += len(chunk)
        out = {}
        for payload in raw:
            resp = self._decode(payload, by_id)
            if resp.id not in by_id:
                raise ProtocolError(f"response for unknown id {resp.id!r}", payload)
            if resp.id in out:
                raise ProtocolError(f"duplicate response for id {resp.id!r}", payload)
            out[resp.id] = resp
        missing = set(by_id) - set(out)
        if missing:
            raise ProtocolError(f"no response for ids: {sorted(missing)}")
        return out

    def predict_batch(self, reqs: Sequence) -> list:
        """Send requests (chunked) and return responses aligned to input order."""
        ids = [r.id for r in reqs]
        if len(set(ids)) != len(ids):
            raise ValueError("request ids must be unique within a batch")
        if not reqs:
            return []
        chunks = [
            reqs[i : i + self.batch_size] for i in range(0, len(reqs), self.batch_size)
        ]
        merged: dict = {}
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                for result in pool.map(self._exchange_chunk, chunks):
                    merged.update(result)
        else:
            for chunk in chunks:
                merged.update(self._exchange_chunk(chunk))
        return [merged[i] for i in ids]

    def close(self) -> None:
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class OracleClient(_BatchClient):
    """Relation-prediction client."""

    def _decode(self, payload: dict, by_id: dict) -> OraclePrediction:
        pred = OraclePrediction.from_wire(payload)
        pred.validate_against(self.labels)
        return pred

    def predict_instances(
        self, instances: Sequence[REInstance]
    ) -> dict[str, OraclePrediction]:
        reqs = [OracleRequest.from_instance(inst) for inst in instances]
        return {p.id: p for p in self.predict_batch(reqs)}

    def predict_labels(self, instances: Sequence[REInstance]) -> dict[str, str]:
        return {i: p.label for i, p in self.predict_instances(instances).items()}


class NerClient(_BatchClient):
    """Entity-tagging client; span types must come from the handshake set."""

    def _decode(self, payload: dict, by_id: dict) -> NerResponse:
        resp = NerResponse.from_wire(payload)
        req = by_id.get(resp.id)
        if req is not None:
            resp.validate_for(len(req.tokens))
        for span in resp.spans:
            if span.type not in self.labels:
                raise ProtocolError(
                    f"span type {span.type!r} not in the handshake label set", payload
                )
        return resp

    def tag_instances(self, instances: Sequence[REInstance]) -> dict[str, NerResponse]:
        reqs = [NerRequest.from_instance(inst) for inst in instances]
        return {r.id: r for r in self.predict_batch(reqs)}


def transport_for(spec: str):
    """Build a transport from a CLI-style oracle spec (URL or command)."""
    if spec.startswith(("http://", "https://")):
        return HttpTransport(spec)
    return StdioTransport(spec)
