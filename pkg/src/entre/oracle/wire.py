"""Wire-format messages exchanged with prediction oracles.

Line protocol (UTF-8, one JSON object per line):

  handshake (first server line)   {"labels": [str]}
  relation request                {"id": str, "tokens": [str],
                                   "subj_start": int, "subj_end": int,
                                   "obj_start": int, "obj_end": int,
                                   "subj_type": str, "obj_type": str}
  relation response               {"id": str, "label": str,
                                   "scores": {str: float}?}
  ner request                     {"id": str, "tokens": [str]}
  ner response                    {"id": str, "spans": [{"start": int,
                                   "end": int, "type": str}]}

Spans on the wire are half-open ``[start, end)`` token index ranges
(unlike the inclusive-end corpus file format).  Servers may answer a
batch in any order; matching is by id.  A server reporting a failure
sends ``{"id": str|null, "error": str}``.

The HTTP transport wraps the same objects: ``GET url`` returns the
handshake object, ``POST url`` with a JSON array of requests returns a
JSON array of responses.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..corpus import REInstance, Span


class OracleError(Exception):
    """Base class for failures while consulting an oracle."""


class TransportError(OracleError):
    """Transient transport failure; the client may retry."""


class ProtocolError(OracleError):
    """The oracle violated the wire protocol; aborts the run."""

    def __init__(self, message: str, payload: object = None):
        self.payload = payload
        if payload is not None:
            message = f"{message} (payload: {payload!r})"
        super().__init__(message)


@dataclass(frozen=True)
class OracleRequest:
    """One relation-prediction request; mirrors REInstance invariants."""

    id: str
    tokens: tuple[str, ...]
    subj_span: Span
    obj_span: Span
    subj_type: str
    obj_type: str

    @classmethod
    def from_instance(cls, inst: REInstance) -> "OracleRequest":
        return cls(
            id=inst.id,
            tokens=inst.tokens,
            subj_span=inst.subj_span,
            obj_span=inst.obj_span,
            subj_type=inst.subj_type,
            obj_type=inst.obj_type,
        )

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "subj_start": self.subj_span[0],
            "subj_end": self.subj_span[1],
            "obj_start": self.obj_span[0],
            "obj_end": self.obj_span[1],
            "subj_type": self.subj_type,
            "obj_type": self.obj_type,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "OracleRequest":
        try:
            return cls(
                id=d["id"],
                tokens=tuple(d["tokens"]),
                subj_span=(d["subj_start"], d["subj_end"]),
                obj_span=(d["obj_start"], d["obj_end"]),
                subj_type=d["subj_type"],
                obj_type=d["obj_type"],
            )
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed relation request: {exc}", d) from exc

    def name_at(self, span: Span) -> tuple[str, ...]:
        return self.tokens[span[0] : span[1]]

    @property
    def subject_name(self) -> tuple[str, ...]:
        return self.name_at(self.subj_span)

    @property
    def object_name(self) -> tuple[str, ...]:
        return self.name_at(self.obj_span)


@dataclass(frozen=True)
class OraclePrediction:
    """One relation prediction; ``scores`` is optional but when present
    the label must be an argmax of it."""

    id: str
    label: str
    scores: dict[str, float] | None = None

    def to_wire(self) -> dict:
        d: dict = {"id": self.id, "label": self.label}
        if self.scores is not None:
            d["scores"] = dict(self.scores)
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "OraclePrediction":
        if not isinstance(d, dict):
            raise ProtocolError("response is not an object", d)
        if "error" in d:
            raise ProtocolError(f"oracle reported an error: {d['error']}", d)
        if "id" not in d or "label" not in d:
            raise ProtocolError("response missing id or label", d)
        scores = d.get("scores")
        if scores is not None and not isinstance(scores, dict):
            raise ProtocolError("scores must be an object", d)
        return cls(id=d["id"], label=d["label"], scores=scores)

    def validate_against(self, labels: frozenset[str]) -> None:
        if self.label not in labels:
            raise ProtocolError(
                f"label {self.label!r} not in the handshake label set", self.to_wire()
            )
        if self.scores is not None:
            if self.label not in self.scores:
                raise ProtocolError("label missing from scores", self.to_wire())
            if self.scores[self.label] != max(self.scores.values()):
                raise ProtocolError("label is not an argmax of scores", self.to_wire())


@dataclass(frozen=True)
class NerRequest:
    id: str
    tokens: tuple[str, ...]

    @classmethod
    def from_instance(cls, inst: REInstance) -> "NerRequest":
        return cls(id=inst.id, tokens=inst.tokens)

    def to_wire(self) -> dict:
        return {"id": self.id, "tokens": list(self.tokens)}

    @classmethod
    def from_wire(cls, d: dict) -> "NerRequest":
        try:
            return cls(id=d["id"], tokens=tuple(d["tokens"]))
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed ner request: {exc}", d) from exc


@dataclass(frozen=True)
class NerSpan:
    span: Span
    type: str

    def to_wire(self) -> dict:
        return {"start": self.span[0], "end": self.span[1], "type": self.type}


@dataclass(frozen=True)
class NerResponse:
    """Predicted entity spans; in-bounds and non-overlapping."""

    id: str
    spans: tuple[NerSpan, ...]

    def to_wire(self) -> dict:
        return {"id": self.id, "spans": [s.to_wire() for s in self.spans]}

    @classmethod
    def from_wire(cls, d: dict) -> "NerResponse":
        if not isinstance(d, dict):
            raise ProtocolError("response is not an object", d)
        if "error" in d:
            raise ProtocolError(f"oracle reported an error: {d['error']}", d)
        if "id" not in d or "spans" not in d:
            raise ProtocolError("response missing id or spans", d)
        try:
            spans = tuple(
                NerSpan(span=(s["start"], s["end"]), type=s["type"]) for s in d["spans"]
            )
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed ner span: {exc}", d) from exc
        return cls(id=d["id"], spans=spans)

    def validate_for(self, n_tokens: int) -> None:
        last_end = 0
        for s in sorted(self.spans, key=lambda s: s.span):
            start, end = s.span
            if not (0 <= start < end <= n_tokens):
                raise ProtocolError(
                    f"ner span [{start},{end}) out of bounds for {n_tokens} tokens",
                    self.to_wire(),
                )
            if start < last_end:
                raise ProtocolError("ner spans overlap", self.to_wire())
            last_end = end


def encode_handshake(labels: list[str]) -> dict:
    return {"labels": list(labels)}


def decode_handshake(d: object) -> list[str]:
    if (
        not isinstance(d, dict)
        or "labels" not in d
        or not isinstance(d["labels"], list)
        or not all(isinstance(x, str) for x in d["labels"])
    ):
        raise ProtocolError("handshake must be {'labels': [str]}", d)
    return list(d["labels"])
