"""Deterministic in-process oracles for tests and offline pipelines.

Stubs are pure functions of the request: the memorizer looks only at
the entity name pair, the context reader looks only at tokens outside
the entity spans, so each one isolates exactly one prediction behavior
the replacement loop is meant to probe.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

from ..corpus import NO_RELATION, REInstance
from ..lexicon import EntityName
from .wire import NerRequest, NerResponse, NerSpan, OraclePrediction, OracleRequest

NamePair = tuple[EntityName, EntityName]


class StubOracle:
    """A relation oracle backed by a pure prediction function."""

    def __init__(
        self,
        labels: Iterable[str],
        predict: Callable[[OracleRequest], str],
        identity: str = "stub",
        with_scores: bool = False,
    ):
        self.labels = sorted(set(labels) | {NO_RELATION})
        self._predict = predict
        self.identity = identity
        self.with_scores = with_scores

    def __call__(self, request: OracleRequest) -> OraclePrediction:
        label = self._predict(request)
        scores = None
        if self.with_scores:
            scores = {lab: 1.0 if lab == label else 0.0 for lab in self.labels}
        return OraclePrediction(id=request.id, label=label, scores=scores)


def constant_oracle(label: str = NO_RELATION, **kwargs) -> StubOracle:
    """Answers every request with the same label."""
    return StubOracle([label], lambda req: label, identity=f"stub:constant:{label}", **kwargs)


def entity_memorizer_stub(
    training_pairs: Mapping[NamePair, str], **kwargs
) -> StubOracle:
    """Predicts from the (subject, object) name pair alone.

    Returns the memorized relation when the pair is known, otherwise
    ``no_relation``; context tokens are ignored entirely.
    """
    table = {
        (tuple(subj), tuple(obj)): relation
        for (subj, obj), relation in training_pairs.items()
    }

    def predict(req: OracleRequest) -> str:
        return table.get((req.subject_name, req.object_name), NO_RELATION)

    return StubOracle(
        table.values(), predict, identity=f"stub:memorizer:{len(table)}pairs", **kwargs
    )


def memorizer_pairs(instances: Iterable[REInstance]) -> dict[NamePair, str]:
    """Train a memorizer on a corpus: name pair -> gold relation."""
    return {(inst.subject_name, inst.object_name): inst.relation for inst in instances}


def context_reader_stub(trigger_map: Mapping[str, str], **kwargs) -> StubOracle:
    """Predicts from trigger tokens outside the entity spans.

    Scans left to right and returns the relation of the first trigger
    token found outside both spans, else ``no_relation``.  As long as
    trigger tokens never occur inside entity names, the output is
    invariant under entity replacement by construction.
    """
    triggers = dict(trigger_map)

    def predict(req: OracleRequest) -> str:
        inside = set(range(*req.subj_span)) | set(range(*req.obj_span))
        for i, tok in enumerate(req.tokens):
            if i not in inside and tok in triggers:
                return triggers[tok]
        return NO_RELATION

    return StubOracle(
        triggers.values(), predict, identity=f"stub:context:{len(triggers)}triggers", **kwargs
    )


class NerStub:
    """An entity tagger backed by a pure span function."""

    def __init__(
        self,
        labels: Iterable[str],
        spans_fn: Callable[[NerRequest], tuple[NerSpan, ...]],
        identity: str = "stub:ner",
    ):
        self.labels = sorted(set(labels))
        self._spans_fn = spans_fn
        self.identity = identity

    def __call__(self, request: NerRequest) -> NerResponse:
        return NerResponse(id=request.id, spans=self._spans_fn(request))


def annotation_echo_ner(instances: Iterable[REInstance]) -> NerStub:
    """Echoes the gold entity annotations of a reference corpus, by id.

    Unknown ids get no spans.  Useful as a 'perfect tagger' against the
    corpus it was built from, and as a disagreement detector against a
    corrupted copy.
    """
    by_id = {inst.id: inst for inst in instances}
    labels = set()
    for inst in by_id.values():
        labels.add(inst.subj_type)
        labels.add(inst.obj_type)

    def spans_fn(req: NerRequest) -> tuple[NerSpan, ...]:
        inst = by_id.get(req.id)
        if inst is None:
            return ()
        spans = [
            NerSpan(span=inst.subj_span, type=inst.subj_type),
            NerSpan(span=inst.obj_span, type=inst.obj_type),
        ]
        spans.sort(key=lambda s: s.span)
        return tuple(spans)

    return NerStub(labels, spans_fn, identity=f"stub:ner_echo:{len(by_id)}")
