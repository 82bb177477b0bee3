"""Protocol conformance checks shared by stub oracles and model bridges.

Every oracle implementation, regardless of transport, must pass these:
handshake with a non-empty label set, exact id matching under arbitrary
response order, label-set closure, argmax-consistent scores, and
repeatable answers.  ``make_client`` is a zero-argument callable
returning a fresh client; checks raise AssertionError on violation.
"""

from __future__ import annotations

from typing import Callable

from .client import NerClient, OracleClient
from .wire import NerRequest, OracleRequest


def relation_requests(n: int = 6) -> list[OracleRequest]:
    """Deterministic synthetic relation requests with uncooperative ids."""
    ids = [f"conf-{chr(ord('z') - i)}{i}" for i in range(n)]
    reqs = []
    for i, rid in enumerate(ids):
        tokens = ("Alice", "Braun", "works", "for", "Acme", "Corp", f"ctx{i}", ".")
        reqs.append(
            OracleRequest(
                id=rid,
                tokens=tokens,
                subj_span=(0, 2),
                obj_span=(4, 6),
                subj_type="PERSON",
                obj_type="ORGANIZATION",
            )
        )
    return reqs


def ner_requests(n: int = 4) -> list[NerRequest]:
    ids = [f"nconf-{chr(ord('z') - i)}{i}" for i in range(n)]
    # Two alternating sentences, so taggers answer distinct ids
    # differently and id mix-ups are observable.
    sentences = (
        ("Alice", "Braun", "visited", "Acme", "Corp", "."),
        ("Acme", "Corp", "hired", "Alice", "."),
    )
    return [
        NerRequest(id=rid, tokens=sentences[i % 2]) for i, rid in enumerate(ids)
    ]


def check_relation_conformance(make_client: Callable[[], OracleClient]) -> None:
    with make_client() as client:
        labels = client.labels
        assert labels, "handshake must list at least one label"

        assert client.predict_batch([]) == [], "empty batch must return []"

        reqs = relation_requests()
        preds = client.predict_batch(reqs)
        assert len(preds) == len(reqs)
        for req, pred in zip(reqs, preds):
            assert pred.id == req.id, "responses must align with request order"
            assert pred.label in labels, "predicted label must be in the handshake set"
            if pred.scores is not None:
                assert pred.scores[pred.label] == max(pred.scores.values())

        # Shuffled request order must not change per-id answers.
        shuffled = list(reversed(reqs))
        preds2 = {p.id: p.label for p in client.predict_batch(shuffled)}
        assert preds2 == {p.id: p.label for p in preds}, "answers must be repeatable"

        # Duplicate ids within one batch violate the client precondition.
        try:
            client.predict_batch([reqs[0], reqs[0]])
        except ValueError:
            pass
        else:
            raise AssertionError("duplicate ids must be rejected")


def check_ner_conformance(make_client: Callable[[], NerClient]) -> None:
    with make_client() as client:
        labels = client.labels
        assert labels, "handshake must list at least one entity type"

        assert client.predict_batch([]) == [], "empty batch must return []"

        reqs = ner_requests()
        responses = client.predict_batch(reqs)
        assert len(responses) == len(reqs)
        for req, resp in zip(reqs, responses):
            assert resp.id == req.id
            resp.validate_for(len(req.tokens))
            for span in resp.spans:
                assert span.type in labels

        again = {r.id: r.spans for r in client.predict_batch(list(reversed(reqs)))}
        assert again == {r.id: r.spans for r in responses}, "answers must be repeatable"
