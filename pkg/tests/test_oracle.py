import json
import sys
import threading

import pytest

from entre.corpus import NO_RELATION
from entre.oracle.client import (
    HttpTransport,
    InProcessTransport,
    NerClient,
    OracleClient,
    StdioTransport,
    transport_for,
)
from entre.oracle.conformance import (
    check_ner_conformance,
    check_relation_conformance,
    relation_requests,
)
from entre.oracle.serve import make_http_server
from entre.oracle.stubs import (
    annotation_echo_ner,
    constant_oracle,
    context_reader_stub,
    entity_memorizer_stub,
)
from entre.oracle.wire import (
    NerRequest,
    OraclePrediction,
    OracleRequest,
    ProtocolError,
    TransportError,
)
from entre.replace import mask_context, replace_entity
from entre.synthetic import default_trigger_map, synthetic_corpus


def stub_spec_file(tmp_path, spec: dict) -> str:
    path = tmp_path / "stub.json"
    path.write_text(json.dumps(spec))
    return str(path)


def stdio_cmd(spec_path: str, *extra: str) -> list[str]:
    return [sys.executable, "-m", "entre.stub_server", "--spec", spec_path, *extra]


@pytest.fixture
def http_server_factory():
    servers = []

    def start(oracle, *, reverse=False) -> str:
        server = make_http_server(oracle, reverse=reverse)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        host, port = server.server_address
        return f"http://{host}:{port}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


class TestStubs:
    def test_constant_stub(self):
        stub = constant_oracle()
        for req in relation_requests():
            assert stub(req).label == NO_RELATION

    def test_memorizer_ignores_context(self, john_acme):
        pairs = {(("John",), ("ACME",)): "per:employee_of"}
        stub = entity_memorizer_stub(pairs)
        req = OracleRequest.from_instance(john_acme)
        assert stub(req).label == "per:employee_of"
        masked = mask_context(john_acme)
        assert stub(OracleRequest.from_instance(masked)).label == "per:employee_of"

    def test_memorizer_unseen_pair(self, john_acme):
        stub = entity_memorizer_stub({(("John",), ("ACME",)): "per:employee_of"})
        swapped = replace_entity(john_acme, "subject", ("Mary",))
        assert stub(OracleRequest.from_instance(swapped)).label == NO_RELATION

    def test_context_reader_invariant_under_replacement(self, john_acme):
        stub = context_reader_stub({"works": "per:employee_of"})
        before = stub(OracleRequest.from_instance(john_acme)).label
        swapped = replace_entity(john_acme, "subject", ("Zed", "Q"))
        after = stub(OracleRequest.from_instance(swapped)).label
        assert before == after == "per:employee_of"

    def test_context_reader_on_masked_input(self, john_acme):
        stub = context_reader_stub({"works": "per:employee_of"})
        masked = mask_context(john_acme)
        assert stub(OracleRequest.from_instance(masked)).label == NO_RELATION

    def test_trigger_inside_entity_span_does_not_fire(self):
        # The trigger token only counts outside the entity spans.
        from entre.corpus import REInstance

        inst = REInstance(
            "t", ("works", "hired", "Bo"), (0, 1), (2, 3), "ORGANIZATION", "PERSON", "r"
        )
        stub = context_reader_stub({"works": "per:employee_of"})
        assert stub(OracleRequest.from_instance(inst)).label == NO_RELATION

    def test_scored_stub_emits_argmax_consistent_scores(self):
        stub = constant_oracle("r1", with_scores=True)
        pred = stub(relation_requests(1)[0])
        assert pred.scores["r1"] == max(pred.scores.values())


class TestConformanceAcrossTransports:
    def test_in_process(self):
        stub = context_reader_stub(default_trigger_map(), with_scores=True)
        check_relation_conformance(lambda: OracleClient(InProcessTransport(stub)))

    def test_in_process_reversed_responses(self):
        stub = context_reader_stub(default_trigger_map())
        check_relation_conformance(
            lambda: OracleClient(InProcessTransport(stub, reverse=True))
        )

    def test_stdio(self, tmp_path):
        spec = stub_spec_file(tmp_path, {"kind": "context", "triggers": default_trigger_map()})
        check_relation_conformance(lambda: OracleClient(StdioTransport(stdio_cmd(spec))))

    def test_stdio_reversed_chunks(self, tmp_path):
        spec = stub_spec_file(tmp_path, {"kind": "constant", "label": "no_relation"})
        check_relation_conformance(
            lambda: OracleClient(
                StdioTransport(stdio_cmd(spec, "--reverse-chunk", "3")), batch_size=3
            )
        )

    def test_http(self, tmp_path, http_server_factory):
        url = http_server_factory(constant_oracle("r9", with_scores=True))
        check_relation_conformance(lambda: OracleClient(HttpTransport(url)))

    def test_http_reversed(self, http_server_factory):
        url = http_server_factory(constant_oracle(), reverse=True)
        check_relation_conformance(lambda: OracleClient(HttpTransport(url)))

    def test_ner_in_process(self, small_corpus):
        stub = annotation_echo_ner(small_corpus)
        check_ner_conformance(lambda: NerClient(InProcessTransport(stub)))

    def test_ner_stdio(self, tmp_path, small_corpus):
        from entre.corpus import write_corpus

        corpus_path = tmp_path / "corpus.json"
        write_corpus(small_corpus, corpus_path)
        spec = stub_spec_file(tmp_path, {"kind": "ner_echo", "corpus": "corpus.json"})
        check_ner_conformance(lambda: NerClient(StdioTransport(stdio_cmd(spec))))

    def test_ner_http(self, small_corpus, http_server_factory):
        url = http_server_factory(annotation_echo_ner(small_corpus))
        check_ner_conformance(lambda: NerClient(HttpTransport(url)))


class TestNerEcho:
    def test_spans_match_annotations(self, small_corpus):
        client = NerClient(InProcessTransport(annotation_echo_ner(small_corpus)))
        responses = client.tag_instances(small_corpus)
        for inst in small_corpus:
            got = {(s.span, s.type) for s in responses[inst.id].spans}
            assert got == {
                (inst.subj_span, inst.subj_type),
                (inst.obj_span, inst.obj_type),
            }

    def test_unknown_id_gets_no_spans(self, small_corpus):
        stub = annotation_echo_ner(small_corpus)
        assert stub(NerRequest(id="nope", tokens=("x",))).spans == ()


class _ScriptedTransport:
    """Replays canned raw responses; counts exchanges."""

    identity = "scripted"

    def __init__(self, labels, script):
        self._labels = labels
        self._script = list(script)
        self.exchanges = 0

    def handshake(self):
        return self._labels

    def exchange(self, payloads):
        self.exchanges += 1
        item = self._script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item(payloads) if callable(item) else item

    def close(self):
        pass


class TestClientBehavior:
    def test_empty_batch_makes_no_call(self):
        transport = _ScriptedTransport(["r"], [])
        client = OracleClient(transport)
        assert client.predict_batch([]) == []
        assert transport.exchanges == 0

    def test_retry_then_success(self):
        reqs = relation_requests(2)
        good = [{"id": r.id, "label": "r"} for r in reqs]
        transport = _ScriptedTransport(
            ["r"], [TransportError("boom"), TransportError("boom"), good]
        )
        client = OracleClient(transport, max_attempts=3, backoff_base=0.001)
        preds = client.predict_batch(reqs)
        assert [p.label for p in preds] == ["r", "r"]
        assert transport.exchanges == 3

    def test_retries_bounded(self):
        transport = _ScriptedTransport(
            ["r"], [TransportError("x"), TransportError("x"), TransportError("x")]
        )
        client = OracleClient(transport, max_attempts=3, backoff_base=0.001)
        with pytest.raises(TransportError):
            client.predict_batch(relation_requests(1))

    @pytest.mark.parametrize(
        "mutate,match",
        [
            (lambda good: good[1:], "no response for ids"),
            (lambda good: good + [{"id": "ghost", "label": "r"}], "unknown id"),
            (lambda good: [good[0], good[0], good[1]], "duplicate response"),
            (lambda good: [{**good[0], "label": "unheard-of"}] + good[1:], "not in the handshake"),
            (lambda good: [{"label": "r"}] + good[1:], "missing id"),
            (
                lambda good: [{**good[0], "scores": {"r": 0.1, "q": 0.9}}] + good[1:],
                "argmax",
            ),
            (lambda good: [{"id": good[0]["id"], "error": "nope"}] + good[1:], "error"),
        ],
    )
    def test_protocol_violations_abort(self, mutate, match):
        reqs = relation_requests(2)
        good = [{"id": r.id, "label": "r"} for r in reqs]
        transport = _ScriptedTransport(["r", "q"], [mutate(good)])
        client = OracleClient(transport)
        with pytest.raises(ProtocolError, match=match):
            client.predict_batch(reqs)

    def test_empty_handshake_rejected(self):
        transport = _ScriptedTransport([], [])
        with pytest.raises(ProtocolError, match="no labels"):
            _ = OracleClient(transport).labels

    def test_batching_counts(self):
        reqs = relation_requests(5)
        responder = lambda payloads: [{"id": p["id"], "label": "r"} for p in payloads]
        transport = _ScriptedTransport(["r"], [responder, responder, responder])
        client = OracleClient(transport, batch_size=2)
        client.predict_batch(reqs)
        assert transport.exchanges == 3
        assert client.n_batches == 3
        assert client.n_requests == 5

    def test_ner_span_validation(self):
        reqs = [NerRequest(id="a", tokens=("x", "y"))]
        transport = _ScriptedTransport(
            ["PERSON"], [[{"id": "a", "spans": [{"start": 0, "end": 5, "type": "PERSON"}]}]]
        )
        with pytest.raises(ProtocolError, match="out of bounds"):
            NerClient(transport).predict_batch(reqs)

    def test_ner_overlap_validation(self):
        reqs = [NerRequest(id="a", tokens=("x", "y", "z"))]
        spans = [
            {"start": 0, "end": 2, "type": "PERSON"},
            {"start": 1, "end": 3, "type": "PERSON"},
        ]
        transport = _ScriptedTransport(["PERSON"], [[{"id": "a", "spans": spans}]])
        with pytest.raises(ProtocolError, match="overlap"):
            NerClient(transport).predict_batch(reqs)

    def test_ner_type_closure(self):
        reqs = [NerRequest(id="a", tokens=("x",))]
        transport = _ScriptedTransport(
            ["PERSON"], [[{"id": "a", "spans": [{"start": 0, "end": 1, "type": "CITY"}]}]]
        )
        with pytest.raises(ProtocolError, match="not in the handshake"):
            NerClient(transport).predict_batch(reqs)

    def test_workers_merge_by_id(self):
        stub = context_reader_stub(default_trigger_map())
        client = OracleClient(InProcessTransport(stub), batch_size=2, workers=4)
        corpus = synthetic_corpus(25, seed=8)
        serial = OracleClient(InProcessTransport(stub)).predict_labels(corpus)
        assert client.predict_labels(corpus) == serial


class TestTransportSelection:
    def test_url_maps_to_http(self):
        assert isinstance(transport_for("http://x/y"), HttpTransport)
        assert isinstance(transport_for("https://x/y"), HttpTransport)

    def test_command_maps_to_stdio(self):
        transport = transport_for("python -m entre.stub_server --spec s.json")
        assert isinstance(transport, StdioTransport)

    def test_stdio_transport_restarts_dead_process(self, tmp_path):
        spec = stub_spec_file(tmp_path, {"kind": "constant", "label": "no_relation"})
        transport = StdioTransport(stdio_cmd(spec))
        client = OracleClient(transport, backoff_base=0.001)
        first = client.predict_batch(relation_requests(1))
        transport._proc.kill()
        transport._proc.wait()
        second = client.predict_batch(relation_requests(1))
        assert [p.label for p in first] == [p.label for p in second]
        client.close()


class TestWireEdgeCases:
    def test_prediction_argmax_tie_is_accepted(self):
        pred = OraclePrediction(id="a", label="r", scores={"r": 0.5, "q": 0.5})
        pred.validate_against(frozenset({"r", "q"}))

    def test_malformed_request_line_gets_error_response(self, tmp_path):
        import subprocess

        spec = stub_spec_file(tmp_path, {"kind": "constant", "label": "no_relation"})
        proc = subprocess.Popen(
            stdio_cmd(spec), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )
        try:
            handshake = proc.stdout.readline()
            assert "labels" in json.loads(handshake)
            proc.stdin.write('{"id": "x"}\n')  # missing every other field
            proc.stdin.write("not json at all\n")
            proc.stdin.flush()
            first = json.loads(proc.stdout.readline())
            second = json.loads(proc.stdout.readline())
            assert first["id"] == "x" and "error" in first
            assert second["id"] is None and "error" in second
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)
