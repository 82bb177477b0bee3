import pytest

from entre.corpus import REInstance
from entre.oracle.client import InProcessTransport, NerClient, OracleClient
from entre.synthetic import synthetic_corpus, synthetic_lexicon


@pytest.fixture
def john_acme() -> REInstance:
    return REInstance(
        id="ex-1",
        tokens=("John", "works", "at", "ACME"),
        subj_span=(0, 1),
        obj_span=(3, 4),
        subj_type="PERSON",
        obj_type="ORGANIZATION",
        relation="per:employee_of",
    )


@pytest.fixture
def small_corpus():
    return synthetic_corpus(30, seed=11)


@pytest.fixture
def small_lexicon():
    return synthetic_lexicon(120, 80)


def in_process_client(stub, **kwargs) -> OracleClient:
    return OracleClient(InProcessTransport(stub), **kwargs)


def in_process_ner_client(stub, **kwargs) -> NerClient:
    return NerClient(InProcessTransport(stub), **kwargs)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of a run."""
    lines = []
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and getattr(report, "when", "call") == "call":
                name = nodeid.split("::")[-1]
                lines.append((name, status.upper()))
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, status in sorted(set(lines)):
            terminalreporter.write_line(f"  {status:8s} {name}")
