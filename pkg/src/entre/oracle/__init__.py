"""Wire protocol, client, and deterministic stub oracles."""

from .client import (  # noqa: F401
    HttpTransport,
    InProcessTransport,
    NerClient,
    OracleClient,
    StdioTransport,
)
from .stubs import (  # noqa: F401
    NerStub,
    StubOracle,
    annotation_echo_ner,
    constant_oracle,
    context_reader_stub,
    entity_memorizer_stub,
)
from .wire import (  # noqa: F401
    NerRequest,
    NerResponse,
    NerSpan,
    OracleError,
    OraclePrediction,
    OracleRequest,
    ProtocolError,
    TransportError,
)
