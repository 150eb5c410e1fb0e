"""Backend gateway: wire protocol, transport clients, and in-process mocks.

Generation and scoring models are black boxes behind four JSON-over-HTTP
endpoints (next-token-dist, batch-sample, loglikelihood, nli) or behind
``inprocess:<name>`` descriptors that bypass transport entirely. Every
payload is validated against the protocol invariants before it reaches
pipeline logic.
"""

from .protocol import (
    BackendDescriptor,
    CAPABILITIES,
    parse_nli_payload,
    parse_distribution_payload,
    parse_loglikelihood_payload,
    parse_candidates_payload,
)
from .mocks import (
    MockBigramLM,
    LexicalOverlapNli,
    CharLenScorer,
    demo_bigram_table,
    resolve_inprocess,
)
from .client import HttpBackend
from .mockserver import MockProtocolServer
from .conformance import run_protocol_checks, format_results

__all__ = [
    "BackendDescriptor",
    "CAPABILITIES",
    "MockBigramLM",
    "LexicalOverlapNli",
    "CharLenScorer",
    "demo_bigram_table",
    "resolve_inprocess",
    "HttpBackend",
    "MockProtocolServer",
    "run_protocol_checks",
    "format_results",
    "parse_nli_payload",
    "parse_distribution_payload",
    "parse_loglikelihood_payload",
    "parse_candidates_payload",
]
