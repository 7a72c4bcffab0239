from .corpus import CorpusBuildResult, RegionSplitter, build_corpus
from .embedder import (
    EmbeddingClient,
    HttpEmbeddingClient,
    MockEmbedder,
    encode_findings,
)
from .history import HistoryLog, HistoryRecord
from .queryhub import QueryHub
from .store import ExemplarRecord, ExemplarStore, Retrieved, cosine_sim, retrieve_topk

__all__ = [
    "CorpusBuildResult",
    "EmbeddingClient",
    "ExemplarRecord",
    "ExemplarStore",
    "HistoryLog",
    "HistoryRecord",
    "HttpEmbeddingClient",
    "MockEmbedder",
    "QueryHub",
    "RegionSplitter",
    "Retrieved",
    "build_corpus",
    "cosine_sim",
    "encode_findings",
    "retrieve_topk",
]
