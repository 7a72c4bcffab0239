"""Assemble a runnable engine from configuration."""
from __future__ import annotations

import logging
from pathlib import Path

from .adapters import DEFAULT_ALPHA, DEFAULT_RANK, AdapterRegistry, build_default_registry
from .compression import (
    CompressionConfig,
    load_params,
    seeded_moe_params,
    seeded_projection,
)
from .config import EngineConfig
from .features import load_volume
from .llm import HttpLlmClient
from .memory import ExemplarStore, HistoryLog, HttpEmbeddingClient, MockEmbedder
from .mockllm import MockPlannerLlm, MockRegionLlm
from .orchestration import Engine
from .studies import InMemoryStudyRepository

logger = logging.getLogger(__name__)

# Standalone demo dimensions for seeded adapters; adapter matrices are not
# tied to the feature volume dims.
_ADAPTER_DIM = 64


def build_engine(cfg: EngineConfig, feature_dim: int | None = None) -> Engine:
    """Wire every dependency per the config.

    ``feature_dim`` overrides ``cfg.feature_dim`` for seeded fallback weights
    (callers that already loaded a study pass its d so sizes line up).
    """
    studies = InMemoryStudyRepository()
    if cfg.study_dir:
        for path in sorted(Path(cfg.study_dir).glob("*.ctfv")):
            studies.put(load_volume(path))
            logger.info("loaded study %s", path.stem)

    if cfg.params_path:
        moe, projection = load_params(cfg.params_path)
    else:
        d = feature_dim if feature_dim is not None else cfg.feature_dim
        moe = seeded_moe_params(cfg.seed, d=d, E=cfg.moe_experts, k=cfg.moe_top_k)
        projection = seeded_projection(cfg.seed + 1, d, d * cfg.d_prime_factor)

    if cfg.adapter_dir:
        registry = AdapterRegistry()
        registry.load_directory(cfg.adapter_dir)
        missing = registry.missing_regions()
        if missing:
            logger.warning("adapter registry missing regions: %s", [str(r) for r in missing])
    else:
        registry = build_default_registry(
            cfg.seed, d1=_ADAPTER_DIM, d2=_ADAPTER_DIM, rank=DEFAULT_RANK, alpha=DEFAULT_ALPHA
        )

    if cfg.mock:
        planner_llm = MockPlannerLlm()
        region_llm = MockRegionLlm()
        embedder = MockEmbedder(dim=cfg.embedder_dim, seed=cfg.seed)
    else:
        planner_llm = HttpLlmClient(cfg.planner_endpoint, model="planner")
        region_llm = HttpLlmClient(cfg.region_endpoint, model="region")
        if cfg.embedder_endpoint:
            embedder = HttpEmbeddingClient(cfg.embedder_endpoint, dim=cfg.embedder_dim)
        else:
            embedder = MockEmbedder(dim=cfg.embedder_dim, seed=cfg.seed)

    store = None
    if cfg.store_path and Path(cfg.store_path).is_file():
        store = ExemplarStore.load(cfg.store_path)
        logger.info("loaded exemplar store with %d records", len(store))
    elif cfg.store_path:
        logger.warning("store path %s missing; reports run zero-shot", cfg.store_path)

    history = HistoryLog(cfg.history_path, fsync_on_append=cfg.fsync_history)

    return Engine(
        studies=studies,
        moe=moe,
        projection=projection,
        compression_cfg=CompressionConfig(K=cfg.K, M=cfg.M),
        registry=registry,
        planner_llm=planner_llm,
        region_llm=region_llm,
        embedder=embedder,
        exemplar_store=store,
        history=history,
        template_dir=cfg.template_dir,
        retrieval_k=cfg.retrieval_k,
    )
