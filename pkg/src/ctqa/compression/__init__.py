from .ops import (
    aggregate_global,
    compress_slice,
    compress_volume,
    compression_ratio,
    merge_contextual,
    moe_gate,
    moe_refine_slice,
    score_dominant,
    select_dominant,
)
from .types import (
    CompressedVision,
    CompressionConfig,
    MoeParams,
    Projection,
    identity_moe_params,
    identity_projection,
    load_params,
    load_params_bytes,
    save_params,
    save_params_bytes,
    seeded_moe_params,
    seeded_projection,
)

__all__ = [
    "CompressedVision",
    "CompressionConfig",
    "MoeParams",
    "Projection",
    "aggregate_global",
    "compress_slice",
    "compress_volume",
    "compression_ratio",
    "identity_moe_params",
    "identity_projection",
    "load_params",
    "load_params_bytes",
    "merge_contextual",
    "moe_gate",
    "moe_refine_slice",
    "save_params",
    "save_params_bytes",
    "score_dominant",
    "seeded_moe_params",
    "seeded_projection",
    "select_dominant",
]
