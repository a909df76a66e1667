"""Semantic-code sequential recommender: python surface over the C++ core."""

from ._core import (
    CcfrecError,
    HashingTextEncoder,
    KMeansResult,
    PcaTransform,
    ViewCodebook,
    assign_view_codes,
    fit_kmeans,
    fit_pca,
    fit_pq,
    fit_rq,
    generate_synthetic,
    loss_ce,
    loss_msa,
    loss_total,
    mask_codes,
    ndcg_from_ranks,
    project,
    rank_full,
    recall_from_ranks,
    reconstruct_view,
    run_eval,
    run_pipeline,
)

__all__ = [
    "CcfrecError",
    "HashingTextEncoder",
    "KMeansResult",
    "PcaTransform",
    "ViewCodebook",
    "assign_view_codes",
    "fit_kmeans",
    "fit_pca",
    "fit_pq",
    "fit_rq",
    "generate_synthetic",
    "loss_ce",
    "loss_msa",
    "loss_total",
    "mask_codes",
    "ndcg_from_ranks",
    "project",
    "rank_full",
    "recall_from_ranks",
    "reconstruct_view",
    "run_eval",
    "run_pipeline",
]
