"""Multi-vector retrieval with prompt-optimized query decomposition."""

from ._core import (
    DEFAULT_INITIAL_PREFIX,
    DEFAULT_TASK_DESCRIPTION,
    MultiVectorIndex,
    PoqdError,
    __version__,
    build_index,
    decompose_query,
    embed_text,
    exact_match,
    filter_subqueries,
    hit_at_k,
    load_index,
    maxsim_score,
    normalize_answer,
    parse_subqueries,
    render_prompt,
    run_theorem_suite,
    save_index,
    search,
    segment_document,
    top_k_retrieve,
)

__all__ = [
    "DEFAULT_INITIAL_PREFIX",
    "DEFAULT_TASK_DESCRIPTION",
    "MultiVectorIndex",
    "PoqdError",
    "__version__",
    "build_index",
    "decompose_query",
    "embed_text",
    "exact_match",
    "filter_subqueries",
    "hit_at_k",
    "load_index",
    "maxsim_score",
    "normalize_answer",
    "parse_subqueries",
    "render_prompt",
    "run_theorem_suite",
    "save_index",
    "search",
    "segment_document",
    "top_k_retrieve",
]
