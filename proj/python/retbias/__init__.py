"""Retrievability bias toolkit: BM25 retrieval, query-set simulation, and
inequality metrics over the resulting retrievability scores."""

from ._core import (
    Index,
    accumulate,
    filter_query_log,
    gini,
    kendall_tau_b,
    lorenz,
    pearson,
    porter_stem,
    pos_tag,
    preprocess,
    rsq_queries,
    smart_stopwords,
    sq1_queries,
    sq2_queries,
    sq3_queries,
    tokenize,
)

__all__ = [
    "Index",
    "accumulate",
    "filter_query_log",
    "gini",
    "kendall_tau_b",
    "lorenz",
    "pearson",
    "porter_stem",
    "pos_tag",
    "preprocess",
    "rsq_queries",
    "smart_stopwords",
    "sq1_queries",
    "sq2_queries",
    "sq3_queries",
    "tokenize",
]
