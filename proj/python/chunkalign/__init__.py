"""Chunk-alignment distillation toolkit: C++ core with python bindings."""

from ._core import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    Model,
    OracleTeacher,
    cli_run,
    cosine_loss,
    gradcheck,
    make_needle_task,
    make_training_corpus,
    ndcg_at_k,
    recursive_split,
    similarity_loss,
    split_by_word,
    tokenize,
)

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "DimensionError",
    "Model",
    "OracleTeacher",
    "cli_run",
    "cosine_loss",
    "gradcheck",
    "make_needle_task",
    "make_training_corpus",
    "ndcg_at_k",
    "recursive_split",
    "similarity_loss",
    "split_by_word",
    "tokenize",
]
