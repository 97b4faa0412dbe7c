# Copyright 2026 The slidekit Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the slidekit pathology pipeline."""

from ._slidekit import (
    QUESTIONS,
    SlidekitError,
    TextStore,
    Tower,
    __version__,
    acceptance_rate,
    chunk_text,
    cosine_warmup_lr,
    generation_prompt,
    info_nce,
    judge_prompt,
    normalize_text,
    parse_best,
    parse_decision,
    run_cli,
    sample_filter,
    tile_image,
)

__all__ = [
    "QUESTIONS",
    "SlidekitError",
    "TextStore",
    "Tower",
    "__version__",
    "acceptance_rate",
    "chunk_text",
    "cosine_warmup_lr",
    "generation_prompt",
    "info_nce",
    "judge_prompt",
    "normalize_text",
    "parse_best",
    "parse_decision",
    "run_cli",
    "sample_filter",
    "tile_image",
]
