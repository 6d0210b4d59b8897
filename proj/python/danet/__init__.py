"""Python bindings for the danet C++ core."""

from ._core import (
    ConfigError,
    ContractError,
    Error,
    ModelConfig,
    ParseError,
    ValidationError,
    forward,
    gradcheck,
    load_ts,
    mpce,
    ranking_summary,
    ssaw_attention,
    w_mha_attention,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Error",
    "ModelConfig",
    "ParseError",
    "ValidationError",
    "forward",
    "gradcheck",
    "load_ts",
    "mpce",
    "ranking_summary",
    "ssaw_attention",
    "w_mha_attention",
]
