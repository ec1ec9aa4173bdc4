"""Python access to the perin core. Graphs are passed as MRP JSON lines."""

from ._perin import (
    ConfigError,
    DataError,
    InfeasibleError,
    applicable_rules,
    apply_rule,
    infer_rules,
    normalize,
    optimal_assignment,
    postprocess,
    preprocess,
    run_cli,
    score,
    tokenize,
    validate,
)

__all__ = [
    "ConfigError",
    "DataError",
    "InfeasibleError",
    "applicable_rules",
    "apply_rule",
    "infer_rules",
    "normalize",
    "optimal_assignment",
    "postprocess",
    "preprocess",
    "run_cli",
    "score",
    "tokenize",
    "validate",
    "read_graphs",
]


def read_graphs(path):
    """Non-empty lines of an MRP file."""
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]
