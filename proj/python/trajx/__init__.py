"""Trajectory importance ranking and counterfactual explanations for tabular agents."""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    Dataset,
    Environment,
    Error,
    HashMismatch,
    InvalidAction,
    PropertyViolation,
    QTable,
    ReplayDivergence,
    Trajectory,
    collect,
    derive_seed,
    entropy_confidence,
    kl_divergence,
    load_dataset,
    load_env,
    load_qtable,
    make_env,
    order_by_score,
    presets,
    run_cli,
    train,
    value_iteration,
)

__all__ = [
    "ConfigError", "DataError", "Dataset", "Environment", "Error", "HashMismatch", "InvalidAction",
    "PropertyViolation", "QTable", "ReplayDivergence", "Trajectory", "collect", "counterfactuals",
    "derive_seed", "entropy_confidence", "importance", "kl_divergence", "load_dataset", "load_env",
    "load_qtable", "make_env", "order_by_score", "presets", "rank", "rollout", "run_cli", "train",
    "value_iteration",
]


def importance(env, q, trajectory, metric, **kw):
    """Per-step breakdown and trajectory score as a dict."""
    return json.loads(_core.importance_json(env, q, trajectory, metric, **kw))


def rank(env, q, dataset, metric="vgoal", k=5, **kw):
    """Ranking report as a dict (ranked list, top-k, selected target)."""
    return json.loads(_core.rank_json(env, q, dataset, metric, k, **kw))


def counterfactuals(env, q, trajectory, budget=None, seed=0):
    return json.loads(_core.counterfactuals_json(env, q, trajectory, budget, seed))


def rollout(env, q, trajectory, step, action):
    return json.loads(_core.rollout_json(env, q, trajectory, step, action))
