"""Sentence classifiers with generalized multi-head attention pooling."""

import json as _json

from ._gpool import (
    ConfigError,
    DegenerateMaskError,
    DimensionError,
    Error,
    FormatError,
    attention_pool,
    baseline_pool,
    gen_synthetic,
    gradcheck,
    hinge_penalty,
    mean_pairwise_frobenius,
    preset_names,
    run_cli,
    tokenize,
)
from . import _gpool

__all__ = [
    "ConfigError",
    "DegenerateMaskError",
    "DimensionError",
    "Error",
    "FormatError",
    "attention_pool",
    "baseline_pool",
    "config",
    "evaluate",
    "export_attention",
    "gen_synthetic",
    "gradcheck",
    "hinge_penalty",
    "mean_pairwise_frobenius",
    "preset",
    "preset_names",
    "run_cli",
    "tokenize",
    "train",
]


def preset(name):
    """Full configuration of a named preset as a dict."""
    return _json.loads(_gpool.preset_json(name))


def _merge(base, patch):
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def config(name="synthetic", overrides=None):
    """Preset merged with nested overrides, validated against the schema."""
    doc = _merge(preset(name), overrides or {})
    return _json.loads(_gpool.validate_config(_json.dumps(doc)))


def train(cfg):
    """Trains with a full config dict; artifacts land in cfg["out"]."""
    return _gpool.train(_json.dumps(cfg))


def evaluate(checkpoint, split="dev", cfg=None):
    """Accuracy of a checkpoint; the config stored in it is used by default."""
    return _gpool.evaluate(checkpoint, split, None if cfg is None else _json.dumps(cfg))


def export_attention(checkpoint, sentence):
    """Tokens and per-head attention matrices [T x 2d] for one sentence."""
    return _gpool.export_attention(checkpoint, sentence)
