"""Configuration: defaults, config file, flag overrides, env overrides.

Precedence, lowest to highest: built-in defaults, then the JSON config
file, then command-line flags, then AGRAPH_* environment variables.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping, Optional, Union

from .embedding import HashEmbedder, HttpEmbedder
from .llm import HttpProvider, LLMGateway, ScriptedProvider
from .pipeline import PipelineConfig

DEFAULTS = {
    "bind_host": "127.0.0.1",
    "bind_port": 8023,
    "cors_origin": None,
    "graph_path": None,
    "provider": "scripted",  # scripted | http
    "script_path": None,
    "base_url": None,
    "model": None,
    "api_key": None,
    "embedder": "hash",  # hash | http
    "embedding_base_url": None,
    "embedding_model": None,
    "embedding_dims": 64,
    "query_mode": "hybrid",
    "confidence_threshold": 60.0,
    "refine_budget": 3,
    "retry_limit": 3,
    "link_threshold": 0.80,
    "link_k": 5,
    "session_window": 5,
    "prereq_relation": "prerequisite_of",
    "session_ttl": 3600,
}

ENV_OVERRIDES = {
    "AGRAPH_GRAPH": "graph_path",
    "AGRAPH_PROVIDER": "provider",
    "AGRAPH_SCRIPT": "script_path",
    "AGRAPH_BASE_URL": "base_url",
    "AGRAPH_MODEL": "model",
    "AGRAPH_API_KEY": "api_key",
    "AGRAPH_QUERY_MODE": "query_mode",
}


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, object]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> dict:
    config = dict(DEFAULTS)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    if overrides:
        config.update({k: v for k, v in overrides.items() if v is not None})
    env = os.environ if env is None else env
    for env_key, config_key in ENV_OVERRIDES.items():
        if env_key in env:
            config[config_key] = env[env_key]
    return config


def build_provider(config: Mapping[str, object]):
    kind = config["provider"]
    if kind == "scripted":
        script_path = config.get("script_path")
        if script_path:
            return ScriptedProvider.from_file(script_path)
        return ScriptedProvider({})
    if kind == "http":
        if not config.get("base_url") or not config.get("model"):
            raise ValueError("http provider needs base_url and model")
        return HttpProvider(
            base_url=str(config["base_url"]),
            model=str(config["model"]),
            api_key=str(config.get("api_key") or ""),
        )
    raise ValueError(f"unknown provider kind {kind!r}")


def build_embedder(config: Mapping[str, object]):
    kind = config["embedder"]
    if kind == "hash":
        return HashEmbedder(dims=int(config["embedding_dims"]))
    if kind == "http":
        if not config.get("embedding_base_url") or not config.get("embedding_model"):
            raise ValueError("http embedder needs embedding_base_url and embedding_model")
        return HttpEmbedder(
            base_url=str(config["embedding_base_url"]),
            model=str(config["embedding_model"]),
            dims=int(config["embedding_dims"]),
            api_key=str(config.get("api_key") or ""),
        )
    raise ValueError(f"unknown embedder kind {kind!r}")


def build_gateway(config: Mapping[str, object]) -> LLMGateway:
    return LLMGateway(build_provider(config), retry_limit=int(config["retry_limit"]))


def pipeline_config(config: Mapping[str, object]) -> PipelineConfig:
    return PipelineConfig(
        query_mode=str(config["query_mode"]),
        confidence_threshold=float(config["confidence_threshold"]),
        refine_budget=int(config["refine_budget"]),
        retry_limit=int(config["retry_limit"]),
        link_threshold=float(config["link_threshold"]),
        link_k=int(config["link_k"]),
        session_window=int(config["session_window"]),
        prereq_relation=str(config["prereq_relation"]),
    )
