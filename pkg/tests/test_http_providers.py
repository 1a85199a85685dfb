"""HTTP provider and embedder wire formats, exercised against a stub transport."""

import json

import numpy as np
import pytest

from agraph.embedding import EmbeddingError, HttpEmbedder
from agraph.llm import ChatRequest, HttpProvider, ProviderUnavailable, RateLimited, Timeout


class StubResponse:
    def __init__(self, status_code=200, body=None, headers=None):
        self.status_code = status_code
        self._body = body or {}
        self.headers = headers or {}

    def json(self):
        return self._body


def make_request():
    return ChatRequest(system="sys", user="hello", temperature=0.3, max_tokens=42, tag="t")


def test_http_provider_sends_chat_completions_shape():
    captured = {}

    def post(url, headers=None, json=None, timeout=None):
        captured.update(url=url, headers=headers, body=json, timeout=timeout)
        return StubResponse(body={"choices": [{"message": {"content": "hi there"}}]})

    provider = HttpProvider("https://llm.example/v1", "test-model", api_key="secret", post=post)
    reply = provider.complete(make_request())
    assert reply == "hi there"
    assert captured["url"] == "https://llm.example/v1/chat/completions"
    assert captured["headers"]["Authorization"] == "Bearer secret"
    assert captured["body"]["model"] == "test-model"
    assert captured["body"]["messages"][0] == {"role": "system", "content": "sys"}
    assert captured["body"]["messages"][1] == {"role": "user", "content": "hello"}
    assert captured["body"]["temperature"] == 0.3
    assert captured["body"]["max_tokens"] == 42


def test_http_provider_rate_limited_with_retry_after():
    def post(url, **kwargs):
        return StubResponse(status_code=429, headers={"Retry-After": "7"})

    provider = HttpProvider("https://llm.example", "m", post=post)
    with pytest.raises(RateLimited) as err:
        provider.complete(make_request())
    assert err.value.retry_after == 7.0


def test_http_provider_error_status():
    def post(url, **kwargs):
        return StubResponse(status_code=500)

    provider = HttpProvider("https://llm.example", "m", post=post)
    with pytest.raises(ProviderUnavailable):
        provider.complete(make_request())


def test_http_provider_timeout():
    import requests

    def post(url, **kwargs):
        raise requests.Timeout("too slow")

    provider = HttpProvider("https://llm.example", "m", post=post)
    with pytest.raises(Timeout):
        provider.complete(make_request())


def test_http_provider_malformed_body():
    def post(url, **kwargs):
        return StubResponse(body={"unexpected": True})

    provider = HttpProvider("https://llm.example", "m", post=post)
    with pytest.raises(ProviderUnavailable):
        provider.complete(make_request())


def test_http_embedder_round_trip():
    def post(url, headers=None, json=None, timeout=None):
        assert url.endswith("/embeddings")
        assert json["input"] == ["BERT"]
        return StubResponse(body={"data": [{"embedding": [1.0, 0.0, 0.0, 0.0]}]})

    embedder = HttpEmbedder("https://emb.example", "emb-model", dims=4, post=post)
    vector = embedder.embed("BERT")
    assert vector.dims == 4
    assert np.array_equal(vector.values, np.array([1.0, 0.0, 0.0, 0.0]))


def test_http_embedder_error_status():
    def post(url, **kwargs):
        return StubResponse(status_code=503)

    embedder = HttpEmbedder("https://emb.example", "m", dims=4, post=post)
    with pytest.raises(EmbeddingError):
        embedder.embed("text")
