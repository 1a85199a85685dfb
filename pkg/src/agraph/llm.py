"""Gateway to chat LLM providers.

Everything the agents need from a model goes through here: prompt template
rendering, plain completions, and structured-output completions that
extract the first balanced JSON object from a reply, validate it against a
field spec, and re-prompt with the validation error appended, up to a
bounded number of attempts.

Two providers ship in-tree: a scripted provider that maps the SHA-256 of
the user prompt to a canned reply (the test backbone: it makes every
pipeline behavior a pure function of its inputs), and an HTTP provider
speaking the common chat-completions wire format.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable, List, Mapping, Optional, Protocol, Sequence

import requests


class GatewayError(Exception):
    pass


class ProviderUnavailable(GatewayError):
    def __init__(self, message: str, prompt: Optional[str] = None, tag: Optional[str] = None):
        super().__init__(message)
        self.prompt = prompt
        self.tag = tag


class Timeout(GatewayError):
    pass


class RateLimited(GatewayError):
    def __init__(self, message: str, retry_after: Optional[float] = None):
        super().__init__(message)
        self.retry_after = retry_after


class SchemaViolation(GatewayError):
    def __init__(self, message: str, transcripts: Sequence[tuple] = ()):
        super().__init__(message)
        self.transcripts = list(transcripts)  # (prompt, reply, error) per attempt


class UnknownTemplate(GatewayError):
    pass


class MissingSlot(GatewayError):
    pass


class UnknownSlot(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    temperature: float = 0.0
    max_tokens: int = 1024
    tag: str = "untagged"

    def __post_init__(self):
        if not self.system or not self.user:
            raise ValueError("system and user prompts must be nonempty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass
class StructuredReply:
    raw: str
    value: dict
    attempts: int


@dataclass
class TraceEntry:
    tag: str
    system: str
    user: str
    reply: str
    attempt: int = 1


class LLMProvider(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


# -- providers ------------------------------------------------------------


def script_key(user_prompt: str) -> str:
    return hashlib.sha256(user_prompt.encode("utf-8")).hexdigest()


class ScriptedProvider:
    """Deterministic provider backed by a user-prompt-hash -> reply map."""

    def __init__(self, script: Mapping[str, str]):
        self._script = dict(script)

    @classmethod
    def from_pairs(cls, pairs) -> "ScriptedProvider":
        return cls({script_key(prompt): reply for prompt, reply in pairs})

    @classmethod
    def from_file(cls, path) -> "ScriptedProvider":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self._script, fh, ensure_ascii=False, indent=2, sort_keys=True)

    def add(self, prompt: str, reply: str) -> None:
        self._script[script_key(prompt)] = reply

    def complete(self, request: ChatRequest) -> str:
        key = script_key(request.user)
        if key not in self._script:
            raise ProviderUnavailable("no script entry", prompt=request.user, tag=request.tag)
        return self._script[key]


class HttpProvider:
    """Chat-completions provider over HTTP (bearer auth, messages array)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        post: Callable = requests.post,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self._post = post

    def complete(self, request: ChatRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            response = self._post(
                f"{self.base_url}/chat/completions",
                headers=headers,
                json=body,
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise Timeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if response.status_code == 429:
            retry_after = response.headers.get("Retry-After")
            raise RateLimited("rate limited", float(retry_after) if retry_after else None)
        if response.status_code >= 400:
            raise ProviderUnavailable(f"provider returned HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed provider response: {exc}") from exc


# -- templates --------------------------------------------------------------

# template id -> (asset filename, declared slot names)
TEMPLATES = {
    "intent": ("intent.txt", ("query",)),
    "extraction": ("extraction.txt", ("query", "task_type")),
    "planning": ("planning.txt", ("user_intent", "extracted_concepts", "task_type")),
    "query_generation": ("query_generation.txt", ("task", "concepts", "schema")),
    "reasoning": ("reasoning.txt", ("query_results", "user_query", "task_type")),
    "response": ("response.txt", ("user_query", "intent", "reasoning_results", "task_type")),
    "integration": ("integration.txt", ("new_info", "graph_schema")),
    "relation_definition": (
        "relation_definition.txt",
        ("dataset_description", "example_application", "example_document"),
    ),
    "triple_extraction": ("triple_extraction.txt", ("relations", "seed_entities", "chunk")),
    "fusion_confirm": ("fusion_confirm.txt", ("mention_a", "mention_b")),
}
for _n in range(1, 8):
    TEMPLATES[f"querygen_{_n}"] = (f"querygen_{_n}.txt", ("count",))

_template_cache: dict = {}


def template_text(template_id: str) -> str:
    if template_id not in TEMPLATES:
        raise UnknownTemplate(f"no template named {template_id!r}")
    if template_id not in _template_cache:
        filename, _ = TEMPLATES[template_id]
        path = resources.files("agraph").joinpath("templates", filename)
        _template_cache[template_id] = path.read_text(encoding="utf-8")
    return _template_cache[template_id]


def render_template(template_id: str, slots: Mapping[str, str]) -> str:
    """Substitute declared slots into a template, verbatim otherwise."""
    text = template_text(template_id)
    _, declared = TEMPLATES[template_id]
    for name in slots:
        if name not in declared:
            raise UnknownSlot(f"template {template_id!r} declares no slot {name!r}")
    for name in declared:
        if name not in slots:
            raise MissingSlot(name)
        text = text.replace("{" + name + "}", str(slots[name]))
    return text


# -- structured output -------------------------------------------------------


@dataclass(frozen=True)
class Field:
    name: str
    kind: str = "string"  # string | integer | number | string_list | list | object | any
    required: bool = True
    min_value: Optional[float] = None
    max_value: Optional[float] = None
    nonempty: bool = False


class FieldError(ValueError):
    pass


def _coerce_number(value, integer: bool):
    if isinstance(value, bool):
        raise FieldError("got a boolean")
    if isinstance(value, (int, float)):
        num = value
    elif isinstance(value, str):
        text = value.strip().rstrip("%").strip()
        try:
            num = float(text) if ("." in text or "e" in text.lower()) else int(text)
        except ValueError:
            raise FieldError(f"got non-numeric string {value!r}")
    else:
        raise FieldError(f"got {type(value).__name__}")
    if integer:
        if isinstance(num, float):
            if not num.is_integer():
                raise FieldError(f"expected an integer, got {num}")
            num = int(num)
    return num


def validate_fields(doc, fields: Sequence[Field]) -> dict:
    """Validate and coerce a parsed JSON document against a field spec."""
    if not isinstance(doc, dict):
        raise FieldError(f"expected a JSON object, got {type(doc).__name__}")
    out = dict(doc)
    for spec in fields:
        if spec.name not in doc:
            if spec.required:
                raise FieldError(f"missing required field {spec.name!r}")
            continue
        value = doc[spec.name]
        try:
            if spec.kind in ("integer", "number"):
                value = _coerce_number(value, integer=(spec.kind == "integer"))
                if spec.min_value is not None and value < spec.min_value:
                    raise FieldError(f"must be >= {spec.min_value}, got {value}")
                if spec.max_value is not None and value > spec.max_value:
                    raise FieldError(f"must be <= {spec.max_value}, got {value}")
            elif spec.kind == "string":
                if not isinstance(value, str):
                    raise FieldError(f"expected a string, got {type(value).__name__}")
                if spec.nonempty and not value.strip():
                    raise FieldError("must not be empty")
            elif spec.kind == "string_list":
                if not isinstance(value, list) or any(not isinstance(x, str) for x in value):
                    raise FieldError("expected a list of strings")
                if spec.nonempty and not value:
                    raise FieldError("must not be empty")
            elif spec.kind == "list":
                if not isinstance(value, list):
                    raise FieldError(f"expected a list, got {type(value).__name__}")
                if spec.nonempty and not value:
                    raise FieldError("must not be empty")
            elif spec.kind == "object":
                if not isinstance(value, dict):
                    raise FieldError(f"expected an object, got {type(value).__name__}")
            elif spec.kind != "any":
                raise ValueError(f"unknown field kind {spec.kind!r}")
        except FieldError as exc:
            raise FieldError(f"field {spec.name!r}: {exc}") from None
        out[spec.name] = value
    return out


def extract_json(text: str) -> dict:
    """First balanced JSON object in ``text``, tolerant of fences and prose."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        parsed = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, dict):
                        return parsed
                    break
        start = text.find("{", start + 1)
    raise FieldError("no balanced JSON object found in reply")


def retry_prompt(previous_user: str, error: str) -> str:
    return (
        previous_user
        + "\n\nYour previous reply was not valid: "
        + error
        + "\nReply again with only the valid JSON object."
    )


# -- gateway ---------------------------------------------------------------


class LLMGateway:
    """Single entry point the agents call; owns retries and trace recording."""

    def __init__(self, provider: LLMProvider, retry_limit: int = 3):
        if retry_limit < 1:
            raise ValueError("retry limit must be at least 1")
        self.provider = provider
        self.retry_limit = retry_limit

    def render_template(self, template_id: str, slots: Mapping[str, str]) -> str:
        return render_template(template_id, slots)

    def complete(self, request: ChatRequest, sink: Optional[List[TraceEntry]] = None,
                 attempt: int = 1) -> str:
        reply = self.provider.complete(request)
        if sink is not None:
            sink.append(TraceEntry(request.tag, request.system, request.user, reply, attempt))
        return reply

    def complete_structured(
        self,
        request: ChatRequest,
        fields: Sequence[Field],
        sink: Optional[List[TraceEntry]] = None,
    ) -> StructuredReply:
        transcripts = []
        current = request
        for attempt in range(1, self.retry_limit + 1):
            reply = self.complete(current, sink, attempt=attempt)
            try:
                value = validate_fields(extract_json(reply), fields)
                return StructuredReply(raw=reply, value=value, attempts=attempt)
            except FieldError as exc:
                transcripts.append((current.user, reply, str(exc)))
                if attempt < self.retry_limit:
                    current = ChatRequest(
                        system=request.system,
                        user=retry_prompt(current.user, str(exc)),
                        temperature=request.temperature,
                        max_tokens=request.max_tokens,
                        tag=request.tag,
                    )
        raise SchemaViolation(
            f"no valid reply after {self.retry_limit} attempts "
            f"(last error: {transcripts[-1][2]})",
            transcripts,
        )
