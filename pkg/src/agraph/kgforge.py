"""Zero-shot knowledge-graph construction from a text corpus.

Three stages: seed entity extraction (corpus-level TF-IDF over 1-3 gram
terms as a deterministic, dependency-free stand-in for a topic model),
candidate triple extraction via the LLM under input/output token budgets,
and fusion (single-link clustering of near-duplicate entity mentions by
embedding cosine, with an optional LLM yes/no confirmation per merge).
The fused triples are loaded into a graph whose edges all carry a schema
relation and a source-document provenance property.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .embedding import Embedder, EmptyText, cosine
from .graph import CreateEdge, CreateNode, KnowledgeGraph, SchemaHint, slug
from .llm import ChatRequest, Field, LLMGateway, TraceEntry

logger = logging.getLogger(__name__)

TOKEN_FACTOR = 1.3  # whitespace tokens x 1.3 approximates model tokens
DEFAULT_INPUT_BUDGET = 2000
DEFAULT_OUTPUT_BUDGET = 400
DEFAULT_MAX_ENTITIES = 50
DEFAULT_FUSE_THRESHOLD = 0.85
MAX_RELATIONS = 32

STATS_FIELDS = (
    "# docs",
    "avg. tokens/doc",
    "# extracted entities",
    "# entities w/o abstracts",
    "# relations",
    "# triples w/o fusion",
    "# entities w/o fusion",
    "# triples w/ fusion",
    "# entities w/ fusion",
)


class ForgeError(Exception):
    pass


class EmptyCorpus(ForgeError):
    pass


@dataclass(frozen=True)
class RelationDef:
    label: str
    definition: str
    example: Optional[str] = None
    slug: Optional[str] = None  # romanized/ascii handle for non-latin labels

    def handle(self) -> str:
        return self.slug or _slug_label(self.label)


def _slug_label(label: str) -> str:
    return slug(label)


@dataclass
class RelationSchema:
    relations: List[RelationDef]

    def __post_init__(self):
        if not self.relations:
            raise ValueError("a relation schema needs at least one relation")
        seen = set()
        for rel in self.relations:
            if not rel.definition.strip():
                raise ValueError(f"relation {rel.label!r} has an empty definition")
            key = _slug_label(rel.label)
            if key in seen:
                raise ValueError(f"duplicate relation label {rel.label!r}")
            seen.add(key)
        if len(self.relations) > MAX_RELATIONS:
            logger.warning(
                "schema has %d relations (more than %d); keeping all",
                len(self.relations), MAX_RELATIONS,
            )

    def labels(self) -> List[str]:
        return [rel.label for rel in self.relations]

    def by_slug(self) -> Dict[str, str]:
        return {_slug_label(rel.label): rel.label for rel in self.relations}

    def to_dict(self) -> dict:
        return {
            "relations": [
                {
                    "label": rel.label,
                    "definition": rel.definition,
                    **({"example": rel.example} if rel.example else {}),
                    **({"slug": rel.slug} if rel.slug else {}),
                }
                for rel in self.relations
            ]
        }


def save_schema(schema: RelationSchema, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_schema(path: Union[str, Path]) -> RelationSchema:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return RelationSchema([
        RelationDef(
            label=item["label"],
            definition=item["definition"],
            example=item.get("example"),
            slug=item.get("slug"),
        )
        for item in doc["relations"]
    ])


@dataclass(frozen=True)
class CandidateTriple:
    subject: str
    relation: str
    object: str
    source_doc: str
    confidence: Optional[float] = None


@dataclass
class FusionReport:
    merges: List[Tuple[str, List[str], List[float]]]  # (canonical, aliases, scores)
    triples_before: int
    triples_after: int
    entities_before: int
    entities_after: int


@dataclass
class ForgeConfig:
    schema_runs: int = 5
    max_entities: int = DEFAULT_MAX_ENTITIES
    input_budget: int = DEFAULT_INPUT_BUDGET
    output_budget: int = DEFAULT_OUTPUT_BUDGET
    fuse_threshold: float = DEFAULT_FUSE_THRESHOLD
    confirm_merges: bool = False


@dataclass
class BuildResult:
    graph: KnowledgeGraph
    report: FusionReport
    stats: Dict[str, object]
    seed_entities: List[str]
    dropped_triples: int


# -- corpus + token budgets ------------------------------------------------------


def load_corpus(directory: Union[str, Path]) -> Dict[str, str]:
    """Read every .txt file in a directory; the filename stem is the doc id."""
    directory = Path(directory)
    corpus = {}
    for path in sorted(directory.glob("*.txt")):
        corpus[path.stem] = path.read_text(encoding="utf-8")
    return corpus


def approx_tokens(text: str) -> int:
    return math.ceil(len(text.split()) * TOKEN_FACTOR)


def chunk_document(text: str, budget_tokens: int = DEFAULT_INPUT_BUDGET) -> List[str]:
    """Split on whitespace into chunks at most ``budget_tokens`` long."""
    words = text.split()
    if not words:
        return []
    per_chunk = max(1, int(budget_tokens / TOKEN_FACTOR))
    return [" ".join(words[i : i + per_chunk]) for i in range(0, len(words), per_chunk)]


# -- stage 0: relation schema definition -------------------------------------------


_SCHEMA_FIELDS = (Field("relations", "list", nonempty=True),)


def define_schema(
    dataset_description: str,
    example_docs: Mapping[str, str],
    gateway: LLMGateway,
    example_application: str = "question answering over the domain",
    runs: int = 5,
    sink: Optional[List[TraceEntry]] = None,
) -> RelationSchema:
    """Propose relations by prompting over sampled documents and merging runs."""
    if not example_docs:
        raise ValueError("at least one example document is required")
    doc_ids = sorted(example_docs)
    merged: Dict[str, RelationDef] = {}
    for run in range(runs):
        doc_id = doc_ids[run % len(doc_ids)]
        user = gateway.render_template(
            "relation_definition",
            {
                "dataset_description": dataset_description,
                "example_application": example_application,
                "example_document": example_docs[doc_id],
            },
        )
        request = ChatRequest(
            system="You are a knowledge-graph schema designer.",
            user=user,
            tag="relation_definition",
        )
        reply = gateway.complete_structured(request, _SCHEMA_FIELDS, sink)
        for item in reply.value["relations"]:
            if not isinstance(item, dict) or not item.get("label") or not item.get("definition"):
                continue
            key = _slug_label(str(item["label"]))
            if key not in merged:
                merged[key] = RelationDef(
                    label=str(item["label"]),
                    definition=str(item["definition"]),
                    example=item.get("example"),
                )
    if len(merged) > MAX_RELATIONS:
        logger.warning("merged schema has %d relations; consider curating it", len(merged))
    return RelationSchema(list(merged.values()))


# -- stage 1: seed entity extraction ---------------------------------------------------

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

STOPWORDS = frozenset(
    """a an the and or but if then else of in on at by for with to from as is are was
    were be been being it its this that these those which who whom what where when
    how why not no nor so than too very can could should would may might must will
    shall do does did done have has had having i you he she we they them his her our
    their your my me us about into over under between through during before after
    above below again further once here there all any both each few more most other
    some such only own same s t don now""".split()
)


def _doc_terms(text: str) -> List[str]:
    tokens = _WORD_RE.findall(text.casefold())
    terms = []
    for n in (1, 2, 3):
        for i in range(len(tokens) - n + 1):
            gram = tokens[i : i + n]
            if gram[0] in STOPWORDS or gram[-1] in STOPWORDS:
                continue
            if any(len(tok) < 2 for tok in gram):
                continue
            if all(tok.isdigit() for tok in gram):
                continue
            terms.append(" ".join(gram))
    return terms


def extract_seed_entities(
    corpus: Mapping[str, str], max_entities: int = DEFAULT_MAX_ENTITIES
) -> List[str]:
    """Rank candidate entity terms by corpus TF-IDF mass.

    score(term) = total term frequency x (ln((1 + N) / (1 + df)) + 1), the
    smoothed inverse document frequency. Ties break lexicographically.
    """
    if not corpus:
        raise EmptyCorpus("cannot extract entities from an empty corpus")
    n_docs = len(corpus)
    total_tf: Dict[str, int] = {}
    df: Dict[str, int] = {}
    for doc_id in sorted(corpus):
        terms = _doc_terms(corpus[doc_id])
        seen = set()
        for term in terms:
            total_tf[term] = total_tf.get(term, 0) + 1
            if term not in seen:
                df[term] = df.get(term, 0) + 1
                seen.add(term)
    scored = [
        (-tf * (math.log((1 + n_docs) / (1 + df[term])) + 1.0), term)
        for term, tf in total_tf.items()
    ]
    scored.sort()
    return [term for _, term in scored[:max_entities]]


# -- stage 2: candidate triple extraction ------------------------------------------------

_TRIPLE_FIELDS = (Field("triples", "list"),)


def extract_triples(
    chunk: str,
    doc_id: str,
    seed_entities: Sequence[str],
    schema: RelationSchema,
    gateway: LLMGateway,
    input_budget: int = DEFAULT_INPUT_BUDGET,
    output_budget: int = DEFAULT_OUTPUT_BUDGET,
    sink: Optional[List[TraceEntry]] = None,
) -> Tuple[List[CandidateTriple], int]:
    """LLM triple extraction for one chunk; returns (triples, dropped count).

    Triples using a relation outside the schema are dropped and counted.
    """
    if not chunk.strip():
        raise ValueError("chunk must be nonempty")
    if approx_tokens(chunk) > input_budget:
        raise ForgeError(
            f"chunk of ~{approx_tokens(chunk)} tokens exceeds the input budget "
            f"of {input_budget}; this is a chunking bug"
        )
    relations_text = "\n".join(f"- {r.label}: {r.definition}" for r in schema.relations)
    user = gateway.render_template(
        "triple_extraction",
        {
            "relations": relations_text,
            "seed_entities": ", ".join(seed_entities),
            "chunk": chunk,
        },
    )
    request = ChatRequest(
        system="You are a knowledge-graph triple extractor.",
        user=user,
        max_tokens=output_budget,
        tag="triple_extraction",
    )
    reply = gateway.complete_structured(request, _TRIPLE_FIELDS, sink)
    by_slug = schema.by_slug()
    accepted: List[CandidateTriple] = []
    dropped = 0
    for item in reply.value["triples"]:
        if not isinstance(item, dict):
            dropped += 1
            continue
        subject = str(item.get("subject", "")).strip()
        obj = str(item.get("object", "")).strip()
        relation = str(item.get("relation", "")).strip()
        if not subject or not obj or not relation:
            dropped += 1
            continue
        canonical_rel = by_slug.get(_slug_label(relation))
        if canonical_rel is None:
            dropped += 1
            continue
        if slug(subject) == slug(obj):
            dropped += 1
            continue
        confidence = item.get("confidence")
        accepted.append(
            CandidateTriple(
                subject=subject,
                relation=canonical_rel,
                object=obj,
                source_doc=doc_id,
                confidence=float(confidence) if confidence is not None else None,
            )
        )
    return accepted, dropped


# -- stage 3: fusion -------------------------------------------------------------------


class _UnionFind:
    def __init__(self, items):
        self.parent = {item: item for item in items}

    def find(self, item):
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the lexicographically smaller root for determinism
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


_CONFIRM_FIELDS = (Field("same_entity", "string"),)


def fuse(
    triples: Sequence[CandidateTriple],
    embedder: Embedder,
    threshold: float = DEFAULT_FUSE_THRESHOLD,
    gateway: Optional[LLMGateway] = None,
    sink: Optional[List[TraceEntry]] = None,
) -> Tuple[List[CandidateTriple], FusionReport]:
    """Merge near-duplicate entity mentions and rewrite triples onto canonicals.

    Single-link clustering over pairwise cosine >= threshold; the canonical
    name of a cluster is its most frequent alias (ties lexicographic). With a
    gateway, each candidate merge additionally needs an LLM yes. Exact
    duplicate triples collapse; self-referential triples produced by a merge
    are dropped.
    """
    if not triples:
        raise ValueError("fuse requires at least one triple")
    frequency: Dict[str, int] = {}
    for triple in triples:
        for name in (triple.subject, triple.object):
            frequency[name] = frequency.get(name, 0) + 1
    entities = sorted(frequency)
    entities_before = len(entities)

    vectors = {}
    for name in entities:
        try:
            vectors[name] = embedder.embed(name)
        except EmptyText:
            vectors[name] = None

    uf = _UnionFind(entities)
    pair_scores: Dict[Tuple[str, str], float] = {}
    for i, a in enumerate(entities):
        for b in entities[i + 1 :]:
            if vectors[a] is None or vectors[b] is None:
                continue
            score = cosine(vectors[a], vectors[b])
            if score < threshold:
                continue
            if gateway is not None and not _confirm_merge(gateway, a, b, sink):
                continue
            pair_scores[(a, b)] = score
            uf.union(a, b)

    clusters: Dict[str, List[str]] = {}
    for name in entities:
        clusters.setdefault(uf.find(name), []).append(name)

    canonical_of: Dict[str, str] = {}
    merges: List[Tuple[str, List[str], List[float]]] = []
    for members in clusters.values():
        members.sort()
        canonical = min(members, key=lambda m: (-frequency[m], m))
        for member in members:
            canonical_of[member] = canonical
        if len(members) > 1:
            aliases = [m for m in members if m != canonical]
            scores = []
            for alias in aliases:
                if vectors[alias] is not None and vectors[canonical] is not None:
                    scores.append(round(cosine(vectors[alias], vectors[canonical]), 6))
                else:
                    scores.append(1.0)
            merges.append((canonical, aliases, scores))
    merges.sort(key=lambda m: m[0])

    rewritten: List[CandidateTriple] = []
    seen = set()
    for triple in triples:
        subject = canonical_of[triple.subject]
        obj = canonical_of[triple.object]
        if slug(subject) == slug(obj):
            continue
        key = (subject, triple.relation, obj)
        if key in seen:
            continue
        seen.add(key)
        rewritten.append(
            CandidateTriple(subject, triple.relation, obj, triple.source_doc, triple.confidence)
        )

    entity_after = {canonical_of[t.subject] for t in triples} | {
        canonical_of[t.object] for t in triples
    }
    report = FusionReport(
        merges=merges,
        triples_before=len(triples),
        triples_after=len(rewritten),
        entities_before=entities_before,
        entities_after=len(entity_after),
    )
    return rewritten, report


def _confirm_merge(gateway: LLMGateway, a: str, b: str, sink) -> bool:
    user = gateway.render_template("fusion_confirm", {"mention_a": a, "mention_b": b})
    request = ChatRequest(
        system="You are a knowledge-graph entity curator.", user=user, tag="fusion_confirm"
    )
    reply = gateway.complete_structured(request, _CONFIRM_FIELDS, sink)
    return reply.value["same_entity"].strip().lower().startswith("y")


# -- the full build ------------------------------------------------------------------------


def triples_to_graph(
    triples: Sequence[CandidateTriple], schema: RelationSchema
) -> KnowledgeGraph:
    """Load fused triples into a graph; every edge carries its source doc."""
    graph = KnowledgeGraph(
        schema_hint=SchemaHint(labels=["Concept"], relation_types=schema.labels())
    )
    names: Dict[str, str] = {}  # node id -> display name (first wins, sorted)
    for triple in sorted(triples, key=lambda t: (t.subject, t.relation, t.object)):
        for name in (triple.subject, triple.object):
            names.setdefault(slug(name), name)
    batch: list = [
        CreateNode(node_id, ["Concept"], {"name": name})
        for node_id, name in sorted(names.items())
    ]
    taken = set()
    for triple in sorted(triples, key=lambda t: (t.subject, t.relation, t.object, t.source_doc)):
        src, dst = slug(triple.subject), slug(triple.object)
        base = f"{src}__{_slug_label(triple.relation)}__{dst}"
        edge_id, n = base, 2
        while edge_id in taken:
            edge_id = f"{base}__{n}"
            n += 1
        taken.add(edge_id)
        props = {"source_doc": triple.source_doc}
        if triple.confidence is not None:
            props["confidence"] = triple.confidence
        batch.append(CreateEdge(edge_id, src, dst, triple.relation, props))
    if batch:
        graph.mutate(batch)
    return graph


def build(
    corpus: Mapping[str, str],
    schema: RelationSchema,
    gateway: LLMGateway,
    embedder: Embedder,
    config: Optional[ForgeConfig] = None,
    sink: Optional[List[TraceEntry]] = None,
) -> BuildResult:
    """Corpus to graph: seed extraction, chunked triple extraction, fusion, load."""
    config = config or ForgeConfig()
    if not corpus:
        raise EmptyCorpus("the corpus is empty")
    seeds = extract_seed_entities(corpus, config.max_entities)

    raw_triples: List[CandidateTriple] = []
    dropped = 0
    for doc_id in sorted(corpus):
        for chunk in chunk_document(corpus[doc_id], config.input_budget):
            accepted, chunk_dropped = extract_triples(
                chunk, doc_id, seeds, schema, gateway,
                config.input_budget, config.output_budget, sink,
            )
            raw_triples.extend(accepted)
            dropped += chunk_dropped

    if raw_triples:
        fused, report = fuse(
            raw_triples, embedder, config.fuse_threshold,
            gateway if config.confirm_merges else None, sink,
        )
    else:
        fused = []
        report = FusionReport([], 0, 0, 0, 0)
    graph = triples_to_graph(fused, schema)

    token_counts = [approx_tokens(text) for text in corpus.values()]
    stats = {
        "# docs": len(corpus),
        "avg. tokens/doc": round(sum(token_counts) / len(token_counts)),
        "# extracted entities": len(seeds),
        "# entities w/o abstracts": report.entities_after,  # no abstracts are generated
        "# relations": len(schema.relations),
        "# triples w/o fusion": report.triples_before,
        "# entities w/o fusion": report.entities_before,
        "# triples w/ fusion": report.triples_after,
        "# entities w/ fusion": report.entities_after,
    }
    return BuildResult(
        graph=graph, report=report, stats=stats, seed_entities=seeds, dropped_triples=dropped
    )
