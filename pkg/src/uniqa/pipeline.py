"""Pipeline orchestration: ingest -> index -> retrieve -> rank -> generate.

Also owns the pipeline configuration, the persisted conversation sessions,
and the per-request envelope returned by the service and CLI.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

import httpx

from .errors import NotFoundError, ValidationError
from .generation import GeneratedAnswer, GeneratorProviderSpec, build_prompt, generate_answer
from .ranker import CrossScorerSpec, RankedList, rank_and_select
from .retrieval import (
    EmbeddingProviderSpec,
    RetrievalResult,
    VectorIndex,
    build_index,
    load_manifest,
    retrieve_topk,
    save_index,
)
from .unirep import (
    Clue,
    ContextualQuestion,
    ConversationTurn,
    ImageMeta,
    ObjectAttr,
    TableDoc,
    TextDoc,
    TextualizationConfig,
    build_contextual_question,
    make_clue,
)

DEFAULT_K = 30
DEFAULT_N = 10


@dataclass(frozen=True)
class PipelineConfig:
    k: int = DEFAULT_K
    n: int = DEFAULT_N
    embedder: EmbeddingProviderSpec = field(default_factory=EmbeddingProviderSpec)
    scorer: CrossScorerSpec = field(default_factory=CrossScorerSpec)
    generator: GeneratorProviderSpec = field(default_factory=GeneratorProviderSpec)
    textualization: TextualizationConfig = field(default_factory=TextualizationConfig)
    index_path: str | None = None
    sessions_db: str | None = None

    def __post_init__(self):
        if self.k <= 0 or self.n <= 0:
            raise ValidationError("K and N must be positive")
        if self.n > self.k:
            raise ValidationError(f"N ({self.n}) must not exceed K ({self.k})")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "embedder": {"kind": self.embedder.kind,
                         "dimension": self.embedder.dimension,
                         "endpoint": self.embedder.endpoint},
            "scorer": {"kind": self.scorer.kind, "endpoint": self.scorer.endpoint},
            "generator": {"kind": self.generator.kind,
                          "endpoint": self.generator.endpoint,
                          "max_answer_tokens": self.generator.max_answer_tokens},
            "textualization": {
                "use_global": self.textualization.use_global,
                "use_local": self.textualization.use_local,
                "max_history_turns": self.textualization.max_history_turns,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        emb = raw.get("embedder", {})
        sco = raw.get("scorer", {})
        gen = raw.get("generator", {})
        tex = raw.get("textualization", {})
        return cls(
            k=raw.get("k", DEFAULT_K),
            n=raw.get("n", DEFAULT_N),
            embedder=EmbeddingProviderSpec(
                kind=emb.get("kind", "local_hash"),
                dimension=emb.get("dimension", 256),
                endpoint=emb.get("endpoint"),
            ),
            scorer=CrossScorerSpec(kind=sco.get("kind", "local_lexical"),
                                   endpoint=sco.get("endpoint")),
            generator=GeneratorProviderSpec(
                kind=gen.get("kind", "extractive"),
                endpoint=gen.get("endpoint"),
                max_answer_tokens=gen.get("max_answer_tokens", 64),
            ),
            textualization=TextualizationConfig(
                use_global=tex.get("use_global", True),
                use_local=tex.get("use_local", True),
                max_history_turns=tex.get("max_history_turns", 8),
            ),
            index_path=raw.get("index_path"),
            sessions_db=raw.get("sessions_db"),
        )

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def with_textualization(self, tex: TextualizationConfig) -> "PipelineConfig":
        return replace(self, textualization=tex)


# ---------------------------------------------------------------------------
# Corpus ingestion
# ---------------------------------------------------------------------------

def parse_corpus_record(raw: dict) -> TextDoc | TableDoc | ImageMeta:
    """Decode one line-delimited corpus record into its source document."""
    doc_id = raw.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ValidationError("record is missing a string id")
    modality = raw.get("modality")
    title = raw.get("title")
    if title is not None and not isinstance(title, str):
        raise ValidationError(f"record {doc_id!r}: title must be a string")
    present = [k for k in ("text", "table", "image") if raw.get(k) is not None]
    if len(present) != 1 or present[0] != modality:
        raise ValidationError(
            f"record {doc_id!r}: exactly one of text/table/image must be "
            f"present and match modality {modality!r} (got {present})"
        )
    if modality == "text":
        body = raw["text"]
        if not isinstance(body, str) or not body:
            raise ValidationError(f"record {doc_id!r}: text must be non-empty")
        return TextDoc(id=doc_id, text=body, title=title)
    if modality == "table":
        table = raw["table"]
        header = table.get("header")
        rows = table.get("rows", [])
        if not isinstance(header, list) or not isinstance(rows, list):
            raise ValidationError(f"record {doc_id!r}: malformed table payload")
        return TableDoc(id=doc_id, header=list(header),
                        rows=[list(r) for r in rows], title=title)
    if modality == "image":
        image = raw["image"]
        objects = [
            ObjectAttr(name=o.get("name", ""), attributes=list(o.get("attributes", [])))
            for o in image.get("objects", [])
        ]
        return ImageMeta(id=doc_id, caption=image.get("caption", ""),
                         objects=objects, title=title)
    raise ValidationError(f"record {doc_id!r}: unknown modality {modality!r}")


def load_corpus(path: str | Path,
                cfg: TextualizationConfig) -> tuple[list[Clue], list[dict]]:
    """Read a JSONL corpus; returns clues plus per-record error reports."""
    clues: list[Clue] = []
    errors: list[dict] = []
    seen: set[str] = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                doc = parse_corpus_record(raw)
                if doc.id in seen:
                    raise ValidationError(f"duplicate corpus id {doc.id!r}")
                clue = make_clue(doc, cfg)
            except ValidationError as exc:
                if "duplicate corpus id" in str(exc):
                    raise
                errors.append({"line": lineno, "error": str(exc)})
                continue
            except json.JSONDecodeError as exc:
                errors.append({"line": lineno, "error": f"invalid JSON: {exc}"})
                continue
            seen.add(doc.id)
            clues.append(clue)
    return clues, errors


def ingest_and_index(corpus_path: str | Path, config: PipelineConfig) -> Path:
    """Textualize a corpus file and persist the vector index to config.index_path."""
    if not config.index_path:
        raise ValidationError("config.index_path must be set for ingestion")
    clues, errors = load_corpus(corpus_path, config.textualization)
    index = build_index(clues, config.embedder)
    tex = config.textualization
    return save_index(index, config.index_path, extra_manifest={
        "config_fingerprint": config.fingerprint(),
        "textualization": {"use_global": tex.use_global, "use_local": tex.use_local},
        "skipped_records": errors,
    })


def check_index_textualization(index_path: str | Path,
                               cfg: TextualizationConfig) -> None:
    manifest = load_manifest(index_path)
    stored = manifest.get("textualization")
    if stored is None:
        return
    if (stored.get("use_global"), stored.get("use_local")) != (cfg.use_global, cfg.use_local):
        raise ValidationError(
            f"index at {index_path} was built with textualization {stored}, "
            f"which does not match the requested ablation config"
        )


# ---------------------------------------------------------------------------
# Question answering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvidenceClue:
    id: str
    modality: str
    score: float
    text: str


@dataclass
class AnswerEnvelope:
    answer: GeneratedAnswer
    ranked_clues: RankedList
    evidence: list[EvidenceClue]
    contextual_question: ContextualQuestion
    retrieval: RetrievalResult
    timings: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "answer": {
                "text": self.answer.text,
                "provenance": list(self.answer.provenance),
                "generator_kind": self.answer.generator_kind,
            },
            "clues": [
                {"id": e.id, "modality": e.modality, "score": e.score, "text": e.text}
                for e in self.evidence
            ],
            "contextual_question": {
                "text": self.contextual_question.text,
                "turn_count": self.contextual_question.turn_count,
            },
            "timings": dict(self.timings),
        }


def run_stages(question: ContextualQuestion, index: VectorIndex,
               config: PipelineConfig, *, inject_gold_ids: list[str] | None = None,
               client: httpx.Client | None = None) -> AnswerEnvelope:
    """Retrieve K, rank/select N, build the prompt, and generate the answer."""
    if len(index) == 0:
        raise ValidationError("cannot answer questions over an empty index")
    timings: dict[str, float] = {}

    start = time.perf_counter()
    retrieval = retrieve_topk(question, index, config.k, config.embedder, client)
    if inject_gold_ids:
        retrieval = _inject_gold(question, retrieval, inject_gold_ids, index,
                                 config, client)
    timings["retrieve"] = time.perf_counter() - start

    start = time.perf_counter()
    candidates = [index.clue(cid) for cid in retrieval.clue_ids]
    ranked = rank_and_select(question, candidates, config.n, config.scorer, client)
    timings["rank"] = time.perf_counter() - start

    start = time.perf_counter()
    prompt = build_prompt(question, ranked, index.clue_store)
    answer = generate_answer(prompt, config.generator, client)
    timings["generate"] = time.perf_counter() - start
    timings["total"] = sum(timings.values())

    evidence = [
        EvidenceClue(id=item.clue_id, modality=index.clue(item.clue_id).modality,
                     score=item.score, text=index.clue(item.clue_id).text)
        for item in ranked.selected
    ]
    return AnswerEnvelope(answer=answer, ranked_clues=ranked, evidence=evidence,
                          contextual_question=question, retrieval=retrieval,
                          timings=timings)


def _inject_gold(question: ContextualQuestion, retrieval: RetrievalResult,
                 gold_ids: list[str], index: VectorIndex, config: PipelineConfig,
                 client: httpx.Client | None) -> RetrievalResult:
    """Force gold clues into the candidate pool, keeping at most K items.

    Missing golds displace the lowest-scoring retrieved items; every item
    keeps its true similarity score so downstream ordering stays honest.
    """
    from .retrieval import embed

    present = set(retrieval.clue_ids)
    missing = [g for g in sorted(set(gold_ids))
               if g not in present and g in index.clue_store]
    if not missing:
        return retrieval
    query = embed(question.text, config.embedder, client)
    row_of = {cid: i for i, cid in enumerate(index.clue_ids)}
    gold_items = [(gid, float(index.vectors[row_of[gid]] @ query)) for gid in missing]
    keep = retrieval.items[:max(retrieval.k - len(missing), 0)]
    merged = sorted(keep + gold_items, key=lambda item: (-item[1], item[0]))
    return RetrievalResult(items=merged, k=retrieval.k)


def answer_question(session: "Session", question: str, config: PipelineConfig,
                    index: VectorIndex,
                    client: httpx.Client | None = None) -> AnswerEnvelope:
    """Answer within a session: contextualize, run the stages, append the turn."""
    if not question or not question.strip():
        raise ValidationError("question must be non-empty")
    timings: dict[str, float] = {}
    start = time.perf_counter()
    contextual = build_contextual_question(session.turns, question,
                                           config.textualization)
    contextualize = time.perf_counter() - start
    envelope = run_stages(contextual, index, config, client=client)
    envelope.timings["contextualize"] = contextualize
    envelope.timings["total"] += contextualize
    session.turns.append(ConversationTurn(question=question,
                                          answer=envelope.answer.text))
    return envelope


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

@dataclass
class Session:
    session_id: str
    turns: list[ConversationTurn] = field(default_factory=list)
    created_at: float = 0.0


class SessionStore:
    """Sqlite-backed session log; survives service restarts."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._connect() as conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                " session_id TEXT PRIMARY KEY, created_at REAL NOT NULL)"
            )
            conn.execute(
                "CREATE TABLE IF NOT EXISTS turns ("
                " session_id TEXT NOT NULL, seq INTEGER NOT NULL,"
                " question TEXT NOT NULL, answer TEXT NOT NULL,"
                " PRIMARY KEY (session_id, seq))"
            )

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path, timeout=30.0)

    def create(self) -> Session:
        session = Session(session_id=uuid.uuid4().hex, created_at=time.time())
        with self._connect() as conn:
            conn.execute("INSERT INTO sessions VALUES (?, ?)",
                         (session.session_id, session.created_at))
        return session

    def get(self, session_id: str) -> Session:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT created_at FROM sessions WHERE session_id = ?",
                (session_id,),
            ).fetchone()
            if row is None:
                raise NotFoundError(f"unknown session {session_id!r}")
            turns = conn.execute(
                "SELECT question, answer FROM turns WHERE session_id = ?"
                " ORDER BY seq", (session_id,)
            ).fetchall()
        return Session(
            session_id=session_id,
            turns=[ConversationTurn(question=q, answer=a) for q, a in turns],
            created_at=row[0],
        )

    def append_turn(self, session_id: str, question: str, answer: str) -> None:
        with self._connect() as conn:
            seq = conn.execute(
                "SELECT COALESCE(MAX(seq), -1) + 1 FROM turns WHERE session_id = ?",
                (session_id,),
            ).fetchone()[0]
            conn.execute("INSERT INTO turns VALUES (?, ?, ?, ?)",
                         (session_id, seq, question, answer))
