"""Corpus model for ECB+-style cross-document coreference data.

A corpus is a set of documents grouped into topics (each topic split into
subtopics), plus gold mention annotations carrying event/entity type and a
coreference cluster id, plus named train/dev/test splits over topics.

The on-disk format is a single UTF-8 JSON file:

    {
      "documents": [
        {"doc_id": ..., "topic_id": ..., "subtopic_id": ...,
         "sentences": [["tok", "tok", ...], ...]},
        ...
      ],
      "mentions": [
        {"doc_id": ..., "start": int, "end": int,
         "type": "event"|"entity", "cluster_id": ...},
        ...
      ],
      "splits": {"train": [topic ids], "dev": [...], "test": [...]}
    }

Token indices are document-global, 0-based, and `end` is inclusive.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

MENTION_TYPES = ("event", "entity")
SPLIT_NAMES = ("train", "dev", "test")
MENTION_MODES = ("event", "entity", "all")


class CorpusValidationError(ValueError):
    """A corpus file is malformed or violates a schema invariant."""


@dataclass(frozen=True)
class Token:
    doc_id: str
    sentence_index: int
    token_index: int
    text: str


@dataclass(frozen=True)
class GoldMention:
    doc_id: str
    start: int
    end: int  # inclusive
    mention_type: str
    cluster_id: str

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)


class Document:
    """A tokenized document; sentence structure is kept as token ranges."""

    def __init__(self, doc_id: str, topic_id: str, subtopic_id: str,
                 sentences: list[list[str]]):
        if not sentences or any(len(s) == 0 for s in sentences):
            raise CorpusValidationError(
                f"document {doc_id!r} has no sentences or an empty sentence")
        self.doc_id = doc_id
        self.topic_id = topic_id
        self.subtopic_id = subtopic_id
        tokens: list[Token] = []
        spans: list[tuple[int, int]] = []
        for s_idx, sent in enumerate(sentences):
            first = len(tokens)
            for text in sent:
                tokens.append(Token(doc_id, s_idx, len(tokens), str(text)))
            spans.append((first, len(tokens) - 1))
        self.tokens = tokens
        self.sentence_spans = spans  # inclusive (start, end) per sentence

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    def sentence_of(self, token_index: int) -> int:
        return self.tokens[token_index].sentence_index

    def sentences(self) -> list[list[str]]:
        return [[self.tokens[i].text for i in range(s, e + 1)]
                for s, e in self.sentence_spans]

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "topic_id": self.topic_id,
                "subtopic_id": self.subtopic_id, "sentences": self.sentences()}

    def __repr__(self) -> str:  # pragma: no cover
        return f"Document({self.doc_id!r}, {self.n_tokens} tokens)"


class Corpus:
    """Immutable after construction; safe for concurrent reads."""

    def __init__(self, documents: list[Document], mentions: list[GoldMention],
                 splits: dict[str, list[str]] | None = None):
        if not documents:
            raise CorpusValidationError("corpus has no documents")
        self.documents = list(documents)
        self._doc_pos: dict[str, int] = {}
        for pos, doc in enumerate(self.documents):
            if doc.doc_id in self._doc_pos:
                raise CorpusValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self._doc_pos[doc.doc_id] = pos
        self.mentions = list(mentions)
        self._validate_mentions()
        self.splits = self._validate_splits(splits or {})

    # -- validation -------------------------------------------------------

    def _validate_mentions(self) -> None:
        cluster_type: dict[str, str] = {}
        cluster_topic: dict[str, str] = {}
        seen: set[tuple[str, int, int, str]] = set()
        for m in self.mentions:
            if m.doc_id not in self._doc_pos:
                raise CorpusValidationError(
                    f"mention references unknown document {m.doc_id!r}")
            doc = self.documents[self._doc_pos[m.doc_id]]
            if m.mention_type not in MENTION_TYPES:
                raise CorpusValidationError(
                    f"mention {m.key} has invalid type {m.mention_type!r}")
            if not (0 <= m.start <= m.end < doc.n_tokens):
                raise CorpusValidationError(
                    f"mention {m.key} out of range for document of "
                    f"{doc.n_tokens} tokens")
            if doc.sentence_of(m.start) != doc.sentence_of(m.end):
                raise CorpusValidationError(
                    f"mention {m.key} crosses a sentence boundary")
            dupe = (m.doc_id, m.start, m.end, m.mention_type)
            if dupe in seen:
                raise CorpusValidationError(f"duplicate mention {dupe}")
            seen.add(dupe)
            prev = cluster_type.setdefault(m.cluster_id, m.mention_type)
            if prev != m.mention_type:
                raise CorpusValidationError(
                    f"cluster {m.cluster_id!r} mixes mention types "
                    f"({prev} vs {m.mention_type})")
            topic = doc.topic_id
            prev_topic = cluster_topic.setdefault(m.cluster_id, topic)
            if prev_topic != topic:
                warnings.warn(
                    f"cluster {m.cluster_id!r} reused across topics "
                    f"{prev_topic!r} and {topic!r}", stacklevel=2)

    def _validate_splits(self, splits: dict) -> dict[str, tuple[str, ...]]:
        known_topics = set(self.topics())
        out: dict[str, tuple[str, ...]] = {}
        claimed: dict[str, str] = {}
        for name in SPLIT_NAMES:
            topic_ids = [str(t) for t in splits.get(name, [])]
            for t in topic_ids:
                if t not in known_topics:
                    raise CorpusValidationError(
                        f"split {name!r} references unknown topic {t!r}")
                if t in claimed:
                    raise CorpusValidationError(
                        f"topic {t!r} appears in both {claimed[t]!r} and "
                        f"{name!r} splits")
                claimed[t] = name
            out[name] = tuple(topic_ids)
        unknown = set(splits) - set(SPLIT_NAMES)
        if unknown:
            raise CorpusValidationError(f"unknown split names {sorted(unknown)}")
        return out

    # -- accessors --------------------------------------------------------

    def doc_position(self, doc_id: str) -> int:
        return self._doc_pos[doc_id]

    def document(self, doc_id: str) -> Document:
        return self.documents[self._doc_pos[doc_id]]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._doc_pos

    def topics(self) -> list[str]:
        seen: dict[str, None] = {}
        for doc in self.documents:
            seen.setdefault(doc.topic_id, None)
        return list(seen)

    def documents_of_topic(self, topic_id: str) -> list[Document]:
        return [d for d in self.documents if d.topic_id == topic_id]

    def mentions_of_doc(self, doc_id: str) -> list[GoldMention]:
        return [m for m in self.mentions if m.doc_id == doc_id]

    def split(self, name: str) -> "Corpus":
        """Sub-corpus restricted to the topics of one named split."""
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        topic_ids = set(self.splits.get(name, ()))
        docs = [d for d in self.documents if d.topic_id in topic_ids]
        if not docs:
            raise CorpusValidationError(f"split {name!r} is empty")
        keep = {d.doc_id for d in docs}
        mentions = [m for m in self.mentions if m.doc_id in keep]
        narrowed = {n: [t for t in self.splits[n] if t in topic_ids]
                    for n in SPLIT_NAMES}
        return Corpus(docs, mentions, narrowed)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "documents": [d.to_json() for d in self.documents],
            "mentions": [{"doc_id": m.doc_id, "start": m.start, "end": m.end,
                          "type": m.mention_type, "cluster_id": m.cluster_id}
                         for m in self.mentions],
            "splits": {name: list(topics)
                       for name, topics in self.splits.items()},
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.to_json() == other.to_json()


@dataclass(frozen=True)
class MentionView:
    """Read-only view of a corpus' gold mentions filtered by type."""

    corpus: Corpus
    mode: str
    mentions: tuple[GoldMention, ...]

    def clusters(self) -> dict[str, tuple[GoldMention, ...]]:
        out: dict[str, list[GoldMention]] = {}
        for m in self.mentions:
            out.setdefault(m.cluster_id, []).append(m)
        return {cid: tuple(ms) for cid, ms in out.items()}

    def cluster_sets(self) -> list[set[tuple[str, int, int]]]:
        """Clusters as sets of (doc_id, start, end), first-seen order."""
        return [{m.key for m in ms} for ms in self.clusters().values()]

    def for_doc(self, doc_id: str) -> tuple[GoldMention, ...]:
        return tuple(m for m in self.mentions if m.doc_id == doc_id)

    def mention_keys(self) -> frozenset[tuple[str, int, int]]:
        return frozenset(m.key for m in self.mentions)

    def cluster_of(self) -> dict[tuple[str, int, int], str]:
        return {m.key: m.cluster_id for m in self.mentions}


@dataclass(frozen=True)
class MentionStats:
    mention_count: int
    singleton_count: int
    cluster_count: int


def select_mentions(corpus: Corpus, mode: str) -> MentionView:
    """Filter gold mentions by type; `all` keeps both kinds.

    Cluster ids stay disjoint across types because a cluster may not mix
    types (enforced at load), so the `all` view never conflates an event
    cluster with an entity cluster.
    """
    if mode not in MENTION_MODES:
        raise ValueError(f"unknown mention mode {mode!r}")
    if mode == "all":
        picked = tuple(corpus.mentions)
    else:
        picked = tuple(m for m in corpus.mentions if m.mention_type == mode)
    return MentionView(corpus, mode, picked)


def singleton_stats(source: Corpus | MentionView, mode: str | None = None) -> MentionStats:
    """Mention/singleton/cluster counts over gold clusters of a view."""
    if isinstance(source, Corpus):
        if mode is None:
            raise ValueError("mode is required when passing a Corpus")
        view = select_mentions(source, mode)
    else:
        view = source
    clusters = view.clusters()
    singles = sum(1 for ms in clusters.values() if len(ms) == 1)
    return MentionStats(mention_count=len(view.mentions),
                        singleton_count=singles,
                        cluster_count=len(clusters))


def load_corpus(path: str | Path, format: str = "ecbplus-json") -> Corpus:
    """Load and validate a corpus file in the documented JSON schema."""
    if format != "ecbplus-json":
        raise ValueError(f"unsupported corpus format {format!r}")
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusValidationError(f"corpus file does not parse: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusValidationError("top level of a corpus file must be an object")
    for field in ("documents", "mentions", "splits"):
        if field not in raw:
            raise CorpusValidationError(f"corpus file is missing {field!r}")
    documents = []
    for entry in raw["documents"]:
        try:
            documents.append(Document(str(entry["doc_id"]),
                                      str(entry["topic_id"]),
                                      str(entry["subtopic_id"]),
                                      entry["sentences"]))
        except (KeyError, TypeError) as exc:
            raise CorpusValidationError(f"malformed document entry: {exc}") from exc
    mentions = []
    for entry in raw["mentions"]:
        try:
            mentions.append(GoldMention(str(entry["doc_id"]),
                                        int(entry["start"]), int(entry["end"]),
                                        str(entry["type"]),
                                        str(entry["cluster_id"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusValidationError(f"malformed mention entry: {exc}") from exc
    return Corpus(documents, mentions, raw["splits"])


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus.to_json(), ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8")
