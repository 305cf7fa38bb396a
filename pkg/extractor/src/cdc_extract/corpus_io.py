"""Minimal reader/writer for the engine's corpus JSON schema.

Only the fields the extractor needs are validated here; the engine applies
its own full validation on load. Schema:

    {"documents": [{"doc_id", "topic_id", "subtopic_id",
                    "sentences": [[token, ...], ...]}, ...],
     "mentions":  [{"doc_id", "start", "end", "type", "cluster_id"}, ...],
     "splits":    {"train": [topic, ...], "dev": [...], "test": [...]}}

Mention offsets index the document's flattened token sequence; `end` is
inclusive; `type` is "event" or "entity".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusIoError(ValueError):
    """The corpus file is missing fields or malformed."""


@dataclass(frozen=True)
class DocumentTokens:
    doc_id: str
    sentences: tuple[tuple[str, ...], ...]

    @property
    def tokens(self) -> list[str]:
        return [tok for sent in self.sentences for tok in sent]


def load_document_tokens(path: str | Path) -> list[DocumentTokens]:
    """Documents in file order, with their sentence structure."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusIoError(f"corpus file does not parse: {exc}") from exc
    if not isinstance(raw, dict) or "documents" not in raw:
        raise CorpusIoError("corpus file has no 'documents' field")
    documents = []
    seen = set()
    for entry in raw["documents"]:
        try:
            doc_id = str(entry["doc_id"])
            sentences = tuple(tuple(str(t) for t in sent)
                              for sent in entry["sentences"])
        except (KeyError, TypeError) as exc:
            raise CorpusIoError(f"malformed document entry: {exc}") from exc
        if doc_id in seen:
            raise CorpusIoError(f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
        if not sentences or any(not sent for sent in sentences):
            raise CorpusIoError(f"document {doc_id!r} has empty sentences")
        documents.append(DocumentTokens(doc_id, sentences))
    if not documents:
        raise CorpusIoError("corpus has no documents")
    return documents


def write_corpus_json(path: str | Path, documents: list[dict],
                      mentions: list[dict], splits: dict) -> None:
    payload = {"documents": documents, "mentions": mentions, "splits": splits}
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8")
