"""ECB+ XML to corpus JSON conversion.

The ECB+ release is a directory of numeric topic folders, each holding
`<topic>_<n>ecb.xml` and `<topic>_<n>ecbplus.xml` annotation files: a token
list (`t_id`, `sentence`, text), markables anchored to token ids, and
coreference relations. Anchored markables become mentions; abstract
markables (no anchors) only carry instance identity. Cross-document
identity comes from CROSS_DOC_COREF relations (the instance id in `note`,
falling back to the target markable's `instance_id`); INTRA_DOC_COREF
chains get per-document cluster ids; anything unlinked is a singleton.

Cluster ids are namespaced `ev_`/`en_` so event and entity instances can
never collide in the output schema's one-type-per-cluster model.

The optional curated-sentences CSV (topic, file, sentence number) keeps
only manually validated sentences; mentions outside kept sentences are
dropped and token offsets are re-based onto the kept text. Known release
quirks handled with warnings: markables with discontinuous anchors are
collapsed to their min..max span when sentence-internal and skipped
otherwise; duplicate same-type same-span markables in one document are
emitted once.
"""

from __future__ import annotations

import csv
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

DEV_TOPICS = frozenset({2, 5, 12, 18, 21, 23, 34, 35})
TEST_TOPICS = frozenset(range(36, 46))

EVENT_TAG_PREFIXES = ("ACTION_", "NEG_ACTION_")

_FILE_RE = re.compile(r"^(\d+)_(\d+)(ecb|ecbplus)\.xml$")


class EcbError(ValueError):
    """The ECB+ directory or an annotation file is malformed."""


@dataclass
class RawMention:
    m_id: str
    tag: str
    t_ids: list[int]

    @property
    def mention_type(self) -> str:
        return "event" if self.tag.startswith(EVENT_TAG_PREFIXES) else "entity"


@dataclass
class EcbDocument:
    doc_id: str           # file stem, e.g. "1_10ecbplus"
    topic: int
    number: int
    kind: str             # "ecb" | "ecbplus"
    tokens: dict[int, tuple[int, str]] = field(default_factory=dict)
    sentence_order: list[int] = field(default_factory=list)
    mentions: dict[str, RawMention] = field(default_factory=dict)
    instance_of: dict[str, str] = field(default_factory=dict)
    cross_doc: list[tuple[str | None, list[str], str | None]] = field(
        default_factory=list)
    intra_doc: list[tuple[str, list[str]]] = field(default_factory=list)

    @property
    def subtopic(self) -> str:
        return f"{self.topic}_{self.kind}"


def parse_ecb_file(path: Path) -> EcbDocument:
    match = _FILE_RE.match(path.name)
    if not match:
        raise EcbError(f"unrecognized ECB+ file name {path.name!r}")
    topic, number, kind = int(match[1]), int(match[2]), match[3]
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise EcbError(f"{path.name}: malformed XML: {exc}") from exc
    doc = EcbDocument(path.stem, topic, number, kind)
    for token in root.iter("token"):
        t_id = int(token.get("t_id"))
        sentence = int(token.get("sentence"))
        doc.tokens[t_id] = (sentence, token.text or "")
        if sentence not in doc.sentence_order:
            doc.sentence_order.append(sentence)
    markables = root.find("Markables")
    if markables is not None:
        for markable in markables:
            m_id = markable.get("m_id")
            if m_id is None:
                continue
            anchors = [int(a.get("t_id"))
                       for a in markable.findall("token_anchor")]
            if anchors:
                doc.mentions[m_id] = RawMention(m_id, markable.tag,
                                                sorted(anchors))
            else:
                doc.instance_of[m_id] = (markable.get("instance_id")
                                         or markable.get("TAG_DESCRIPTOR")
                                         or f"{doc.doc_id}_inst_{m_id}")
    relations = root.find("Relations")
    if relations is not None:
        for rel in relations:
            sources = [s.get("m_id") for s in rel.findall("source")]
            target = rel.find("target")
            target_id = target.get("m_id") if target is not None else None
            if rel.tag == "CROSS_DOC_COREF":
                doc.cross_doc.append((rel.get("note"), sources, target_id))
            elif rel.tag == "INTRA_DOC_COREF":
                rel_id = rel.get("r_id") or f"intra{len(doc.intra_doc)}"
                members = sources + ([target_id] if target_id else [])
                doc.intra_doc.append((rel_id, members))
    return doc


def load_curated_sentences(path: str | Path) -> set[tuple[int, str, int]]:
    """(topic, file suffix, sentence) triples from the curation CSV.

    The file column is normalized to `<number><kind>` so values with or
    without the topic prefix or the .xml extension all match.
    """
    selected = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip().isdigit():
                continue  # header or blank
            topic = int(row[0])
            name = row[1].strip().removesuffix(".xml")
            name = name.removeprefix(f"{topic}_")
            selected.add((topic, name, int(row[2])))
    if not selected:
        raise EcbError("curated sentences file lists no sentences")
    return selected


def _cluster_key(doc: EcbDocument) -> dict[str, str]:
    """Raw cluster identity per anchored markable id, before namespacing."""
    key: dict[str, str] = {}
    for note, sources, target in doc.cross_doc:
        identity = note or (doc.instance_of.get(target) if target else None) \
            or (f"{doc.doc_id}_rel_{target}" if target else None)
        for m_id in sources:
            if m_id in doc.mentions and identity:
                key[m_id] = identity
    for rel_id, members in doc.intra_doc:
        anchored = [m for m in members if m in doc.mentions]
        identity = f"{doc.doc_id}_wd_{rel_id}"
        for m_id in anchored:
            key.setdefault(m_id, identity)
    for m_id in doc.mentions:
        key.setdefault(m_id, f"{doc.doc_id}_sing_{m_id}")
    return key


def convert_document(doc: EcbDocument,
                     curated: set[tuple[int, str, int]] | None,
                     warn) -> tuple[dict, list[dict]] | None:
    """One document's corpus JSON entry and mentions, or None if empty."""
    suffix = f"{doc.number}{doc.kind}"
    kept_sentences = [
        s for s in sorted(doc.sentence_order)
        if curated is None or (doc.topic, suffix, s) in curated]
    sentence_tokens: dict[int, list[tuple[int, str]]] = {s: []
                                                         for s in kept_sentences}
    for t_id in sorted(doc.tokens):
        sentence, text = doc.tokens[t_id]
        if sentence in sentence_tokens:
            sentence_tokens[sentence].append((t_id, text))
    kept_sentences = [s for s in kept_sentences if sentence_tokens[s]]
    if not kept_sentences:
        return None
    offset_of: dict[int, int] = {}
    sentence_of: dict[int, int] = {}
    sentences: list[list[str]] = []
    flat = 0
    for s in kept_sentences:
        sentences.append([text for _, text in sentence_tokens[s]])
        for t_id, _ in sentence_tokens[s]:
            offset_of[t_id] = flat
            sentence_of[t_id] = s
            flat += 1

    cluster_of = _cluster_key(doc)
    mentions = []
    seen_spans = set()
    for m_id, raw in sorted(doc.mentions.items(), key=lambda kv: kv[1].t_ids):
        anchors = [t for t in raw.t_ids if t in offset_of]
        if not anchors:
            continue  # whole mention outside the curated sentences
        if len(anchors) != len(raw.t_ids):
            warn(f"{doc.doc_id}: markable {m_id} partly outside kept "
                 f"sentences; trimmed")
        if len({sentence_of[t] for t in anchors}) > 1:
            warn(f"{doc.doc_id}: markable {m_id} crosses sentences; skipped")
            continue
        lo, hi = min(anchors), max(anchors)
        if set(range(lo, hi + 1)) - set(anchors):
            warn(f"{doc.doc_id}: markable {m_id} is discontinuous; "
                 f"collapsed to its full span")
        span = (offset_of[lo], offset_of[hi], raw.mention_type)
        if span in seen_spans:
            warn(f"{doc.doc_id}: duplicate {raw.mention_type} span "
                 f"{span[:2]}; kept first")
            continue
        seen_spans.add(span)
        prefix = "ev" if raw.mention_type == "event" else "en"
        mentions.append({"doc_id": doc.doc_id,
                         "start": offset_of[lo], "end": offset_of[hi],
                         "type": raw.mention_type,
                         "cluster_id": f"{prefix}_{cluster_of[m_id]}"})
    entry = {"doc_id": doc.doc_id, "topic_id": str(doc.topic),
             "subtopic_id": doc.subtopic, "sentences": sentences}
    return entry, mentions


def convert_ecb_dir(ecb_dir: str | Path, curated_csv: str | Path | None = None,
                    topics: list[int] | None = None, warn=None
                    ) -> tuple[list[dict], list[dict], dict[str, list[str]]]:
    """Convert a full release; returns (documents, mentions, splits)."""
    warn = warn or (lambda message: None)
    root = Path(ecb_dir)
    if not root.is_dir():
        raise EcbError(f"ECB+ directory {root} does not exist")
    curated = load_curated_sentences(curated_csv) if curated_csv else None
    topic_dirs = sorted((d for d in root.iterdir()
                         if d.is_dir() and d.name.isdigit()),
                        key=lambda d: int(d.name))
    if topics is not None:
        wanted = set(topics)
        topic_dirs = [d for d in topic_dirs if int(d.name) in wanted]
    if not topic_dirs:
        raise EcbError(f"no topic directories under {root}")
    parsed: list[EcbDocument] = []
    for topic_dir in topic_dirs:
        for path in sorted(topic_dir.glob("*.xml")):
            parsed.append(parse_ecb_file(path))
    parsed.sort(key=lambda d: (d.topic, d.number, d.kind))
    documents = []
    mentions = []
    present_topics = []
    for doc in parsed:
        converted = convert_document(doc, curated, warn)
        if converted is None:
            warn(f"{doc.doc_id}: no curated sentences; document dropped")
            continue
        entry, doc_mentions = converted
        documents.append(entry)
        mentions.extend(doc_mentions)
        if entry["topic_id"] not in present_topics:
            present_topics.append(entry["topic_id"])
    splits: dict[str, list[str]] = {"train": [], "dev": [], "test": []}
    for topic_id in present_topics:
        number = int(topic_id)
        if number in DEV_TOPICS:
            splits["dev"].append(topic_id)
        elif number in TEST_TOPICS:
            splits["test"].append(topic_id)
        else:
            splits["train"].append(topic_id)
    return documents, mentions, splits
