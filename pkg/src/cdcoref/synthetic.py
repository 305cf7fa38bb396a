"""Synthetic corpus generator for encoder-free testing and demos.

Builds an ECB+-shaped corpus whose coreference structure is recoverable by
construction once paired with `synthetic_embeddings`: each topic has two
subtopics with disjoint vocabularies, every subtopic carries a fixed set of
cross-document clusters, and mentions are width-2 spans separated by filler
tokens so exact span boundaries are unambiguous.

Sentences follow a fixed layout of alternating filler and mention slots, so
every document has sentences_per_doc * mentions_per_sentence gold mentions.
Document token counts are uniform, which makes the pruning budget ceil(l*T)
identical across documents and deliberately larger than the gold mention
count: predicted-mention mode always keeps a few non-gold spans, keeping it
measurably behind gold-mention mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, GoldMention
from .embeddings import EmbeddingStore, synthetic_embeddings


@dataclass(frozen=True)
class SynthConfig:
    n_topics: int = 5
    subtopics_per_topic: int = 2
    docs_per_subtopic: int = 2
    sentences_per_doc: int = 4
    sentence_len: int = 10
    mentions_per_sentence: int = 3
    clusters_per_subtopic: int = 6
    singletons_per_subtopic: int = 1
    vocab_per_subtopic: int = 30
    dim: int = 64
    cluster_signal: float = 0.9
    noise_scale: float = 0.3
    seed: int = 13
    dev_topics: int = 1
    test_topics: int = 1
    # splits whose subtopics reuse the same latent directions, so only
    # vocabulary (hence document clustering) can tell them apart
    ambiguous_splits: tuple[str, ...] = ()

    def __post_init__(self):
        if self.sentence_len < 3 * self.mentions_per_sentence + 1:
            raise ValueError("sentence too short for the mention layout")
        if self.n_topics <= self.dev_topics + self.test_topics:
            raise ValueError("no training topics left")


def _mention_slots(cfg: SynthConfig) -> list[int]:
    """Start offsets of width-2 mention slots within one sentence.

    Layout: one filler, then repeated (mention, mention, filler); trailing
    fillers pad to sentence_len. Mentions never touch each other or the
    sentence boundary.
    """
    return [1 + 3 * i for i in range(cfg.mentions_per_sentence)]


def make_corpus(cfg: SynthConfig) -> Corpus:
    rng = np.random.default_rng([cfg.seed, 101])
    documents: list[Document] = []
    mentions: list[GoldMention] = []
    topic_ids = [f"t{t}" for t in range(cfg.n_topics)]
    slots = _mention_slots(cfg)
    mentions_per_doc = cfg.sentences_per_doc * cfg.mentions_per_sentence
    for t, topic_id in enumerate(topic_ids):
        for s in range(cfg.subtopics_per_topic):
            subtopic_id = f"{topic_id}s{s}"
            vocab = [f"{subtopic_id}w{i:02d}" for i in range(cfg.vocab_per_subtopic)]
            cluster_ids = [f"{subtopic_id}c{k}" for k in range(cfg.clusters_per_subtopic)]
            types = ["event" if k % 2 == 0 else "entity"
                     for k in range(cfg.clusters_per_subtopic)]
            singles_used = 0
            for d in range(cfg.docs_per_subtopic):
                doc_id = f"{subtopic_id}d{d}"
                sentences = []
                doc_mentions = []
                for s_idx in range(cfg.sentences_per_doc):
                    words = [vocab[i] for i in
                             rng.integers(0, len(vocab), cfg.sentence_len)]
                    base = s_idx * cfg.sentence_len
                    for m_idx, offset in enumerate(slots):
                        slot = s_idx * cfg.mentions_per_sentence + m_idx
                        k = (d * mentions_per_doc + slot) % cfg.clusters_per_subtopic
                        cid, mtype = cluster_ids[k], types[k]
                        # the last slots of the last document become
                        # singletons so the corpus has some, like ECB+
                        last_doc = d == cfg.docs_per_subtopic - 1
                        last_slots = slot >= mentions_per_doc - cfg.singletons_per_subtopic
                        if last_doc and last_slots and singles_used < cfg.singletons_per_subtopic:
                            singles_used += 1
                            cid = f"{subtopic_id}single{singles_used}"
                            mtype = "event"
                        doc_mentions.append(GoldMention(
                            doc_id, base + offset, base + offset + 1,
                            mtype, cid))
                    sentences.append(words)
                documents.append(Document(doc_id, topic_id, subtopic_id, sentences))
                mentions.extend(doc_mentions)
    n_eval = cfg.dev_topics + cfg.test_topics
    splits = {"train": topic_ids[:cfg.n_topics - n_eval],
              "dev": topic_ids[cfg.n_topics - n_eval:cfg.n_topics - cfg.test_topics],
              "test": topic_ids[cfg.n_topics - cfg.test_topics:]}
    return Corpus(documents, mentions, splits)


def direction_groups_for(corpus: Corpus, cfg: SynthConfig) -> dict[str, str]:
    """Map cluster ids to direction keys, merging subtopics of ambiguous splits."""
    if not cfg.ambiguous_splits:
        return {}
    ambiguous_topics = set()
    for split in cfg.ambiguous_splits:
        ambiguous_topics.update(corpus.splits.get(split, ()))
    topic_of_doc = {d.doc_id: d.topic_id for d in corpus.documents}
    groups: dict[str, str] = {}
    for m in corpus.mentions:
        topic = topic_of_doc[m.doc_id]
        if topic not in ambiguous_topics or "single" in m.cluster_id:
            continue
        # t0s1c4 -> t0*c4: same direction for matching cluster slots of
        # every subtopic in the topic
        k = m.cluster_id.rsplit("c", 1)[1]
        groups[m.cluster_id] = f"{topic}*c{k}"
    return groups


def make_workspace(cfg: SynthConfig) -> tuple[Corpus, EmbeddingStore]:
    corpus = make_corpus(cfg)
    store = synthetic_embeddings(corpus, cfg.dim, cfg.cluster_signal,
                                 cfg.noise_scale, cfg.seed,
                                 direction_groups_for(corpus, cfg))
    return corpus, store
