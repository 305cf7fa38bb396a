"""Frozen per-token embedding store and its binary container format.

Embeddings are produced offline by an encoder and consumed here read-only;
nothing in this package ever updates them. The container is a little-endian
binary file:

    magic   4 bytes  b"CDCE"
    version u16      currently 1
    dim     u32      embedding dimensionality D
    then, repeated until EOF, one record per document:
      id_len u16
      id     id_len bytes, UTF-8 document id
      n_tok  u32
      data   n_tok * D float32, row-major

Duplicate document ids are rejected at read time.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .corpus import Corpus

MAGIC = b"CDCE"
VERSION = 1


class EmbeddingFormatError(ValueError):
    """The embedding file is truncated, corrupt, or inconsistent."""


class EmbeddingStore:
    """Immutable map doc_id -> float32 array of shape (n_tokens, dim)."""

    def __init__(self, matrices: dict[str, np.ndarray]):
        if not matrices:
            raise EmbeddingFormatError("embedding store has no documents")
        dims = {mat.shape[1] for mat in matrices.values()}
        if len(dims) != 1:
            raise EmbeddingFormatError(
                f"documents disagree on embedding dim: {sorted(dims)}")
        self._mats: dict[str, np.ndarray] = {}
        for doc_id, mat in matrices.items():
            arr = np.ascontiguousarray(mat, dtype=np.float32)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise EmbeddingFormatError(
                    f"document {doc_id!r} has invalid embedding shape {arr.shape}")
            arr.setflags(write=False)
            self._mats[doc_id] = arr
        self.dim = next(iter(dims))

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._mats

    def __len__(self) -> int:
        return len(self._mats)

    def doc_ids(self) -> list[str]:
        return list(self._mats)

    def matrix(self, doc_id: str) -> np.ndarray:
        try:
            return self._mats[doc_id]
        except KeyError:
            raise KeyError(f"no embeddings for document {doc_id!r}") from None

    def n_tokens(self, doc_id: str) -> int:
        return self.matrix(doc_id).shape[0]

    def validate_against(self, corpus: Corpus) -> None:
        """Every corpus document must be present with matching token count."""
        problems = []
        for doc in corpus.documents:
            if doc.doc_id not in self._mats:
                problems.append(f"missing embeddings for {doc.doc_id!r}")
            elif self.n_tokens(doc.doc_id) != doc.n_tokens:
                problems.append(
                    f"{doc.doc_id!r}: corpus has {doc.n_tokens} tokens, "
                    f"embeddings have {self.n_tokens(doc.doc_id)}")
        if problems:
            raise EmbeddingFormatError("; ".join(problems))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise EmbeddingFormatError(f"truncated file while reading {what}")
    return data


def load_embeddings(path: str | Path) -> EmbeddingStore:
    matrices: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise EmbeddingFormatError(f"bad magic; not a {MAGIC.decode()} file")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise EmbeddingFormatError(f"unsupported version {version}")
        (dim,) = struct.unpack("<I", _read_exact(fh, 4, "dim"))
        if dim == 0:
            raise EmbeddingFormatError("embedding dim is zero")
        while True:
            head = fh.read(2)
            if not head:
                break
            if len(head) != 2:
                raise EmbeddingFormatError("truncated file while reading id length")
            (id_len,) = struct.unpack("<H", head)
            doc_id = _read_exact(fh, id_len, "doc id").decode("utf-8")
            if doc_id in matrices:
                raise EmbeddingFormatError(f"duplicate document id {doc_id!r}")
            (n_tok,) = struct.unpack("<I", _read_exact(fh, 4, "token count"))
            if n_tok == 0:
                raise EmbeddingFormatError(f"document {doc_id!r} has zero tokens")
            payload = _read_exact(fh, n_tok * dim * 4, f"data of {doc_id!r}")
            mat = np.frombuffer(payload, dtype="<f4").reshape(n_tok, dim)
            matrices[doc_id] = mat
    return EmbeddingStore(matrices)


# Relative weight of the shared mention direction against each cluster's
# own direction inside mention tokens.
_MENTION_MIX = 1.0


def synthetic_embeddings(corpus: Corpus, dim: int, cluster_signal: float,
                         noise_scale: float, seed: int,
                         direction_groups: dict[str, str] | None = None
                         ) -> EmbeddingStore:
    """Deterministic synthetic store making coreference recoverable.

    Every gold cluster gets a latent direction, and all mention tokens
    additionally share one global mention direction, so both mention
    detection and coreference transfer across topics with disjoint
    clusters. A token inside a mention is
    cluster_signal * (cluster_direction + mention_direction) plus
    noise_scale * gaussian; other tokens are pure noise.
    `direction_groups` optionally maps cluster ids to shared direction
    keys, letting distinct clusters look identical in embedding space
    (for document-clustering contrast experiments).
    """
    if dim < 8:
        raise ValueError("synthetic embeddings need dim >= 8")
    rng = np.random.default_rng([seed, dim])
    mention_direction = _MENTION_MIX * rng.standard_normal(dim)
    groups = direction_groups or {}
    group_keys = sorted({groups.get(m.cluster_id, m.cluster_id)
                         for m in corpus.mentions})
    directions = {key: rng.standard_normal(dim) for key in group_keys}
    cluster_of_token: dict[tuple[str, int], str] = {}
    for m in corpus.mentions:
        for t in range(m.start, m.end + 1):
            cluster_of_token.setdefault((m.doc_id, t), m.cluster_id)
    mats = {}
    for doc in corpus.documents:
        mat = noise_scale * rng.standard_normal((doc.n_tokens, dim))
        for t in range(doc.n_tokens):
            cid = cluster_of_token.get((doc.doc_id, t))
            if cid is not None:
                direction = directions[groups.get(cid, cid)]
                mat[t] += cluster_signal * (direction + mention_direction)
        mats[doc.doc_id] = mat.astype(np.float32)
    return EmbeddingStore(mats)


def save_embeddings(store_or_mats: EmbeddingStore | dict[str, np.ndarray],
                    path: str | Path) -> None:
    if isinstance(store_or_mats, EmbeddingStore):
        store = store_or_mats
    else:
        store = EmbeddingStore(store_or_mats)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", store.dim))
        for doc_id in store.doc_ids():
            raw = doc_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise EmbeddingFormatError(f"document id too long: {doc_id[:40]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            mat = store.matrix(doc_id)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(mat.astype("<f4", copy=False).tobytes(order="C"))
