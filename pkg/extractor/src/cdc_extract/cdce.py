"""Reader/writer for the CDCE embedding container.

Little-endian binary, as consumed by the coreference engine:

    magic   4 bytes  b"CDCE"
    version u16      currently 1
    dim     u32      embedding dimensionality D
    then one record per document until EOF:
      id_len u16
      id     id_len bytes, UTF-8 document id
      n_tok  u32
      data   n_tok * D float32, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CDCE"
VERSION = 1


class CdceError(ValueError):
    """The CDCE file is truncated, corrupt, or inconsistent."""


def write_cdce(path: str | Path, matrices: dict[str, np.ndarray]) -> None:
    """Write documents in dict order; float32 row-major payloads."""
    if not matrices:
        raise CdceError("nothing to write: no documents")
    dims = {mat.shape[1] for mat in matrices.values()}
    if len(dims) != 1:
        raise CdceError(f"documents disagree on embedding dim: {sorted(dims)}")
    (dim,) = dims
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", dim))
        for doc_id, mat in matrices.items():
            raw = doc_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise CdceError(f"document id too long: {doc_id[:40]!r}...")
            if mat.ndim != 2 or mat.shape[0] == 0:
                raise CdceError(f"document {doc_id!r} has invalid shape {mat.shape}")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CdceError(f"truncated file while reading {what}")
    return data


def read_cdce(path: str | Path) -> dict[str, np.ndarray]:
    """Read back a CDCE file as doc_id -> (n_tokens, dim) float32."""
    matrices: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise CdceError(f"bad magic; not a {MAGIC.decode()} file")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise CdceError(f"unsupported version {version}")
        (dim,) = struct.unpack("<I", _read_exact(fh, 4, "dim"))
        if dim == 0:
            raise CdceError("embedding dim is zero")
        while True:
            head = fh.read(2)
            if not head:
                break
            if len(head) != 2:
                raise CdceError("truncated file while reading id length")
            (id_len,) = struct.unpack("<H", head)
            doc_id = _read_exact(fh, id_len, "doc id").decode("utf-8")
            if doc_id in matrices:
                raise CdceError(f"duplicate document id {doc_id!r}")
            (n_tok,) = struct.unpack("<I", _read_exact(fh, 4, "token count"))
            if n_tok == 0:
                raise CdceError(f"document {doc_id!r} has zero tokens")
            payload = _read_exact(fh, n_tok * dim * 4, f"data of {doc_id!r}")
            matrices[doc_id] = np.frombuffer(payload, dtype="<f4") \
                .reshape(n_tok, dim).copy()
    return matrices
