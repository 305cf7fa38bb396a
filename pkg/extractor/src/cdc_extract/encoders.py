"""Frozen encoders behind one small interface.

An encoder turns corpus tokens into word pieces (`pieces`) and a window of
pieces into one vector per piece (`encode_segment`). Two implementations:

- `stub` / `stub-<dim>`: fully deterministic, dependency-free encoder whose
  piece vectors are a pure function of the piece text. It exists so the
  extraction pipeline, the segmenter, and the output format can be verified
  byte-for-byte without model weights.
- any other name: a HuggingFace model id, loaded lazily so torch and
  transformers stay optional; run in eval mode with gradients off. Special
  tokens are added per window but their vectors are dropped; only corpus
  tokens produce output rows.
"""

from __future__ import annotations

import hashlib

import numpy as np


class EncoderError(RuntimeError):
    """The requested encoder cannot be constructed or applied."""


class StubEncoder:
    """Deterministic hash-based encoder for tests and dry runs."""

    reserved_pieces = 0

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise EncoderError(f"stub dim must be positive, got {dim}")
        self.dim = dim
        self.name = f"stub-{dim}"

    def pieces(self, token: str, sentence_initial: bool) -> list[str]:
        # fixed-width chunks imitate subword splits; every token gets >= 1
        return [token[i:i + 4] for i in range(0, len(token), 4)] or [token]

    def encode_segment(self, pieces: list[str]) -> np.ndarray:
        out = np.empty((len(pieces), self.dim), dtype=np.float32)
        for row, piece in enumerate(pieces):
            digest = hashlib.sha256(piece.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            out[row] = rng.standard_normal(self.dim).astype(np.float32)
        return out


class HuggingFaceEncoder:
    """Frozen transformer encoder; CPU is fine, GPU used if available."""

    def __init__(self, name: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderError(
                f"encoder {name!r} needs the optional dependencies; "
                f"install with: pip install 'cdc-extract[hf]'") from exc
        self._torch = torch
        self.name = name
        self._tokenizer = AutoTokenizer.from_pretrained(name)
        self._model = AutoModel.from_pretrained(name)
        self._model.eval()
        self.dim = int(self._model.config.hidden_size)
        self._prefix, self._suffix = self._special_frame()
        self.reserved_pieces = len(self._prefix) + len(self._suffix)

    def _special_frame(self) -> tuple[list[int], list[int]]:
        """Special-token ids framing a single sequence, split by side.

        Probing a one-character input pins down which side of the content
        each special token sits on; the formatted output of a plain
        tokenizer call is stable across library versions while the helper
        methods for this are not.
        """
        tokenize = self._tokenizer
        skeleton = list(tokenize("")["input_ids"])
        probe = list(tokenize("a")["input_ids"])
        if len(probe) <= len(skeleton):
            raise EncoderError(
                f"encoder {self.name!r}: probe input produced no pieces")
        splits = [k for k in range(len(skeleton) + 1)
                  if probe[:k] == skeleton[:k]
                  and probe[len(probe) - len(skeleton) + k:] == skeleton[k:]]
        if len(splits) != 1:
            raise EncoderError(
                f"encoder {self.name!r}: cannot place content between "
                f"special tokens {skeleton!r}")
        return skeleton[:splits[0]], skeleton[splits[0]:]

    def pieces(self, token: str, sentence_initial: bool) -> list[str]:
        # mid-sentence tokens carry a leading space so BPE sees word starts
        text = token if sentence_initial else " " + token
        pieces = self._tokenizer.tokenize(text)
        if not pieces:
            unk = self._tokenizer.unk_token
            if unk is None:
                raise EncoderError(f"token {token!r} produced no pieces and "
                                   f"{self.name!r} has no unknown-token id")
            pieces = [unk]
        return pieces

    def encode_segment(self, pieces: list[str]) -> np.ndarray:
        torch = self._torch
        ids = list(self._tokenizer.convert_tokens_to_ids(pieces))
        batch = torch.tensor([self._prefix + ids + self._suffix])
        with torch.no_grad():
            hidden = self._model(batch).last_hidden_state[0]
        rows = hidden[len(self._prefix):len(self._prefix) + len(ids)]
        return rows.cpu().numpy().astype(np.float32)


def get_encoder(name: str):
    if name == "stub":
        return StubEncoder()
    if name.startswith("stub-"):
        try:
            dim = int(name.split("-", 1)[1])
        except ValueError as exc:
            raise EncoderError(f"bad stub encoder name {name!r}") from exc
        return StubEncoder(dim)
    return HuggingFaceEncoder(name)
