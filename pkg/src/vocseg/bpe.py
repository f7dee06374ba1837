"""Byte-pair-encoding tokenizer for the text encoder.

Reads the standard plain-text merges file and token->id vocab shipped with
the exported models. Text is lowercased and whitespace-normalized, split
into words, mapped through the byte-to-unicode table, then merged by rank.
Sequences are padded to the encoder's context length with the start/end
markers in place.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

SOT_TOKEN = "<|startoftext|>"
EOT_TOKEN = "<|endoftext|>"

_WORD_PATTERN = re.compile(
    r"'s|'t|'re|'ve|'m|'ll|'d|[^\W\d_]+|\d|[^\s\w]+", re.IGNORECASE)


@lru_cache(maxsize=1)
def bytes_to_unicode() -> dict[int, str]:
    """GPT-2 style reversible byte -> printable unicode mapping."""
    bs = list(range(ord("!"), ord("~") + 1)) + \
        list(range(ord("\xa1"), ord("\xac") + 1)) + \
        list(range(ord("\xae"), ord("\xff") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


def _clean(text: str) -> str:
    text = html.unescape(html.unescape(text))
    return re.sub(r"\s+", " ", text).strip().lower()


@dataclass
class TokenSequence:
    ids: np.ndarray      # int64, length == context_length
    eot_position: int
    sot_position: int = 0


class BpeTokenizer:
    def __init__(self, merges_path: str | Path, vocab_path: str | Path):
        merges_path, vocab_path = Path(merges_path), Path(vocab_path)
        for p in (merges_path, vocab_path):
            if not p.exists():
                raise FileNotFoundError(f"tokenizer asset not found: {p}")
        lines = merges_path.read_text(encoding="utf-8").splitlines()
        if lines and lines[0].startswith("#"):
            lines = lines[1:]
        self.ranks: dict[tuple[str, str], int] = {}
        for i, line in enumerate(l for l in lines if l):
            first, second = line.split(" ")
            self.ranks[(first, second)] = i
        self.vocab: dict[str, int] = json.loads(vocab_path.read_text(encoding="utf-8"))
        self.byte_encoder = bytes_to_unicode()
        self.sot_id = self.vocab[SOT_TOKEN]
        self.eot_id = self.vocab[EOT_TOKEN]
        self._word_cache: dict[str, list[int]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def _bpe(self, word: str) -> list[str]:
        symbols = [self.byte_encoder[b] for b in word.encode("utf-8")]
        symbols[-1] = symbols[-1] + "</w>"
        while len(symbols) > 1:
            pairs = [(symbols[i], symbols[i + 1]) for i in range(len(symbols) - 1)]
            best = min(pairs, key=lambda p: self.ranks.get(p, float("inf")))
            if best not in self.ranks:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        return symbols

    def encode_words(self, text: str) -> list[int]:
        """Token ids for the cleaned text, without SOT/EOT framing."""
        ids: list[int] = []
        for word in _WORD_PATTERN.findall(_clean(text)):
            cached = self._word_cache.get(word)
            if cached is None:
                cached = [self.vocab[tok] for tok in self._bpe(word)]
                self._word_cache[word] = cached
            ids.extend(cached)
        return ids

    def tokenize(self, text: str, context_length: int = 77) -> TokenSequence:
        """Fixed-length id sequence: SOT, text ids (truncated to fit), EOT, zero pad."""
        if context_length < 2:
            raise ValueError("context_length must be >= 2")
        body = self.encode_words(text)[: context_length - 2]
        ids = np.zeros(context_length, dtype=np.int64)
        ids[0] = self.sot_id
        ids[1:1 + len(body)] = body
        ids[1 + len(body)] = self.eot_id
        return TokenSequence(ids=ids, eot_position=1 + len(body))
