"""Vocabulary embedding with an on-disk cache.

Each (vocabulary, template) pair maps to one `<vocabhash>.<template>.emb`
file: a little-endian uint32 header length, a JSON header, then raw float32
row-major matrix bytes. Rows are L2-normalized text embeddings, one per
vocabulary entry including the open-set row.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .bpe import BpeTokenizer
from .prompts import Vocabulary, build_prompts
from .runtime import ModelHandle, run_embedding

EMB_SCHEMA_VERSION = 1


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float32)
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    return m / norms


def write_embedding_file(path: Path, rows: np.ndarray, header: dict) -> None:
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = struct.pack("<I", len(payload)) + payload + rows.astype("<f4").tobytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)  # atomic: concurrent writers produce identical bytes


def read_embedding_file(path: Path) -> tuple[np.ndarray, dict]:
    blob = path.read_bytes()
    (hlen,) = struct.unpack_from("<I", blob, 0)
    header = json.loads(blob[4:4 + hlen].decode("utf-8"))
    rows = np.frombuffer(blob[4 + hlen:], dtype="<f4").reshape(header["shape"])
    return rows.copy(), header


def embed_vocabulary(handle: ModelHandle, tokenizer: BpeTokenizer, vocab: Vocabulary,
                     template: str, cache_dir: str | Path | None = None) -> np.ndarray:
    """L2-normalized text embedding matrix for a vocabulary, cached to disk."""
    prompts = build_prompts(vocab, template)
    context_length = handle.context_length or 77
    cache_path = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        cache_path = cache_dir / f"{vocab.digest()}.{template}.emb"
        if cache_path.exists():
            rows, header = read_embedding_file(cache_path)
            if header.get("model") == handle.graph_id:
                return rows
    rows = np.stack([
        run_embedding(handle, tokenizer.tokenize(p, context_length).ids)
        for p in prompts
    ])
    rows = l2_normalize_rows(rows)
    if cache_path is not None:
        write_embedding_file(cache_path, rows, {
            "schema_version": EMB_SCHEMA_VERSION,
            "model": handle.graph_id,
            "template": template,
            "shape": list(rows.shape),
            "categories": vocab.names,
        })
    return rows
