"""Semantic label embeddings: a deterministic trigram-hash embedder plus a
loader for embedding files exported from any external text encoder."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, FormatError, ValidationError
from .kg import ENTITY, RELATION, KnowledgeGraph, OrderedDictionary

DEFAULT_D_SEM = 768

_HEADER_SEP = b"\n\x00"


@dataclass
class SemanticTable:
    vectors: dict[str, np.ndarray]
    d_sem: int
    source: str  # "builtin" | "file"

    def __post_init__(self):
        for name, vec in self.vectors.items():
            if vec.shape != (self.d_sem,):
                raise FormatError(
                    f"semantic vector for {name!r} has shape {vec.shape}, want ({self.d_sem},)"
                )
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"non-finite semantic vector for {name!r}")

    def lookup(self, name: str) -> np.ndarray:
        return self.vectors[name]

    def covers(self, names) -> list[str]:
        """Names NOT covered by the table."""
        return [n for n in names if n not in self.vectors]


def _hash32(payload: str) -> int:
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def embed_label_builtin(text: str, d_sem: int = DEFAULT_D_SEM, seed: int = 0) -> np.ndarray:
    """Character-trigram hashing into `d_sem` signed buckets, L2-normalized."""
    if not text:
        raise ValidationError("cannot embed empty text")
    padded = f"^{text}$"
    vec = np.zeros(d_sem, dtype=np.float64)
    for i in range(len(padded) - 2):
        tri = padded[i : i + 3]
        bucket = _hash32(f"{seed}|b|{tri}") % d_sem
        sign = 1.0 if _hash32(f"{seed}|s|{tri}") % 2 == 0 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # All trigram signs cancelled; fall back to a single seeded bucket.
        vec[_hash32(f"{seed}|f|{text}") % d_sem] = 1.0
        return vec
    return vec / norm


def builtin_semantic_table(
    names, d_sem: int = DEFAULT_D_SEM, seed: int = 0
) -> SemanticTable:
    vectors = {n: embed_label_builtin(n, d_sem, seed) for n in names}
    return SemanticTable(vectors=vectors, d_sem=d_sem, source="builtin")


def graph_symbol_names(g: KnowledgeGraph) -> list[str]:
    return list(g.entities) + list(g.relations)


def save_semantic_file(table: SemanticTable, path) -> None:
    names = list(table.vectors)
    header = json.dumps({"d_sem": table.d_sem, "count": len(names), "names": names})
    blob = np.stack([table.vectors[n] for n in names]).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(_HEADER_SEP)
        fh.write(blob)


def load_semantic_file(path) -> SemanticTable:
    """Read a `{d_sem, count, names[]}` header plus a float32 row blob."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(_HEADER_SEP)
    if sep < 0:
        raise FormatError("semantic file: missing header separator")
    try:
        header = json.loads(raw[:sep].decode("utf-8"))
        d_sem = int(header["d_sem"])
        count = int(header["count"])
        names = list(header["names"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"semantic file: bad header: {exc}") from None
    if len(names) != count:
        raise FormatError(f"semantic file: header declares {count} names, lists {len(names)}")
    blob = raw[sep + len(_HEADER_SEP) :]
    expected = count * d_sem * 4
    if len(blob) != expected:
        raise FormatError(
            f"semantic file: blob is {len(blob)} bytes, want {expected} "
            f"({count} rows x {d_sem} float32)"
        )
    rows = np.frombuffer(blob, dtype="<f4").reshape(count, d_sem).astype(np.float64)
    return SemanticTable(
        vectors={name: rows[i] for i, name in enumerate(names)},
        d_sem=d_sem,
        source="file",
    )


def assemble_semantic_matrix(
    g: KnowledgeGraph, dictionary: OrderedDictionary, table: SemanticTable
) -> np.ndarray:
    """Row i = table vector of the i-th dictionary symbol. Pure re-indexing."""
    if not dictionary.matches(g):
        raise ValidationError("dictionary does not match graph symbols")
    names = []
    for kind, name in dictionary.sequence:
        if kind not in (ENTITY, RELATION):
            raise ValidationError(f"unknown symbol kind {kind!r}")
        names.append(name)
    missing = table.covers(names)
    if missing:
        raise CoverageError(f"semantic table missing symbols: {sorted(set(missing))}")
    return np.stack([table.lookup(n) for n in names])
