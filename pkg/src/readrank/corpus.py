"""Leveled-corpus loading, validation, and document embedding.

A corpus is a set of documents grouped into *slugs*: the same underlying
text written at several reading levels. Documents carry raw text, a
precomputed vector, or both; :func:`featurize` fills in missing vectors by
averaging word embeddings.

File formats (both UTF-8):

* Corpus: line-delimited JSON, one object per line with keys ``doc_id``,
  ``slug``, ``level``, optional ``lang``, and at least one of ``text`` /
  ``vector``.
* Embeddings: text header ``count dim`` followed by one
  ``token v1 ... v_dim`` row per word.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

Tokenizer = Callable[[str], list[str]]


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Default tokenizer: lowercase, split on whitespace, strip surrounding punctuation.

    This is a deliberately minimal, reproducible choice; pass a custom
    tokenizer to :func:`featurize` or :func:`embed_document` to override it.
    """
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass
class Document:
    """One text at one reading level.

    ``level`` is a finite real: integer grades and real-valued scales are
    both accepted. Ordinal label sets (e.g. beginner/intermediate/advanced)
    must be encoded numerically by the data producer (documented mapping
    0/1/2).
    """

    doc_id: str
    slug_id: str
    level: float
    lang: str = "und"
    text: str | None = None
    vector: np.ndarray | None = None


@dataclass
class Slug:
    """A group of documents that are versions of the same underlying text."""

    slug_id: str
    members: list[str]

    @property
    def rankable(self) -> bool:
        return len(self.members) >= 2


@dataclass
class EmbeddingTable:
    """Word-vector lookup table with a fixed dimension."""

    vocab: dict[str, np.ndarray]
    dim: int

    def __len__(self) -> int:
        return len(self.vocab)


@dataclass
class Corpus:
    """Validated document collection with its slug grouping.

    Iteration order of ``documents`` and of slug members is canonical:
    sorted by slug id, then level descending, then doc id. ``dim`` is 0
    until every document carries a vector.
    """

    documents: dict[str, Document]
    slugs: dict[str, Slug]
    dim: int = 0

    @property
    def featurized(self) -> bool:
        return self.dim > 0 and len(self.documents) > 0

    def rankable_slugs(self) -> list[str]:
        return [s for s, slug in self.slugs.items() if slug.rankable]

    def levels(self, doc_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.documents[d].level for d in doc_ids], dtype=float)

    def langs(self) -> list[str]:
        return sorted({doc.lang for doc in self.documents.values()})

    def vector_matrix(self, doc_ids: Sequence[str]) -> np.ndarray:
        """Stack document vectors into a (len(doc_ids), dim) array."""
        rows = []
        for d in doc_ids:
            doc = self.documents.get(d)
            if doc is None:
                raise ValidationError(f"unknown doc_id '{d}'")
            if doc.vector is None:
                raise ValidationError(f"doc '{d}' has no vector; featurize the corpus first")
            rows.append(doc.vector)
        return np.array(rows, dtype=float)

    def subset(self, slug_ids: Iterable[str]) -> "Corpus":
        """Corpus restricted to the given slugs (documents shared, not copied)."""
        wanted = set(slug_ids)
        missing = wanted - set(self.slugs)
        if missing:
            raise ValidationError(f"unknown slug ids: {sorted(missing)}")
        docs = [
            self.documents[d]
            for s in sorted(wanted)
            for d in self.slugs[s].members
        ]
        return build_corpus(docs)


def _canonical_key(doc: Document) -> tuple:
    return (doc.slug_id, -doc.level, doc.doc_id)


def build_corpus(documents: Iterable[Document]) -> Corpus:
    """Assemble a Corpus from documents, enforcing its invariants.

    Orders everything canonically, groups slugs, and sets ``dim`` when every
    document already carries a vector (such a corpus counts as featurized).
    """
    docs = sorted(documents, key=_canonical_key)
    by_id: dict[str, Document] = {}
    for doc in docs:
        if doc.doc_id in by_id:
            raise ValidationError(f"duplicate doc_id '{doc.doc_id}'")
        if not np.isfinite(doc.level):
            raise ValidationError(f"doc '{doc.doc_id}': level must be finite")
        by_id[doc.doc_id] = doc

    slugs: dict[str, Slug] = {}
    for doc in by_id.values():
        slugs.setdefault(doc.slug_id, Slug(doc.slug_id, [])).members.append(doc.doc_id)
    slugs = {s: slugs[s] for s in sorted(slugs)}

    dim = 0
    if by_id and all(d.vector is not None for d in by_id.values()):
        dims = {d.vector.size for d in by_id.values()}
        if len(dims) > 1:
            raise ValidationError(f"inconsistent vector dimensions: {sorted(dims)}")
        dim = dims.pop()
    return Corpus(documents=by_id, slugs=slugs, dim=dim)


def _parse_record(rec: object, where: str) -> Document:
    if not isinstance(rec, dict):
        raise ValidationError(f"{where}: record must be a JSON object")
    for key in ("doc_id", "slug", "level"):
        if key not in rec:
            raise ValidationError(f"{where}: missing required field '{key}'")
    doc_id = rec["doc_id"]
    slug = rec["slug"]
    if not isinstance(doc_id, str) or not doc_id:
        raise ValidationError(f"{where}: doc_id must be a non-empty string")
    if not isinstance(slug, str) or not slug:
        raise ValidationError(f"{where}: slug must be a non-empty string")
    level = rec["level"]
    if not isinstance(level, (int, float)) or isinstance(level, bool) or not np.isfinite(level):
        raise ValidationError(f"{where}: doc '{doc_id}' has non-finite or non-numeric level {level!r}")
    text = rec.get("text")
    if text is not None and not isinstance(text, str):
        raise ValidationError(f"{where}: text must be a string")
    vector = rec.get("vector")
    if vector is not None:
        if not isinstance(vector, list) or not vector:
            raise ValidationError(f"{where}: vector must be a non-empty array")
        arr = np.asarray(vector, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValidationError(f"{where}: vector must be a flat array of finite numbers")
        vector = arr
    if text is None and vector is None:
        raise ValidationError(f"{where}: record needs at least one of 'text' or 'vector'")
    lang = rec.get("lang", "und")
    if not isinstance(lang, str):
        raise ValidationError(f"{where}: lang must be a string")
    return Document(doc_id=doc_id, slug_id=slug, level=float(level), lang=lang, text=text, vector=vector)


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load and validate a corpus file.

    Errors carry the offending line number. A corpus whose records all
    include vectors comes back featurized (``dim`` set).
    """
    if format != "jsonl":
        raise ValidationError(f"unknown corpus format '{format}' (supported: jsonl)")
    path = Path(path)
    docs: list[Document] = []
    seen: dict[str, int] = {}
    vec_dim = 0
    vec_line = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: invalid JSON: {exc}") from exc
            doc = _parse_record(rec, where)
            if doc.doc_id in seen:
                raise ValidationError(
                    f"{where}: duplicate doc_id '{doc.doc_id}' (first seen on line {seen[doc.doc_id]})"
                )
            seen[doc.doc_id] = lineno
            if doc.vector is not None:
                if vec_dim == 0:
                    vec_dim, vec_line = doc.vector.size, lineno
                elif doc.vector.size != vec_dim:
                    raise ValidationError(
                        f"{where}: vector dimension {doc.vector.size} != {vec_dim} (first seen on line {vec_line})"
                    )
            docs.append(doc)
    return build_corpus(docs)


def _format_float(x: float) -> float:
    return float(x)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the line-delimited JSON format (canonical order).

    Loading the result reproduces the corpus; saving again is byte-identical.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            rec: dict = {
                "doc_id": doc.doc_id,
                "slug": doc.slug_id,
                "level": _format_float(doc.level),
                "lang": doc.lang,
            }
            if doc.text is not None:
                rec["text"] = doc.text
            if doc.vector is not None:
                rec["vector"] = [_format_float(v) for v in doc.vector]
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a word-vector table from the ``count dim`` header text format.

    Duplicate tokens are resolved last-wins with a warning; any other
    malformation is an error naming the line.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ValidationError(f"{path.name}:1: malformed header {header.strip()!r}, expected 'count dim'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValidationError(f"{path.name}:1: malformed header {header.strip()!r}: {exc}") from exc
        if count <= 0:
            raise ValidationError(f"{path.name}:1: empty vocabulary (count={count}) is unusable")
        if dim <= 0:
            raise ValidationError(f"{path.name}:1: dimension must be positive, got {dim}")
        vocab: dict[str, np.ndarray] = {}
        n_rows = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise ValidationError(
                    f"{path.name}:{lineno}: expected token + {dim} values, got {len(fields)} fields"
                )
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]], dtype=float)
            except ValueError as exc:
                raise ValidationError(f"{path.name}:{lineno}: non-numeric vector value: {exc}") from exc
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"{path.name}:{lineno}: non-finite vector value")
            if token in vocab:
                log.warning("%s:%d: duplicate token '%s', keeping the later entry", path.name, lineno, token)
            vocab[token] = vec
            n_rows += 1
    if n_rows != count:
        raise ValidationError(f"{path.name}: header declares {count} rows but file contains {n_rows}")
    return EmbeddingTable(vocab=vocab, dim=dim)


def embed_document(
    text: str | Sequence[str],
    table: EmbeddingTable,
    tokenizer: Tokenizer | None = None,
) -> np.ndarray:
    """Average the word vectors of a document's in-vocabulary tokens.

    ``text`` may be a raw string (tokenized with ``tokenizer``, default
    :func:`tokenize`) or a pre-split token sequence. Tokens are lowercased
    before lookup; out-of-vocabulary tokens are skipped. Raises if nothing
    is left to average, rather than returning a silent zero vector.
    """
    if isinstance(text, str):
        tokens = (tokenizer or tokenize)(text)
    else:
        tokens = list(text)
    if not tokens:
        raise ValidationError("cannot embed an empty token sequence")
    hits = sorted(t.lower() for t in tokens if t.lower() in table.vocab)
    if not hits:
        raise ValidationError("no in-vocabulary tokens")
    acc = np.zeros(table.dim, dtype=float)
    for tok in hits:
        acc += table.vocab[tok]
    return acc / len(hits)


def featurize(
    corpus: Corpus,
    table: EmbeddingTable | None = None,
    tokenizer: Tokenizer | None = None,
) -> Corpus:
    """Return a corpus in which every document carries a vector.

    Documents with preloaded vectors pass through unchanged after a
    dimension check; the rest are embedded from their text. Idempotent on
    an already-featurized corpus.
    """
    expected = table.dim if table is not None else 0
    new_docs: list[Document] = []
    for doc in corpus.documents.values():
        if doc.vector is not None:
            if expected == 0:
                expected = doc.vector.size
            if doc.vector.size != expected:
                raise ValidationError(
                    f"doc '{doc.doc_id}': vector dimension {doc.vector.size} != {expected}"
                )
            new_docs.append(doc)
            continue
        if table is None:
            raise ValidationError(f"doc '{doc.doc_id}': no vector and no embedding table given")
        if doc.text is None:
            raise ValidationError(f"doc '{doc.doc_id}': neither text nor vector present")
        try:
            vec = embed_document(doc.text, table, tokenizer)
        except ValidationError as exc:
            raise ValidationError(f"doc '{doc.doc_id}': {exc}") from exc
        new_docs.append(replace(doc, vector=vec))
    if not new_docs:
        raise ValidationError("cannot featurize an empty corpus")
    return build_corpus(new_docs)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write an embedding table in the header + rows text format (sorted tokens)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for token in sorted(table.vocab):
            values = " ".join(repr(float(v)) for v in table.vocab[token])
            fh.write(f"{token} {values}\n")
