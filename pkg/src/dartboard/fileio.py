"""Binary embedding/score formats and JSONL dataset ingestion.

EMB1 layout: magic `EMB1`, little-endian u32 rows, u32 dims, rows*dims
float32 values row-major, then a UTF-8 JSON array of `rows` id strings.

SCM1 layout: magic `SCM1`, little-endian u32 n_queries, u32 n_passages,
u8 has_pair_block, float32 query x passage block row-major, then (if the
flag is set) a float32 passage x passage block, then two concatenated JSON
arrays: query ids, passage ids.

Malformed binaries raise FormatError carrying the byte offset of the
problem. Zero-norm embedding rows are rejected at load time, naming the id.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .evaluation import EvalError, QueryCase
from .kernels import ScoreMatrix
from .vectors import EmbeddingMatrix

EMB_MAGIC = b"EMB1"
SCM_MAGIC = b"SCM1"


class FormatError(ValueError):
    """Raised for malformed binary or JSONL inputs."""


def write_embeddings(path, ids, data) -> None:
    """Write an EMB1 file. Values are stored as float32; ids must be strings."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise FormatError(f"embedding data must be 2-D, got shape {data.shape}")
    ids = list(ids)
    if len(ids) != data.shape[0]:
        raise FormatError(f"{len(ids)} ids for {data.shape[0]} rows")
    if not all(isinstance(i, str) for i in ids):
        raise FormatError("EMB1 ids must be strings")
    if not np.isfinite(data).all():
        raise FormatError("embedding data contains non-finite values")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", data.shape[0], data.shape[1]))
        f.write(data.tobytes(order="C"))
        f.write(json.dumps(ids, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))


def read_embeddings(path) -> EmbeddingMatrix:
    """Load an EMB1 file into an EmbeddingMatrix (values widened to float64)."""
    raw = Path(path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise FormatError(
            f"{path}: bad magic at byte offset 0: expected {EMB_MAGIC!r}, got {raw[:4]!r}"
        )
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)} (need 12 bytes)")
    rows, dims = struct.unpack_from("<II", raw, 4)
    block_end = 12 + rows * dims * 4
    if len(raw) < block_end:
        raise FormatError(
            f"{path}: truncated float block at byte offset {len(raw)} "
            f"(expected {block_end} bytes for {rows}x{dims} float32)"
        )
    data = np.frombuffer(raw, dtype="<f4", count=rows * dims, offset=12)
    data = data.reshape(rows, dims).astype(np.float64)
    try:
        ids = json.loads(raw[block_end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad id array at byte offset {block_end}: {exc}") from exc
    if not isinstance(ids, list) or len(ids) != rows:
        raise FormatError(f"{path}: id array must hold {rows} entries")
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: non-finite embedding values")
    norms = np.linalg.norm(data, axis=1) if rows else np.empty(0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise FormatError(f"{path}: zero-norm embedding for id {ids[zero[0]]!r}")
    return EmbeddingMatrix(ids=tuple(ids), data=data)


def write_scores(path, query_ids, passage_ids, values, pair_values=None) -> None:
    """Write an SCM1 file. Raw scores are stored as float32; ids must be strings."""
    values = np.asarray(values, dtype=np.float32)
    query_ids, passage_ids = list(query_ids), list(passage_ids)
    if values.shape != (len(query_ids), len(passage_ids)):
        raise FormatError(
            f"score shape {values.shape} does not match "
            f"{len(query_ids)} x {len(passage_ids)} ids"
        )
    if not all(isinstance(i, str) for i in (*query_ids, *passage_ids)):
        raise FormatError("SCM1 ids must be strings")
    if not np.isfinite(values).all():
        raise FormatError("score values contain non-finite values")
    if pair_values is not None:
        pair_values = np.asarray(pair_values, dtype=np.float32)
        n = len(passage_ids)
        if pair_values.shape != (n, n):
            raise FormatError(f"pair block shape {pair_values.shape}, expected ({n}, {n})")
        if not np.isfinite(pair_values).all():
            raise FormatError("pair scores contain non-finite values")
    with open(path, "wb") as f:
        f.write(SCM_MAGIC)
        f.write(struct.pack("<IIB", len(query_ids), len(passage_ids),
                            1 if pair_values is not None else 0))
        f.write(values.tobytes(order="C"))
        if pair_values is not None:
            f.write(pair_values.tobytes(order="C"))
        f.write(json.dumps(query_ids, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))
        f.write(json.dumps(passage_ids, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))


def read_scores(path) -> ScoreMatrix:
    """Load an SCM1 file into a ScoreMatrix (values widened to float64)."""
    raw = Path(path).read_bytes()
    if raw[:4] != SCM_MAGIC:
        raise FormatError(
            f"{path}: bad magic at byte offset 0: expected {SCM_MAGIC!r}, got {raw[:4]!r}"
        )
    if len(raw) < 13:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)} (need 13 bytes)")
    n_q, n_p, has_pair = struct.unpack_from("<IIB", raw, 4)
    offset = 13
    qp_end = offset + n_q * n_p * 4
    if len(raw) < qp_end:
        raise FormatError(
            f"{path}: truncated score block at byte offset {len(raw)} (expected {qp_end} bytes)"
        )
    values = np.frombuffer(raw, dtype="<f4", count=n_q * n_p, offset=offset)
    values = values.reshape(n_q, n_p).astype(np.float64)
    offset = qp_end
    pair = None
    if has_pair:
        pp_end = offset + n_p * n_p * 4
        if len(raw) < pp_end:
            raise FormatError(
                f"{path}: truncated pair block at byte offset {len(raw)} "
                f"(expected {pp_end} bytes)"
            )
        pair = np.frombuffer(raw, dtype="<f4", count=n_p * n_p, offset=offset)
        pair = pair.reshape(n_p, n_p).astype(np.float64)
        offset = pp_end
    try:
        text = raw[offset:].decode("utf-8")
        decoder = json.JSONDecoder()
        query_ids, end = decoder.raw_decode(text)
        passage_ids, _ = decoder.raw_decode(text[end:].lstrip())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad id arrays at byte offset {offset}: {exc}") from exc
    if len(query_ids) != n_q or len(passage_ids) != n_p:
        raise FormatError(
            f"{path}: id arrays hold {len(query_ids)}/{len(passage_ids)} entries, "
            f"expected {n_q}/{n_p}"
        )
    return ScoreMatrix(query_ids=tuple(query_ids), passage_ids=tuple(passage_ids),
                       values=values, pair_values=pair)


def load_passages(path) -> dict[str, str]:
    """JSONL of {id, text} into an id -> text map; duplicate ids rejected."""
    texts: dict[str, str] = {}
    for lineno, record in _iter_jsonl(path):
        pid, text = record.get("id"), record.get("text")
        if not isinstance(pid, str) or not isinstance(text, str):
            raise FormatError(f"{path}:{lineno}: passage needs string 'id' and 'text'")
        if pid in texts:
            raise FormatError(f"{path}:{lineno}: duplicate passage id {pid!r}")
        texts[pid] = text
    return texts


def load_corpus(passages_path, embeddings_path) -> tuple[EmbeddingMatrix, dict[str, str]]:
    """Validated corpus: embedding ids and passage-file ids must coincide."""
    texts = load_passages(passages_path)
    matrix = read_embeddings(embeddings_path)
    emb_ids, txt_ids = set(matrix.ids), set(texts)
    if emb_ids != txt_ids:
        missing = sorted(txt_ids - emb_ids)
        extra = sorted(emb_ids - txt_ids)
        raise FormatError(
            f"passage/embedding id mismatch: missing embeddings for {missing[:10]}, "
            f"embeddings without passages {extra[:10]}"
        )
    return matrix, texts


def load_dataset(path) -> list[QueryCase]:
    """JSONL of labeled query cases.

    Each record: {id, query, answers?, positive, negative}. `positive` is a
    flat id list (simple) or a list of per-component id lists (integration);
    the shape must be consistent across the file.
    """
    cases: list[QueryCase] = []
    shape = None
    for lineno, record in _iter_jsonl(path):
        try:
            case_id = record["id"]
            query = record["query"]
            positive = record["positive"]
            negative = record.get("negative", [])
        except KeyError as exc:
            raise FormatError(f"{path}:{lineno}: missing field {exc}") from exc
        nested = bool(positive) and isinstance(positive[0], list)
        if shape is None:
            shape = nested
        elif shape != nested:
            raise FormatError(
                f"{path}:{lineno}: positive label shape differs from earlier cases"
            )
        answers = record.get("answers", [])
        if not isinstance(answers, list):
            answers = [answers]
        try:
            cases.append(QueryCase(
                case_id=str(case_id),
                query=str(query),
                positive=tuple(tuple(c) for c in positive) if nested else tuple(positive),
                negative=tuple(negative),
                answers=tuple(answers),
            ))
        except EvalError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not cases:
        raise FormatError(f"{path}: no cases found")
    return cases


def write_dataset(path, cases) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for case in cases:
            positive = ([list(c) for c in case.positive] if case.is_integration
                        else list(case.positive))
            f.write(json.dumps({
                "id": case.case_id,
                "query": case.query,
                "answers": list(case.answers),
                "positive": positive,
                "negative": list(case.negative),
            }, ensure_ascii=False) + "\n")


def write_passages(path, texts: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for pid, text in texts.items():
            f.write(json.dumps({"id": pid, "text": text}, ensure_ascii=False) + "\n")


def convert_benchmark(input_path, passages_path, dataset_path) -> tuple[int, int]:
    """One-shot conversion of a raw QA benchmark file to the native shape.

    The input holds one record per query with passage texts inlined:
    {id?, query, answer?, positive: [text...] or [[text...]...],
    negative: [text...]}. All texts across all queries are merged into a
    single passage collection, deduplicated, and assigned stable ids by
    first appearance. Returns (case count, unique passage count).
    """
    records = _read_json_records(input_path)
    pid_by_text: dict[str, str] = {}

    def intern(text) -> str:
        if not isinstance(text, str):
            raise FormatError(f"{input_path}: passage entries must be strings")
        if text not in pid_by_text:
            pid_by_text[text] = f"p{len(pid_by_text):06d}"
        return pid_by_text[text]

    cases: list[QueryCase] = []
    for i, record in enumerate(records):
        if "query" not in record or "positive" not in record:
            raise FormatError(f"{input_path}: record {i} needs 'query' and 'positive'")
        positive = record["positive"]
        nested = bool(positive) and isinstance(positive[0], list)
        if nested:
            pos = tuple(tuple(intern(t) for t in comp) for comp in positive)
        else:
            pos = tuple(intern(t) for t in positive)
        neg = tuple(intern(t) for t in record.get("negative", []))
        answer = record.get("answer", record.get("answers", []))
        answers = answer if isinstance(answer, list) else [answer]
        cases.append(QueryCase(
            case_id=str(record.get("id", i)),
            query=str(record["query"]),
            positive=pos,
            negative=neg,
            answers=tuple(answers),
        ))
    texts = {pid: text for text, pid in pid_by_text.items()}
    write_passages(passages_path, texts)
    write_dataset(dataset_path, cases)
    return len(cases), len(texts)


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc


def _read_json_records(path) -> list[dict]:
    """Accept either a JSON array file or JSON Lines."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        records = json.loads(stripped)
        if not isinstance(records, list):
            raise FormatError(f"{path}: expected a JSON array of records")
        return records
    return [rec for _, rec in _iter_jsonl(path)]
