"""Line-delimited JSON corpus ingestion: one ``{id, question, answer, meta?}`` object per line."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from attributor.core import QARecord
from attributor.errors import CorpusIOError, DuplicateRecordId, InvalidInput, MalformedRecord

REQUIRED = ("id", "question", "answer")


def load_corpus(path: str | os.PathLike) -> list[QARecord]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusIOError(f"cannot read corpus {path}: {exc}") from exc
    records: list[QARecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise MalformedRecord(lineno, "expected a JSON object")
        for key in REQUIRED:
            if not isinstance(doc.get(key), str):
                raise MalformedRecord(lineno, f"missing or non-string field {key!r}")
        meta = doc.get("meta") or {}
        if not isinstance(meta, dict):
            raise MalformedRecord(lineno, "meta must be an object")
        try:
            record = QARecord(doc["id"], doc["question"], doc["answer"], {str(k): str(v) for k, v in meta.items()})
        except InvalidInput as exc:
            raise MalformedRecord(lineno, str(exc)) from None
        if record.id in seen:
            raise DuplicateRecordId(record.id, f"line {lineno}: duplicate record id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    return records


def corpus_digest(records: list[QARecord]) -> str:
    blob = "\n".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) for r in records)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
