"""Reading documents and corpora, writing artifacts atomically."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .textprep import LABELS, Document, SentenceRecord, pos_tag, tokenize


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})", path, line_no) from None
            if not isinstance(obj, dict):
                raise DataError("expected a JSON object", path, line_no)
            yield line_no, obj


def read_documents(path) -> list[Document]:
    """Plain UTF-8 text (one document named after the file) or JSONL {"id", "text"}."""
    path = Path(path)
    if path.suffix != ".jsonl":
        return [Document(path.stem or "doc", path.read_text(encoding="utf-8"))]
    docs, seen = [], set()
    for line_no, obj in iter_jsonl(path):
        doc_id, text = obj.get("id"), obj.get("text")
        if not isinstance(doc_id, (str, int)) or str(doc_id) == "" or not isinstance(text, str):
            raise DataError('document lines need a non-empty "id" and a string "text"', path, line_no)
        if str(doc_id) in seen:
            raise DataError(f"duplicate document id {doc_id!r}", path, line_no)
        seen.add(str(doc_id))
        docs.append(Document(str(doc_id), text))
    return docs


def read_corpus(path, tag_lexicon=None) -> list[SentenceRecord]:
    """Annotated JSONL {"id", "sent_index", "text", "label"}, tokenized and tagged."""
    out = []
    for line_no, obj in iter_jsonl(path):
        label = obj.get("label")
        text = obj.get("text")
        if label not in LABELS:
            raise DataError(f"label must be one of {LABELS}, got {label!r}", path, line_no)
        if not isinstance(text, str) or not text.strip():
            raise DataError("missing sentence text", path, line_no)
        rec = SentenceRecord(str(obj.get("id", "doc")), int(obj.get("sent_index", line_no - 1)),
                             text, label=label, end=len(text))
        out.append(pos_tag(tokenize(rec), tag_lexicon))
    return out


def write_corpus(path, sentences: Iterable[SentenceRecord]) -> None:
    rows = [json.dumps({"id": s.doc_id, "sent_index": s.sent_index, "text": s.raw, "label": s.label},
                       ensure_ascii=False) for s in sentences]
    atomic_write(path, "".join(r + "\n" for r in rows))


def atomic_write(path, content) -> None:
    """Write text or bytes to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in rows)
