"""Embedding and domain-classifier sidecar generation.

Produces the CSV files that the core pipeline ingests:

* embedding sidecars: ``policy_id,e0,...,e{d-1}`` preceded by one ``#`` line
  recording encoder, revision, pooling and max length;
* score sidecars: ``policy_id`` followed by ``cb_<task>_score`` columns and
  one-hot ``cb_<task>_<label>`` columns, with a JSON manifest alongside.

Model inference goes through the small :class:`Encoder` and
:class:`Classifier` protocols. The default implementations load published
checkpoints with ``transformers`` (imported lazily, so the rest of the package
works without it). Tests and offline runs can pass any object with the same
methods.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from . import _polprog

POOLINGS = ("mean", "cls")


class EmbedError(RuntimeError):
    """Raised for unavailable checkpoints, bad jobs and unusable input texts."""


@dataclass(frozen=True)
class EmbedJob:
    corpus: Path
    encoder: str
    output: Path
    pooling: str = "mean"
    max_length: int = 512
    revision: Optional[str] = None
    batch_size: int = 16

    def validate(self) -> None:
        if self.pooling not in POOLINGS:
            raise EmbedError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.max_length < 2:
            raise EmbedError("max_length must be at least 2")
        if self.batch_size < 1:
            raise EmbedError("batch_size must be positive")


class Encoder(Protocol):
    identifier: str
    revision: str

    def encode(self, texts: Sequence[str], pooling: str, max_length: int) -> Tuple[List[List[float]], List[bool]]:
        """Return one vector per text and a flag per text telling whether it was truncated."""


class Classifier(Protocol):
    def classify(self, checkpoint: str, texts: Sequence[str]) -> List[Dict[str, float]]:
        """Return a label -> probability mapping per text for one classifier head."""


@dataclass(frozen=True)
class Head:
    checkpoint: str
    labels: Tuple[str, ...]


# Climate-domain classifier heads on the model hub. The task list is
# configurable; these are the defaults.
HEADS: Dict[str, Head] = {
    "detector": Head("climatebert/distilroberta-base-climate-detector", ("no", "yes")),
    "sentiment": Head("climatebert/distilroberta-base-climate-sentiment", ("opportunity", "neutral", "risk")),
    "commitment": Head("climatebert/distilroberta-base-climate-commitment", ("no", "yes")),
    "specificity": Head("climatebert/distilroberta-base-climate-specificity", ("non", "spec")),
    "tcfd": Head("climatebert/distilroberta-base-climate-tcfd", ("governance", "metrics", "risk", "strategy")),
}

DEFAULT_TASKS = (
    "detector:score",
    "sentiment:score",
    "commitment:score",
    "specificity:score",
    "tcfd:score",
    "detector:label",
    "sentiment:label",
    "specificity:label",
    "tcfd:label",
)


@dataclass(frozen=True)
class Task:
    head: str
    output: str  # "score" or "label"

    @staticmethod
    def parse(text: str) -> "Task":
        head, _, output = text.partition(":")
        output = output or "score"
        if head not in HEADS:
            raise EmbedError(f"unknown task {text!r}; known heads: {', '.join(sorted(HEADS))}")
        if output not in ("score", "label"):
            raise EmbedError(f"task {text!r}: output must be 'score' or 'label'")
        return Task(head, output)

    def columns(self) -> List[str]:
        if self.output == "score":
            return [f"cb_{self.head}_score"]
        return [f"cb_{self.head}_{label}" for label in HEADS[self.head].labels]


def corpus_texts(path: Path) -> List[Tuple[str, str]]:
    """(id, text) pairs in corpus order; text is title and body joined."""
    corpus = _polprog.parse_corpus(Path(path))
    out = []
    for record in corpus.records:
        text = f"{record.title}\n{record.body}".strip()
        if not _polprog.preprocess(text):
            raise EmbedError(f"policy {record.id}: empty text after preprocessing")
        out.append((record.id, text))
    return out


def _fmt(value: float) -> str:
    if not math.isfinite(value):
        raise EmbedError(f"non-finite value {value!r} produced")
    return format(value, ".9g")


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def embed_corpus(job: EmbedJob, encoder: Optional[Encoder] = None) -> Path:
    job.validate()
    docs = corpus_texts(job.corpus)
    if encoder is None:
        encoder = TransformersEncoder(job.encoder, job.revision)

    vectors: List[List[float]] = []
    truncated = 0
    for start in range(0, len(docs), job.batch_size):
        batch = [text for _, text in docs[start : start + job.batch_size]]
        vecs, cut = encoder.encode(batch, job.pooling, job.max_length)
        if len(vecs) != len(batch):
            raise EmbedError("encoder returned the wrong number of vectors")
        vectors.extend(vecs)
        truncated += sum(bool(c) for c in cut)

    dims = {len(v) for v in vectors}
    if len(dims) != 1 or 0 in dims:
        raise EmbedError(f"inconsistent embedding dimensions: {sorted(dims)}")
    dim = dims.pop()

    lines = [
        f"# encoder={encoder.identifier} revision={encoder.revision} pooling={job.pooling} "
        f"max_length={job.max_length} truncated={truncated}",
        ",".join(["policy_id"] + [f"e{k}" for k in range(dim)]),
    ]
    for (pid, _), vec in zip(docs, vectors):
        lines.append(",".join([pid] + [_fmt(float(v)) for v in vec]))
    _write_atomic(Path(job.output), "\n".join(lines) + "\n")
    return Path(job.output)


def classify_corpus(
    corpus: Path,
    tasks: Sequence[str],
    output: Path,
    classifier: Optional[Classifier] = None,
    revisions: Optional[Dict[str, str]] = None,
) -> Path:
    parsed = [Task.parse(t) for t in tasks]
    if not parsed:
        raise EmbedError("no tasks given")
    columns: List[str] = []
    for task in parsed:
        columns.extend(task.columns())
    if len(set(columns)) != len(columns):
        raise EmbedError("duplicate task in task list")

    docs = corpus_texts(corpus)
    texts = [text for _, text in docs]
    if classifier is None:
        classifier = TransformersClassifier(revisions or {})

    probs: Dict[str, List[Dict[str, float]]] = {}
    for head in sorted({t.head for t in parsed}):
        rows = classifier.classify(HEADS[head].checkpoint, texts)
        if len(rows) != len(texts):
            raise EmbedError(f"classifier for {head} returned the wrong number of rows")
        for row in rows:
            if set(row) != set(HEADS[head].labels):
                raise EmbedError(f"classifier for {head} returned labels {sorted(row)}")
        probs[head] = rows

    lines = [",".join(["policy_id"] + columns)]
    for i, (pid, _) in enumerate(docs):
        cells = [pid]
        for task in parsed:
            row = probs[task.head][i]
            # Ties resolve to the first label in head order.
            best = max(HEADS[task.head].labels, key=lambda label: (row[label], -HEADS[task.head].labels.index(label)))
            if task.output == "score":
                cells.append(_fmt(row[best]))
            else:
                cells.extend("1" if label == best else "0" for label in HEADS[task.head].labels)
        lines.append(",".join(cells))
    output = Path(output)
    _write_atomic(output, "\n".join(lines) + "\n")

    manifest = {
        "columns": columns,
        "tasks": [f"{t.head}:{t.output}" for t in parsed],
        "checkpoints": {t.head: HEADS[t.head].checkpoint for t in parsed},
        "revisions": {h: (revisions or {}).get(HEADS[h].checkpoint) for h in sorted({t.head for t in parsed})},
    }
    _write_atomic(output.with_name(output.name + ".manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return output


# ---------------------------------------------------------------- transformers


def _offline() -> bool:
    return os.environ.get("HF_HUB_OFFLINE", "") not in ("", "0")


def _load(kind: str, checkpoint: str, revision: Optional[str]):
    try:
        import torch  # noqa: F401
        import transformers
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise EmbedError("transformers and torch are required for the default encoder") from exc
    cls = transformers.AutoModel if kind == "encoder" else transformers.AutoModelForSequenceClassification
    try:
        tokenizer = transformers.AutoTokenizer.from_pretrained(checkpoint, revision=revision, local_files_only=_offline())
        model = cls.from_pretrained(checkpoint, revision=revision, local_files_only=_offline())
    except OSError as exc:
        raise EmbedError(f"checkpoint unavailable: {checkpoint}@{revision or 'default'}") from exc
    model.eval()
    return tokenizer, model


class TransformersEncoder:
    def __init__(self, checkpoint: str, revision: Optional[str] = None):
        self.identifier = checkpoint
        self.revision = revision or "unpinned"
        self._tokenizer, self._model = _load("encoder", checkpoint, revision)

    def encode(self, texts, pooling, max_length):
        import torch

        full = self._tokenizer(list(texts), truncation=False)["input_ids"]
        cut = [len(ids) > max_length for ids in full]
        enc = self._tokenizer(list(texts), truncation=True, max_length=max_length, padding=True, return_tensors="pt")
        with torch.no_grad():
            hidden = self._model(**enc).last_hidden_state
        if pooling == "cls":
            pooled = hidden[:, 0, :]
        else:
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
        return pooled.double().tolist(), cut


class TransformersClassifier:
    def __init__(self, revisions: Dict[str, str], max_length: int = 512):
        self._revisions = revisions
        self._max_length = max_length

    def classify(self, checkpoint, texts):
        import torch

        tokenizer, model = _load("classifier", checkpoint, self._revisions.get(checkpoint))
        labels = [model.config.id2label[i].lower() for i in range(model.config.num_labels)]
        enc = tokenizer(list(texts), truncation=True, max_length=self._max_length, padding=True, return_tensors="pt")
        with torch.no_grad():
            p = torch.softmax(model(**enc).logits, dim=-1).double().tolist()
        return [dict(zip(labels, row)) for row in p]


# ------------------------------------------------------------------------ CLI


def _lock(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m polprog.embedgen")
    sub = parser.add_subparsers(dest="command", required=True)
    e = sub.add_parser("embed", help="write an embedding sidecar")
    e.add_argument("--corpus", required=True)
    e.add_argument("--encoder", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--pooling", choices=POOLINGS, default="mean")
    e.add_argument("--max-length", type=int, default=512)
    e.add_argument("--batch-size", type=int, default=16)
    e.add_argument("--lock", help="JSON file mapping checkpoint name to pinned revision")
    c = sub.add_parser("classify", help="write a classifier score sidecar")
    c.add_argument("--corpus", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--tasks", default=",".join(DEFAULT_TASKS))
    c.add_argument("--lock")
    args = parser.parse_args(argv)

    try:
        lock = _lock(args.lock)
        if args.command == "embed":
            job = EmbedJob(Path(args.corpus), args.encoder, Path(args.out), args.pooling, args.max_length,
                           lock.get(args.encoder), args.batch_size)
            print(embed_corpus(job))
        else:
            print(classify_corpus(Path(args.corpus), args.tasks.split(","), Path(args.out), revisions=lock))
    except (EmbedError, _polprog.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
