"""Confusion matrices, macro-averaged F1 and the evaluation report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import SENTIMENTS, TweetRecord
from .tensor import IGNORE_INDEX


@dataclass
class ConfusionMatrix:
    """Rows are gold classes, columns predicted classes."""
    counts: np.ndarray
    labels: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(gold: Sequence[int], pred: Sequence[int], num_classes: int,
              labels: Sequence[str] | None = None) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} items, pred has {len(pred)}")
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    for name, arr in (("gold", gold), ("pred", pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} class ids must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (gold, pred), 1)
    names = list(labels) if labels is not None else [str(i) for i in range(num_classes)]
    return ConfusionMatrix(counts, names)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 counts as 0
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den != 0)


def per_class_scores(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Precision, recall and F1 per class."""
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    precision = _ratio(tp, c.sum(axis=0))
    recall = _ratio(tp, c.sum(axis=1))
    f1 = _ratio(2 * precision * recall, precision + recall)
    return precision, recall, f1


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1 over every class, zero-support ones included."""
    return float(per_class_scores(cm)[2].mean())


@dataclass
class EvalReport:
    labels: list[str]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    macro_f1: float
    accuracy: float
    langid_accuracy: float | None = None
    confusion: list[list[int]] = field(default_factory=list)

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, langid_accuracy: float | None = None) -> "EvalReport":
        p, r, f = per_class_scores(cm)
        total = cm.total
        return cls(
            labels=list(cm.labels),
            precision=p.tolist(),
            recall=r.tolist(),
            f1=f.tolist(),
            support=cm.counts.sum(axis=1).astype(int).tolist(),
            macro_f1=float(f.mean()),
            accuracy=float(np.trace(cm.counts) / total) if total else 0.0,
            langid_accuracy=langid_accuracy,
            confusion=cm.counts.tolist(),
        )

    def to_text(self) -> str:
        """Flat ``key value`` lines, six decimals, stable key order."""
        lines = [f"macro_f1 {self.macro_f1:.6f}", f"accuracy {self.accuracy:.6f}"]
        if self.langid_accuracy is not None:
            lines.append(f"langid_accuracy {self.langid_accuracy:.6f}")
        for i, label in enumerate(self.labels):
            lines.append(f"precision_{label} {self.precision[i]:.6f}")
            lines.append(f"recall_{label} {self.recall[i]:.6f}")
            lines.append(f"f1_{label} {self.f1[i]:.6f}")
            lines.append(f"support_{label} {self.support[i]}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "langid_accuracy": self.langid_accuracy,
            "classes": {
                label: {"precision": self.precision[i], "recall": self.recall[i],
                        "f1": self.f1[i], "support": self.support[i]}
                for i, label in enumerate(self.labels)
            },
            "confusion": {"labels": self.labels, "counts": self.confusion},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def predict(weights, records: Sequence[TweetRecord], vocab, batch_size: int = 64):
    """Argmax sentiment ids per record and language-ID ids per content position.

    Returns ``(sentiment_pred, langid_pred, langid_gold)``; the two langid
    arrays are flat over supervised (non-ignored) positions.
    """
    from .model import forward_multitask
    from .trainer import encode_batch

    sent_pred, lang_pred, lang_gold = [], [], []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        ids, masks, tags, _ = encode_batch(chunk, vocab, weights.config.max_len)
        sent_logits, lang_logits = forward_multitask(weights, ids, masks)
        sent_pred.append(sent_logits.data.argmax(axis=-1))
        keep = tags != IGNORE_INDEX
        lang_pred.append(lang_logits.data.argmax(axis=-1)[keep])
        lang_gold.append(tags[keep])
    if not sent_pred:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(sent_pred), np.concatenate(lang_pred), np.concatenate(lang_gold)


def evaluate(weights, dataset: Sequence[TweetRecord], vocab, batch_size: int = 64) -> EvalReport:
    for rec in dataset:
        if rec.sentiment is None:
            raise ValueError(f"record {rec.id} has no sentiment label")
    sent_pred, lang_pred, lang_gold = predict(weights, dataset, vocab, batch_size)
    gold = [rec.sentiment.index for rec in dataset]
    cm = confusion(gold, sent_pred.tolist(), len(SENTIMENTS), [s.value for s in SENTIMENTS])
    langid_acc = float((lang_pred == lang_gold).mean()) if lang_gold.size else None
    return EvalReport.from_confusion(cm, langid_acc)
