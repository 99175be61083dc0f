"""Adam, the masked-LM pretraining loop and joint multi-task fine-tuning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from . import tensor as T
from .corpus import TweetRecord
from .model import (PARAM_GROUPS, ModelConfig, ModelWeights, forward_mlm, forward_multitask, init_weights,
                    mask_tokens, set_frozen)
from .tensor import IGNORE_INDEX, ShapeError, Tensor
from .vocab import Vocabulary, align_tags, encode

log = logging.getLogger(__name__)

ENCODER_GROUPS = ("embeddings", "encoder_layers")


class DivergenceError(FloatingPointError):
    pass


# --------------------------------------------------------------------- Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              frozen: frozenset[str] | set[str] = frozenset()) -> None:
    """One bias-corrected Adam update, in place on the ``params`` arrays.

    Names in ``frozen`` (and names without a gradient) are skipped entirely;
    their moment buffers are not touched either.
    """
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        if name in frozen or grads.get(name) is None:
            continue
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m, v = state.m[name], state.v[name]
        if m.shape != theta.shape:
            raise ShapeError(f"{name}: moment buffer shape {m.shape} != parameter shape {theta.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        theta -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# --------------------------------------------------------------- config, log

@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    sentiment_loss_weight: float = 1.0
    langid_loss_weight: float = 1.0
    freeze_groups: tuple[str, ...] = ()
    seed: int = 0
    mask_prob: float = 0.15
    max_steps: int | None = None
    clip_norm: float | None = 1.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.sentiment_loss_weight < 0 or self.langid_loss_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.sentiment_loss_weight == 0 and self.langid_loss_weight == 0:
            raise ValueError("at least one loss weight must be positive")
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ValueError("mask_prob must lie in [0, 1]")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        unknown = set(self.freeze_groups) - set(PARAM_GROUPS)
        if unknown:
            raise ValueError(f"unknown freeze group(s): {', '.join(sorted(unknown))}")


@dataclass
class EpochRecord:
    epoch: int
    task: str
    loss: float
    steps: int
    dev_f1: float | None = None

    def format(self) -> str:
        line = f"epoch {self.epoch} task {self.task} loss {self.loss:.6f}"
        if self.dev_f1 is not None:
            line += f" dev_f1 {self.dev_f1:.6f}"
        return line


class TrainLog:
    """Per-epoch training history; optionally mirrored line by line to a stream."""

    def __init__(self, stream: TextIO | None = None):
        self.records: list[EpochRecord] = []
        self.step_losses: list[float] = []
        self.stream = stream

    def add(self, rec: EpochRecord) -> None:
        self.records.append(rec)
        log.info(rec.format())
        if self.stream is not None:
            self.stream.write(rec.format() + "\n")
            self.stream.flush()

    @staticmethod
    def parse_line(line: str) -> EpochRecord:
        parts = line.split()
        kv = dict(zip(parts[::2], parts[1::2]))
        return EpochRecord(int(kv["epoch"]), kv["task"], float(kv["loss"]), 0,
                           float(kv["dev_f1"]) if "dev_f1" in kv else None)


# ------------------------------------------------------------------- losses

def multitask_loss(sentiment_logits: Tensor, sentiment_labels, langid_logits: Tensor, langid_labels,
                   sentiment_weight: float = 1.0, langid_weight: float = 1.0) -> Tensor:
    """Weighted sum of sentiment CE and mean per-token language-ID CE.

    Missing sentiment labels are IGNORE_INDEX; if all are missing that term
    is 0. Language-ID labels use IGNORE_INDEX on specials and padding.
    """
    sentiment_labels = np.asarray(sentiment_labels, dtype=np.int64).reshape(sentiment_logits.shape[:-1])
    langid_labels = np.asarray(langid_labels, dtype=np.int64).reshape(langid_logits.shape[:-1])
    total = T.cross_entropy(sentiment_logits, sentiment_labels) * sentiment_weight
    if langid_weight:
        total = total + T.cross_entropy(langid_logits, langid_labels) * langid_weight
    return total


# ------------------------------------------------------------------ helpers

def encode_batch(records: Sequence[TweetRecord], vocab: Vocabulary, max_len: int):
    ids, masks, tags, sentiments = [], [], [], []
    for rec in records:
        i, m = encode(rec.tokens, vocab, max_len)
        ids.append(i)
        masks.append(m)
        tags.append(align_tags(rec.tags, max_len, len(rec.tokens)))
        sentiments.append(IGNORE_INDEX if rec.sentiment is None else rec.sentiment.index)
    return (np.array(ids, dtype=np.int64), np.array(masks, dtype=np.int64),
            np.array(tags, dtype=np.int64), np.array(sentiments, dtype=np.int64))


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent shuffle / masking / dropout generators derived from one seed."""
    shuffle, masking, drop = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(shuffle), np.random.default_rng(masking), np.random.default_rng(drop))


def _clip(trainable: Mapping[str, Tensor], max_norm: float | None) -> None:
    if max_norm is None:
        return
    sq = math.fsum(float(np.vdot(p.grad, p.grad)) for p in trainable.values() if p.grad is not None)
    norm = math.sqrt(sq)
    if norm > max_norm:
        log.debug("clipping gradient norm %.4f -> %.4f", norm, max_norm)
        scale = max_norm / norm
        for p in trainable.values():
            if p.grad is not None:
                p.grad *= scale


def _step(weights: ModelWeights, loss: Tensor, state: AdamState, clip_norm: float | None) -> float:
    value = loss.item()
    if not math.isfinite(value):
        raise DivergenceError(f"loss became {value}")
    trainable = weights.trainable()
    weights.zero_grad()
    if trainable and loss.requires_grad:
        T.backward(loss)
        _clip(trainable, clip_norm)
        adam_step({n: p.data for n, p in trainable.items()},
                  {n: p.grad for n, p in trainable.items()}, state)
    else:
        state.t += 1
    return value


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


# ----------------------------------------------------------------- training

def pretrain_mlm(corpus: Sequence[TweetRecord], vocab: Vocabulary, config: ModelConfig,
                 train_cfg: TrainConfig, weights: ModelWeights | None = None,
                 train_log: TrainLog | None = None) -> ModelWeights:
    """Masked-token pretraining; returns a trained copy of ``weights``
    (fresh ``init_weights(config)`` when omitted)."""
    if not corpus:
        raise ValueError("pretraining corpus is empty")
    if config.vocab_size != len(vocab):
        raise ValueError(f"config vocab_size {config.vocab_size} != vocabulary size {len(vocab)}")
    weights = init_weights(config) if weights is None else weights.copy()
    set_frozen(weights, train_cfg.freeze_groups)
    train_log = train_log if train_log is not None else TrainLog()
    ids, masks, _, _ = encode_batch(corpus, vocab, config.max_len)
    shuffle_rng, mask_rng, drop_rng = _streams(train_cfg.seed)
    state = AdamState(lr=train_cfg.lr)
    steps = 0
    for epoch in range(1, train_cfg.epochs + 1):
        losses = []
        for idx in _batches(len(ids), train_cfg.batch_size, shuffle_rng):
            if train_cfg.max_steps is not None and steps >= train_cfg.max_steps:
                break
            corrupted, labels = mask_tokens(ids[idx], train_cfg.mask_prob, mask_rng, config.vocab_size)
            if not np.any(labels != IGNORE_INDEX):
                log.info("epoch %d: skipping batch with no masked positions", epoch)
                continue
            logits = forward_mlm(weights, corrupted, masks[idx], drop_rng)
            loss = T.cross_entropy(logits, labels)
            losses.append(_step(weights, loss, state, train_cfg.clip_norm))
            train_log.step_losses.append(losses[-1])
            steps += 1
        if losses:
            train_log.add(EpochRecord(epoch, "mlm", float(np.mean(losses)), len(losses)))
        if train_cfg.max_steps is not None and steps >= train_cfg.max_steps:
            break
    return weights


def finetune_multitask(weights: ModelWeights, labeled_corpus: Sequence[TweetRecord], vocab: Vocabulary,
                       train_cfg: TrainConfig, dev: Sequence[TweetRecord] | None = None,
                       train_log: TrainLog | None = None) -> ModelWeights:
    """Joint sentiment + language-ID training; returns a trained copy.

    ``train_cfg.freeze_groups`` is applied before the first step. Setting
    the language-ID weight to 0 gives plain single-task fine-tuning.
    """
    from .metrics import evaluate

    for rec in labeled_corpus:
        if rec.sentiment is None:
            raise ValueError(f"record {rec.id} has no sentiment label")
    if not labeled_corpus:
        raise ValueError("fine-tuning corpus is empty")
    cfg = weights.config
    if cfg.vocab_size != len(vocab):
        raise ValueError(f"model vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}")
    weights = weights.copy()
    set_frozen(weights, train_cfg.freeze_groups)
    train_log = train_log if train_log is not None else TrainLog()
    ids, masks, tags, sentiments = encode_batch(labeled_corpus, vocab, cfg.max_len)
    shuffle_rng, _, drop_rng = _streams(train_cfg.seed)
    state = AdamState(lr=train_cfg.lr)
    steps = 0
    for epoch in range(1, train_cfg.epochs + 1):
        losses = []
        for idx in _batches(len(ids), train_cfg.batch_size, shuffle_rng):
            if train_cfg.max_steps is not None and steps >= train_cfg.max_steps:
                break
            sent_logits, lang_logits = forward_multitask(weights, ids[idx], masks[idx], drop_rng)
            loss = multitask_loss(sent_logits, sentiments[idx], lang_logits, tags[idx],
                                  train_cfg.sentiment_loss_weight, train_cfg.langid_loss_weight)
            losses.append(_step(weights, loss, state, train_cfg.clip_norm))
            train_log.step_losses.append(losses[-1])
            steps += 1
        if losses:
            dev_f1 = evaluate(weights, dev, vocab).macro_f1 if dev else None
            train_log.add(EpochRecord(epoch, "multitask", float(np.mean(losses)), len(losses), dev_f1))
        if train_cfg.max_steps is not None and steps >= train_cfg.max_steps:
            break
    return weights
