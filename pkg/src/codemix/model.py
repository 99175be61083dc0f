"""Miniature BERT-style encoder with MLM, sentiment and language-ID heads.

Input vectors are the sum of token, learned-position and segment
embeddings. The encoder is post-LN: each layer runs masked multi-head
self-attention and a GELU feed-forward block, each followed by a residual
add and layer norm. The sentiment head reads the [CLS] position; the
language-ID and MLM heads read every position.

All forward functions accept a single sequence (1-D ids) or a batch
(2-D ids) and return outputs with the matching leading shape.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import asdict, dataclass, fields
from typing import BinaryIO, Iterable

import numpy as np

from . import tensor as T
from .tensor import IGNORE_INDEX, Tensor
from .vocab import CLS_ID, MASK_ID, NUM_SPECIAL, PAD_ID, SEP_ID

PARAM_GROUPS = ("embeddings", "encoder_layers", "mlm_head", "sentiment_head", "langid_head")
LAYER_NORM_EPS = 1e-12
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 32
    d_model: int = 32
    num_layers: int = 2
    num_heads: int = 2
    d_ff: int = 64
    dropout_rate: float = 0.0
    num_sentiments: int = 3
    num_langtags: int = 5
    mask_prob: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < NUM_SPECIAL + 1:
            raise ValueError(f"vocab_size must be >= {NUM_SPECIAL + 1}")
        if self.max_len < 3:
            raise ValueError("max_len must be >= 3")
        if min(self.d_model, self.num_layers, self.num_heads, self.d_ff) < 1:
            raise ValueError("model dimensions must be positive")
        if self.d_model % self.num_heads:
            raise ValueError("d_model must be divisible by num_heads")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ValueError("mask_prob must lie in [0, 1]")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.num_heads


def param_group(name: str) -> str:
    if name.startswith("embeddings."):
        return "embeddings"
    if name.startswith("encoder."):
        return "encoder_layers"
    return name.split(".", 1)[0]


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "embeddings.token": (cfg.vocab_size, d),
        "embeddings.position": (cfg.max_len, d),
        "embeddings.segment": (2, d),
    }
    for i in range(cfg.num_layers):
        p = f"encoder.{i}."
        for proj in ("query", "key", "value", "output"):
            shapes[p + f"attn.{proj}.weight"] = (d, d)
            shapes[p + f"attn.{proj}.bias"] = (d,)
        shapes[p + "ln1.gain"] = (d,)
        shapes[p + "ln1.bias"] = (d,)
        shapes[p + "ffn.in.weight"] = (d, f)
        shapes[p + "ffn.in.bias"] = (f,)
        shapes[p + "ffn.out.weight"] = (f, d)
        shapes[p + "ffn.out.bias"] = (d,)
        shapes[p + "ln2.gain"] = (d,)
        shapes[p + "ln2.bias"] = (d,)
    for head, width in (("mlm_head", cfg.vocab_size), ("sentiment_head", cfg.num_sentiments),
                        ("langid_head", cfg.num_langtags)):
        shapes[f"{head}.weight"] = (d, width)
        shapes[f"{head}.bias"] = (width,)
    return shapes


class ModelWeights:
    """Named parameter tensors plus the set of frozen parameter groups."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        expected = parameter_shapes(config)
        if list(params) != list(expected):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.config = config
        self.params = params
        self.frozen: frozenset[str] = frozenset()

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def named_parameters(self, group: str | None = None) -> Iterable[tuple[str, Tensor]]:
        for name, p in self.params.items():
            if group is None or param_group(name) == group:
                yield name, p

    def trainable(self) -> dict[str, Tensor]:
        return {n: p for n, p in self.params.items() if param_group(n) not in self.frozen}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def copy(self) -> "ModelWeights":
        out = ModelWeights(self.config, {n: Tensor(p.data.copy(), True) for n, p in self.params.items()})
        out.frozen = self.frozen
        return out

    def digest(self, group: str | None = None) -> str:
        """SHA-256 over the raw float64 bytes of the selected parameters."""
        h = hashlib.sha256()
        for name, p in self.named_parameters(group):
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        return h.hexdigest()


def init_weights(config: ModelConfig) -> ModelWeights:
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif len(shape) == 1:
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, INIT_STD, size=shape)
        params[name] = Tensor(data, requires_grad=True)
    return ModelWeights(config, params)


def set_frozen(weights: ModelWeights, groups: Iterable[str]) -> None:
    """Replace the frozen set; the optimizer leaves these groups untouched."""
    groups = frozenset(groups)
    unknown = groups - set(PARAM_GROUPS)
    if unknown:
        raise ValueError(f"unknown parameter group(s): {', '.join(sorted(unknown))}")
    weights.frozen = groups


# ------------------------------------------------------------------ forward

def _batched(ids) -> tuple[np.ndarray, bool]:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        return ids[None, :], True
    if ids.ndim != 2:
        raise ValueError(f"ids must be 1-D or 2-D, got shape {ids.shape}")
    return ids, False


def embed(weights: ModelWeights, ids, segment_ids=None) -> Tensor:
    """Sum of token, position and segment embeddings: [B, L, D] (or [L, D])."""
    ids, single = _batched(ids)
    cfg = weights.config
    if ids.shape[1] > cfg.max_len:
        raise ValueError(f"sequence length {ids.shape[1]} exceeds max_len {cfg.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise IndexError(f"token id out of range [0, {cfg.vocab_size})")
    seg = np.zeros_like(ids) if segment_ids is None else np.asarray(segment_ids, dtype=np.int64).reshape(ids.shape)
    if seg.size and (seg.min() < 0 or seg.max() > 1):
        raise IndexError("segment ids must be 0 or 1")
    positions = np.arange(ids.shape[1])
    out = (T.embedding(weights["embeddings.token"], ids)
           + T.embedding(weights["embeddings.position"], positions)
           + T.embedding(weights["embeddings.segment"], seg))
    return out[0] if single else out


def _affine(x: Tensor, weights: ModelWeights, prefix: str) -> Tensor:
    return x @ weights[prefix + ".weight"] + weights[prefix + ".bias"]


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, length, d = x.shape
    return T.transpose(T.reshape(x, (b, length, heads, d // heads)), (0, 2, 1, 3))


def encoder_forward(weights: ModelWeights, hidden: Tensor, attention_mask,
                    rng: np.random.Generator | None = None) -> Tensor:
    """Run the encoder stack; PAD keys (mask 0) receive zero attention.

    ``rng`` enables dropout at ``config.dropout_rate``; without it the pass
    is deterministic.
    """
    cfg = weights.config
    single = hidden.ndim == 2
    if single:
        hidden = T.reshape(hidden, (1, *hidden.shape))
    mask = np.asarray(attention_mask).reshape(hidden.shape[0], hidden.shape[1]).astype(bool)
    key_mask = mask[:, None, None, :]
    b, length, d = hidden.shape
    scale = 1.0 / np.sqrt(cfg.head_dim)
    rate = cfg.dropout_rate if rng is not None else 0.0
    for i in range(cfg.num_layers):
        p = f"encoder.{i}."
        q = _split_heads(_affine(hidden, weights, p + "attn.query"), cfg.num_heads)
        k = _split_heads(_affine(hidden, weights, p + "attn.key"), cfg.num_heads)
        v = _split_heads(_affine(hidden, weights, p + "attn.value"), cfg.num_heads)
        scores = (q @ T.transpose(k, (0, 1, 3, 2))) * scale
        probs = T.dropout(T.softmax(scores, axis=-1, mask=key_mask), rate, rng)
        context = T.reshape(T.transpose(probs @ v, (0, 2, 1, 3)), (b, length, d))
        attended = _affine(context, weights, p + "attn.output")
        hidden = T.layer_norm(hidden + attended, weights[p + "ln1.gain"], weights[p + "ln1.bias"], LAYER_NORM_EPS)
        ff = _affine(T.gelu(_affine(hidden, weights, p + "ffn.in")), weights, p + "ffn.out")
        ff = T.dropout(ff, rate, rng)
        hidden = T.layer_norm(hidden + ff, weights[p + "ln2.gain"], weights[p + "ln2.bias"], LAYER_NORM_EPS)
    return hidden[0] if single else hidden


def _encode(weights, ids, mask, rng):
    ids, single = _batched(ids)
    mask = np.asarray(mask).reshape(ids.shape)
    return encoder_forward(weights, embed(weights, ids), mask, rng), single


def forward_multitask(weights: ModelWeights, ids, mask,
                      rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
    """Sentiment logits from [CLS] ([B, 3]) and language-ID logits ([B, L, 5])."""
    hidden, single = _encode(weights, ids, mask, rng)
    sentiment = _affine(hidden[:, 0, :], weights, "sentiment_head")
    langid = _affine(hidden, weights, "langid_head")
    if single:
        return sentiment[0], langid[0]
    return sentiment, langid


def forward_mlm(weights: ModelWeights, ids, mask, rng: np.random.Generator | None = None) -> Tensor:
    hidden, single = _encode(weights, ids, mask, rng)
    logits = _affine(hidden, weights, "mlm_head")
    return logits[0] if single else logits


# ------------------------------------------------------------------ masking

def mask_tokens(ids, mask_prob: float, rng: np.random.Generator, vocab_size: int,
                mask_token_frac: float = 0.8, random_token_frac: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """MLM corruption over content positions (never CLS/SEP/PAD).

    Each content position is picked with probability ``mask_prob``; a picked
    position becomes [MASK] (``mask_token_frac``), a random non-special
    token (``random_token_frac``) or stays as is (the rest). Labels hold the
    original id at picked positions and IGNORE_INDEX elsewhere.
    """
    if not 0.0 <= mask_prob <= 1.0:
        raise ValueError("mask_prob must lie in [0, 1]")
    ids = np.asarray(ids, dtype=np.int64)
    content = (ids != PAD_ID) & (ids != CLS_ID) & (ids != SEP_ID)
    picked = content & (rng.random(ids.shape) < mask_prob)
    branch = rng.random(ids.shape)
    random_ids = rng.integers(NUM_SPECIAL, vocab_size, size=ids.shape)
    corrupted = ids.copy()
    to_mask = picked & (branch < mask_token_frac)
    to_random = picked & (branch >= mask_token_frac) & (branch < mask_token_frac + random_token_frac)
    corrupted[to_mask] = MASK_ID
    corrupted[to_random] = random_ids[to_random]
    labels = np.where(picked, ids, IGNORE_INDEX)
    return corrupted, labels


# -------------------------------------------------------------- checkpoints

MAGIC = b"CMT1"
_INT_FIELDS = ("vocab_size", "max_len", "d_model", "num_layers", "num_heads", "d_ff",
               "num_sentiments", "num_langtags", "seed")
_FLOAT_FIELDS = ("dropout_rate", "mask_prob")
assert set(_INT_FIELDS + _FLOAT_FIELDS) == {f.name for f in fields(ModelConfig)}


class CheckpointError(ValueError):
    pass


def write_checkpoint(weights: ModelWeights, fh: BinaryIO) -> None:
    """Little-endian: magic, config (int64 fields then float64 fields),
    parameter count, then per parameter (name length, name, rank, dims,
    float64 payload)."""
    cfg = asdict(weights.config)
    fh.write(MAGIC)
    fh.write(struct.pack(f"<{len(_INT_FIELDS)}q", *(cfg[k] for k in _INT_FIELDS)))
    fh.write(struct.pack(f"<{len(_FLOAT_FIELDS)}d", *(cfg[k] for k in _FLOAT_FIELDS)))
    fh.write(struct.pack("<I", len(weights.params)))
    for name, p in weights.params.items():
        raw = name.encode("utf-8")
        fh.write(struct.pack("<I", len(raw)) + raw)
        fh.write(struct.pack(f"<I{p.ndim}I", p.ndim, *p.shape))
        fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def _read(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def read_checkpoint(fh: BinaryIO) -> ModelWeights:
    if _read(fh, 4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    ints = struct.unpack(f"<{len(_INT_FIELDS)}q", _read(fh, 8 * len(_INT_FIELDS)))
    floats = struct.unpack(f"<{len(_FLOAT_FIELDS)}d", _read(fh, 8 * len(_FLOAT_FIELDS)))
    try:
        config = ModelConfig(**dict(zip(_INT_FIELDS, ints)), **dict(zip(_FLOAT_FIELDS, floats)))
    except ValueError as exc:
        raise CheckpointError(f"invalid config in checkpoint: {exc}") from None
    expected = parameter_shapes(config)
    (count,) = struct.unpack("<I", _read(fh, 4))
    if count != len(expected):
        raise CheckpointError(f"expected {len(expected)} parameters, found {count}")
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", _read(fh, 4))
        name = _read(fh, name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", _read(fh, 4))
        shape = struct.unpack(f"<{rank}I", _read(fh, 4 * rank))
        if expected.get(name) != shape:
            raise CheckpointError(f"parameter {name!r} has shape {shape}, config expects {expected.get(name)}")
        size = int(np.prod(shape))
        data = np.frombuffer(_read(fh, 8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        params[name] = Tensor(data, requires_grad=True)
    if fh.read(1):
        raise CheckpointError("trailing bytes after last parameter")
    try:
        return ModelWeights(config, params)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None


def save_checkpoint(weights: ModelWeights, path) -> None:
    with open(path, "wb") as fh:
        write_checkpoint(weights, fh)


def load_checkpoint(path) -> ModelWeights:
    with open(path, "rb") as fh:
        return read_checkpoint(fh)
