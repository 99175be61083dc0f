"""``codemix`` command line: gen-synthetic, preprocess, build-vocab,
pretrain, finetune, eval, predict.

Exit codes: 0 success, 2 usage/config/input error, 3 numeric failure.
Every option can also come from ``--config FILE`` (flat ``key = value``
lines, keys named like the long flags); command-line flags win.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import (LANG_TAGS, SENTIMENTS, CorpusFormatError, SyntheticConfigError, SyntheticSpec, TweetRecord,
                     generate_synthetic, read_corpus, save_corpus, split)
from .metrics import EvalReport, evaluate
from .model import CheckpointError, ModelConfig, forward_multitask, init_weights, load_checkpoint, save_checkpoint
from .preprocess import EmojiTable, default_emoji_table, preprocess_text
from .trainer import ENCODER_GROUPS, TrainConfig, TrainLog, encode_batch, finetune_multitask, pretrain_mlm
from .vocab import Vocabulary, build_vocabulary

log = logging.getLogger("codemix")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _fractions(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions, got {text!r}") from None


def _groups(text: str) -> tuple[str, ...]:
    return tuple(g.strip() for g in text.split(",") if g.strip())


# Per-command option defaults; None means "required".
DEFAULTS: dict[str, dict[str, object]] = {
    "gen-synthetic": dict(seed=None, out=None, num_records=1000, code_mix_ratio=0.3, min_len=6, max_len=12,
                          univ_prob=0.1, split=None),
    "preprocess": dict(in_path=None, out=None, emoji_table=None, seed=0),
    "build-vocab": dict(in_path=None, out=None, max_size=1024, tfidf_floor=0.0, seed=0),
    "pretrain": dict(data=None, vocab=None, out=None, seed=None, init=None, log=None, plot=None,
                     max_len=32, d_model=32, num_layers=2, num_heads=2, d_ff=64, dropout=0.0, mask_prob=0.15,
                     epochs=10, batch_size=32, lr=1e-3, max_steps=None),
    "finetune": dict(data=None, vocab=None, out=None, seed=None, init=None, dev=None, log=None, plot=None,
                     max_len=32, d_model=32, num_layers=2, num_heads=2, d_ff=64, dropout=0.0,
                     epochs=10, batch_size=32, lr=1e-3, max_steps=None, sentiment_weight=1.0, langid_weight=1.0,
                     freeze_encoder=False, freeze=()),
    "eval": dict(data=None, vocab=None, checkpoint=None, name=None, out=None, json=None, plot=None, seed=0),
    "predict": dict(data=None, vocab=None, checkpoint=None, out=None, seed=0),
}
OPTIONAL_NONE = {"emoji_table", "init", "log", "plot", "max_steps", "split", "dev", "name", "json"}
OPTIONAL_NONE_EVAL = {"out"}


def _add_model_flags(p):
    p.add_argument("--max-len", type=int, help="sequence length incl. [CLS]/[SEP] (default 32)")
    p.add_argument("--d-model", type=int, help="hidden width (default 32)")
    p.add_argument("--num-layers", type=int, help="encoder layers (default 2)")
    p.add_argument("--num-heads", type=int, help="attention heads (default 2)")
    p.add_argument("--d-ff", type=int, help="feed-forward width (default 64)")
    p.add_argument("--dropout", type=float, help="dropout rate (default 0)")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, help="training epochs (default 10)")
    p.add_argument("--batch-size", type=int, help="mini-batch size (default 32)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    p.add_argument("--max-steps", type=int, help="stop after this many optimizer steps")
    p.add_argument("--log", help="append-only per-epoch training log")
    p.add_argument("--plot", help="write a loss-curve PNG here")
    p.add_argument("--init", help="start from this checkpoint instead of a fresh initialisation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codemix",
                                     description="Code-mixed tweet sentiment: data preparation, training and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="flat 'key = value' file; flags override it")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output path")
        return p

    p = command("gen-synthetic", "Write a seeded synthetic code-mixed corpus.")
    p.add_argument("--num-records", type=int, help="number of records (default 1000)")
    p.add_argument("--code-mix-ratio", type=float, help="expected share of partner-language words (default 0.3)")
    p.add_argument("--min-len", type=int, help="minimum tokens per record (default 6)")
    p.add_argument("--max-len", type=int, help="maximum tokens per record (default 12)")
    p.add_argument("--univ-prob", type=float, help="probability of a univ token per position (default 0.1)")
    p.add_argument("--split", type=_fractions,
                   help="also write OUT.train/.dev[/.test] splits, e.g. 0.8,0.2 or 0.8,0.1,0.1")

    p = command("preprocess", "Apply emoji substitution and character filtering to a dataset file.")
    p.add_argument("--in", dest="in_path", help="input dataset file")
    p.add_argument("--emoji-table", help="emoji table TSV (default: bundled CLDR table)")

    p = command("build-vocab", "Build a TF-IDF pruned vocabulary file.")
    p.add_argument("--in", dest="in_path", help="input dataset file")
    p.add_argument("--max-size", type=int, help="vocabulary size incl. 5 specials (default 1024)")
    p.add_argument("--tfidf-floor", type=float, help="drop tokens whose best tf-idf is below this (default 0)")

    p = command("pretrain", "Masked-language-model pretraining.")
    p.add_argument("--data", help="training dataset file")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--mask-prob", type=float, help="MLM selection probability (default 0.15)")
    _add_model_flags(p)
    _add_train_flags(p)

    p = command("finetune", "Joint sentiment + language-ID fine-tuning.")
    p.add_argument("--data", help="labelled training dataset file")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--dev", help="labelled dev file; macro-F1 logged per epoch")
    p.add_argument("--sentiment-weight", type=float, help="sentiment loss weight (default 1)")
    p.add_argument("--langid-weight", type=float, help="language-ID loss weight; 0 = single task (default 1)")
    p.add_argument("--freeze-encoder", action="store_const", const=True,
                   help="freeze embeddings and encoder layers, train heads only")
    p.add_argument("--freeze", type=_groups, help="comma-separated parameter groups to freeze")
    _add_model_flags(p)
    _add_train_flags(p)

    p = command("eval", "Sentiment macro-F1 / language-ID accuracy of one or more checkpoints.")
    p.add_argument("--data", help="labelled dataset file")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--checkpoint", action="append", help="checkpoint file (repeatable)")
    p.add_argument("--name", action="append", help="system name per checkpoint (repeatable)")
    p.add_argument("--json", help="also write the structured JSON report here")
    p.add_argument("--plot", help="write a comparison PNG here")

    p = command("predict", "Write predicted sentiment and language tags in dataset format.")
    p.add_argument("--data", help="dataset file (labels optional)")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--checkpoint", help="checkpoint file")
    return parser


# ------------------------------------------------------------- config layer

def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _convert(parser: argparse.ArgumentParser, dest: str, value: str):
    for action in parser._actions:
        if action.dest == dest:
            if isinstance(action, argparse._StoreConstAction):
                return _bool(value)
            if isinstance(action, argparse._AppendAction):
                return [v.strip() for v in value.split(",")]
            return action.type(value) if action.type else value
    raise UsageError(f"unknown config key {dest!r}")


def resolve(args: argparse.Namespace, subparser: argparse.ArgumentParser) -> argparse.Namespace:
    """Layer defaults <- config file <- flags, and check required options."""
    defaults = DEFAULTS[args.command]
    merged = dict(defaults)
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            try:
                merged[key] = _convert(subparser, key, value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    optional = OPTIONAL_NONE | (OPTIONAL_NONE_EVAL if args.command == "eval" else set())
    missing = [k for k, v in merged.items() if v is None and k not in optional]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-").replace("in-path", "in") for k in missing))
    ns = argparse.Namespace(**merged)
    ns.command = args.command
    return ns


# ----------------------------------------------------------------- commands

def cmd_gen_synthetic(a) -> int:
    spec = SyntheticSpec(seed=a.seed, num_records=a.num_records, code_mix_ratio=a.code_mix_ratio,
                         min_len=a.min_len, max_len=a.max_len, univ_prob=a.univ_prob)
    if a.split and len(a.split) > 3:
        raise UsageError("--split takes at most three fractions")
    records = generate_synthetic(spec)
    save_corpus(records, a.out)
    if a.split:
        names = ("train", "dev", "test")[: len(a.split)]
        out = Path(a.out)
        for name, part in zip(names, split(records, a.split, a.seed)):
            save_corpus(part, out.with_name(f"{out.stem}.{name}{out.suffix}"))
    log.info("wrote %d records to %s", len(records), a.out)
    return EXIT_OK


def preprocess_record(rec: TweetRecord, table: EmojiTable) -> TweetRecord | None:
    """Preprocess each token; a token that expands to several words passes
    its language tag to each of them, and a token that vanishes is dropped."""
    tokens, tags = [], []
    for tok, tag in zip(rec.tokens, rec.tags):
        for word in preprocess_text(tok, table).split():
            tokens.append(word)
            tags.append(tag)
    if not tokens:
        return None
    return TweetRecord(rec.id, tokens, tags, rec.sentiment)


def cmd_preprocess(a) -> int:
    table = EmojiTable.load(a.emoji_table) if a.emoji_table else default_emoji_table()
    out = []
    for rec in read_corpus(a.in_path):
        clean = preprocess_record(rec, table)
        if clean is None:
            log.warning("record %s is empty after preprocessing; dropped", rec.id)
            continue
        out.append(clean)
    save_corpus(out, a.out)
    return EXIT_OK


def cmd_build_vocab(a) -> int:
    vocab = build_vocabulary(read_corpus(a.in_path), a.max_size, a.tfidf_floor)
    vocab.save(a.out)
    log.info("vocabulary of %d tokens written to %s", len(vocab), a.out)
    return EXIT_OK


def _model_config(a, vocab: Vocabulary, mask_prob: float = 0.15) -> ModelConfig:
    return ModelConfig(vocab_size=len(vocab), max_len=a.max_len, d_model=a.d_model, num_layers=a.num_layers,
                       num_heads=a.num_heads, d_ff=a.d_ff, dropout_rate=a.dropout, mask_prob=mask_prob,
                       seed=a.seed)


def _load_init(path, vocab: Vocabulary):
    weights = load_checkpoint(path)
    if weights.config.vocab_size != len(vocab):
        raise UsageError(f"checkpoint vocab_size {weights.config.vocab_size} != vocabulary size {len(vocab)}")
    return weights


def _run_training(a, train_fn, title: str) -> int:
    stream = open(a.log, "a", encoding="utf-8") if a.log else None
    try:
        train_log = TrainLog(stream)
        weights = train_fn(train_log)
    finally:
        if stream is not None:
            stream.close()
    save_checkpoint(weights, a.out)
    if a.plot:
        from .plots import plot_training_curve
        plot_training_curve(train_log, a.plot, title)
    return EXIT_OK


def cmd_pretrain(a) -> int:
    vocab = Vocabulary.load(a.vocab)
    corpus = read_corpus(a.data)
    if a.init:
        init = _load_init(a.init, vocab)
        config = init.config
    else:
        config = _model_config(a, vocab, a.mask_prob)
        init = None
    train_cfg = TrainConfig(epochs=a.epochs, batch_size=a.batch_size, lr=a.lr, seed=a.seed,
                            mask_prob=a.mask_prob, max_steps=a.max_steps)
    return _run_training(a, lambda tl: pretrain_mlm(corpus, vocab, config, train_cfg, init, tl), "MLM pretraining")


def cmd_finetune(a) -> int:
    vocab = Vocabulary.load(a.vocab)
    corpus = read_corpus(a.data)
    dev = read_corpus(a.dev) if a.dev else None
    weights = _load_init(a.init, vocab) if a.init else init_weights(_model_config(a, vocab))
    groups = set(a.freeze)
    if a.freeze_encoder:
        groups |= set(ENCODER_GROUPS)
    train_cfg = TrainConfig(epochs=a.epochs, batch_size=a.batch_size, lr=a.lr, seed=a.seed,
                            sentiment_loss_weight=a.sentiment_weight, langid_loss_weight=a.langid_weight,
                            freeze_groups=tuple(sorted(groups)), max_steps=a.max_steps)
    return _run_training(a, lambda tl: finetune_multitask(weights, corpus, vocab, train_cfg, dev, tl),
                         "multi-task fine-tuning")


def format_reports(names, reports: list[EvalReport]) -> str:
    return "\n".join(f"system {n}\n" + r.to_text() for n, r in zip(names, reports))


def cmd_eval(a) -> int:
    import json

    vocab = Vocabulary.load(a.vocab)
    data = read_corpus(a.data)
    names = list(a.name) if a.name else [Path(c).stem for c in a.checkpoint]
    if len(names) != len(a.checkpoint):
        raise UsageError("--name must be given once per --checkpoint")
    reports = [evaluate(_load_init(c, vocab), data, vocab) for c in a.checkpoint]
    text = format_reports(names, reports)
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if a.json:
        payload = {"systems": [{"name": n, **r.to_dict()} for n, r in zip(names, reports)]}
        Path(a.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if a.plot:
        from .plots import plot_system_comparison
        plot_system_comparison(names, reports, a.plot)
    return EXIT_OK


def cmd_predict(a) -> int:
    vocab = Vocabulary.load(a.vocab)
    weights = _load_init(a.checkpoint, vocab)
    records = read_corpus(a.data)
    out = []
    max_len = weights.config.max_len
    for start in range(0, len(records), 64):
        chunk = records[start:start + 64]
        ids, masks, _, _ = encode_batch(chunk, vocab, max_len)
        sent_logits, lang_logits = forward_multitask(weights, ids, masks)
        sent = sent_logits.data.argmax(axis=-1)
        lang = lang_logits.data.argmax(axis=-1)
        for k, rec in enumerate(chunk):
            n = min(len(rec.tokens), max_len - 2)
            # tokens past the window keep their input tag
            tags = [LANG_TAGS[i] for i in lang[k, 1:n + 1]] + rec.tags[n:]
            out.append(TweetRecord(rec.id, rec.tokens, tags, SENTIMENTS[int(sent[k])]))
    save_corpus(out, a.out)
    return EXIT_OK


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "preprocess": cmd_preprocess,
    "build-vocab": cmd_build_vocab,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "predict": cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        resolved = resolve(args, subparser)
        return COMMANDS[args.command](resolved)
    except UsageError as exc:
        print(f"codemix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"codemix: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        print(f"codemix: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusFormatError, CheckpointError, SyntheticConfigError, ValueError, OSError) as exc:
        print(f"codemix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
