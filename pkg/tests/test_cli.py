import json
import subprocess
import sys

import numpy as np
import pytest

from codemix.cli import main
from codemix.corpus import LangTag, Sentiment, SyntheticSpec, TweetRecord, generate_synthetic, read_corpus, save_corpus
from codemix.model import ModelConfig, init_weights, save_checkpoint
from codemix.vocab import Vocabulary, build_vocabulary


def run(*argv):
    return main([str(a) for a in argv])


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("gen-synthetic", "preprocess", "build-vocab", "pretrain", "finetune", "eval", "predict"):
        assert cmd in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "codemix.cli", "eval", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--checkpoint" in proc.stdout


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["gen-synthetic", "--bogus", "1"])
    assert exc.value.code == 2


def test_seed_is_mandatory_for_generation(tmp_path):
    assert run("gen-synthetic", "--out", tmp_path / "a.conll") == 2


def test_gen_synthetic_is_deterministic(tmp_path):
    a, b = tmp_path / "a.conll", tmp_path / "b.conll"
    assert run("gen-synthetic", "--seed", 3, "--num-records", 40, "--out", a) == 0
    assert run("gen-synthetic", "--seed", 3, "--num-records", 40, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(read_corpus(a)) == 40


def test_gen_synthetic_split(tmp_path):
    out = tmp_path / "d.conll"
    assert run("gen-synthetic", "--seed", 1, "--num-records", 20, "--split", "0.5,0.25,0.25", "--out", out) == 0
    sizes = [len(read_corpus(tmp_path / f"d.{n}.conll")) for n in ("train", "dev", "test")]
    assert sizes == [10, 5, 5]
    assert run("gen-synthetic", "--seed", 1, "--split", "0.2,0.2,0.2,0.4", "--out", tmp_path / "e.conll") == 2
    assert not (tmp_path / "e.conll").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# generation settings\nseed = 9\nnum-records = 5\n")
    assert run("gen-synthetic", "--config", cfg, "--out", tmp_path / "a.conll") == 0
    assert len(read_corpus(tmp_path / "a.conll")) == 5
    assert run("gen-synthetic", "--config", cfg, "--num-records", 7, "--out", tmp_path / "b.conll") == 0
    assert len(read_corpus(tmp_path / "b.conll")) == 7


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nnum_recrods = 5\n")
    assert run("gen-synthetic", "--config", cfg, "--out", tmp_path / "a.conll") == 2


def test_preprocess_clean_file_is_unchanged(tmp_path):
    src, dst = tmp_path / "in.conll", tmp_path / "out.conll"
    save_corpus(generate_synthetic(SyntheticSpec(seed=2, num_records=30)), src)
    assert run("preprocess", "--in", src, "--out", dst) == 0
    assert dst.read_bytes() == src.read_bytes()


def test_preprocess_emoji_token_keeps_its_tag(tmp_path):
    src, dst = tmp_path / "in.conll", tmp_path / "out.conll"
    rec = TweetRecord("e1", ["Great", "😊", "@bob"], [LangTag.EN, LangTag.UNIV, LangTag.UNIV], Sentiment.POSITIVE)
    gone = TweetRecord("e2", ["@", "https"], [LangTag.UNIV, LangTag.UNIV], Sentiment.NEUTRAL)
    save_corpus([rec, gone], src)
    assert run("preprocess", "--in", src, "--out", dst) == 0
    (out,) = read_corpus(dst)
    assert out.tokens == ["great", "smiling", "face", "with", "smiling", "eyes", "bob"]
    assert out.tags == [LangTag.EN] + [LangTag.UNIV] * 6
    assert out.sentiment is Sentiment.POSITIVE


def test_missing_input_is_usage_error(tmp_path, capsys):
    assert run("preprocess", "--in", tmp_path / "nope.conll", "--out", tmp_path / "x") == 2
    assert "nope.conll" in capsys.readouterr().err


def test_malformed_input_is_usage_error(tmp_path):
    bad = tmp_path / "bad.conll"
    bad.write_text("meta\t1\tpositive\nhola\tklingon\n\n")
    assert run("build-vocab", "--in", bad, "--out", tmp_path / "v.txt") == 2


# ---------------------------------------------------- oracle stub model

CLASS_WORDS = {Sentiment.POSITIVE: ["good", "great"], Sentiment.NEGATIVE: ["bad", "awful"],
               Sentiment.NEUTRAL: ["table", "chair"]}


def oracle_stub(vocab: Vocabulary):
    """Weights that read the sentiment straight off the words.

    Each class word carries a large value in the embedding dimension of its
    class. Query/key are zero, so attention averages the sequence, and value
    and output are identities. The sentiment head copies dims 0..2 to logits.
    """
    cfg = ModelConfig(vocab_size=len(vocab), max_len=8, d_model=4, num_layers=1, num_heads=1, d_ff=4)
    w = init_weights(cfg)
    for p in w.params.values():
        p.data[...] = 0.0
    for name in ("encoder.0.ln1.gain", "encoder.0.ln2.gain"):
        w[name].data[...] = 1.0
    for sentiment, words in CLASS_WORDS.items():
        for word in words:
            w["embeddings.token"].data[vocab.id(word), sentiment.index] = 10.0
    w["encoder.0.attn.value.weight"].data[...] = np.eye(4)
    w["encoder.0.attn.output.weight"].data[...] = np.eye(4)
    w["sentiment_head.weight"].data[:3, :3] = np.eye(3)
    return w


@pytest.fixture
def stub_setup(tmp_path):
    rng = np.random.default_rng(0)
    recs = []
    for i in range(30):
        s = list(CLASS_WORDS)[i % 3]
        toks = list(rng.choice(CLASS_WORDS[s], size=rng.integers(1, 6)))
        recs.append(TweetRecord(f"r{i}", toks, [LangTag.EN] * len(toks), s))
    data, vocab_path, ckpt = tmp_path / "d.conll", tmp_path / "v.txt", tmp_path / "oracle.ckpt"
    save_corpus(recs, data)
    vocab = build_vocabulary(recs, 32)
    vocab.save(vocab_path)
    save_checkpoint(oracle_stub(vocab), ckpt)
    return tmp_path, data, vocab_path, ckpt


def test_eval_reports_perfect_oracle(stub_setup):
    tmp, data, vocab, ckpt = stub_setup
    rep, js, png = tmp / "report.txt", tmp / "report.json", tmp / "cmp.png"
    assert run("eval", "--data", data, "--vocab", vocab, "--checkpoint", ckpt, "--name", "oracle",
               "--out", rep, "--json", js, "--plot", png) == 0
    lines = rep.read_text().splitlines()
    assert lines[0] == "system oracle"
    assert "macro_f1 1.000000" in lines
    payload = json.loads(js.read_text())
    assert payload["systems"][0]["macro_f1"] == 1.0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_eval_name_count_mismatch(stub_setup):
    _, data, vocab, ckpt = stub_setup
    assert run("eval", "--data", data, "--vocab", vocab, "--checkpoint", ckpt, "--name", "a", "--name", "b") == 2


def test_predict_writes_labels(stub_setup):
    tmp, data, vocab, ckpt = stub_setup
    out = tmp / "pred.conll"
    assert run("predict", "--data", data, "--vocab", vocab, "--checkpoint", ckpt, "--out", out) == 0
    gold, pred = read_corpus(data), read_corpus(out)
    assert [r.sentiment for r in pred] == [r.sentiment for r in gold]
    assert [r.tokens for r in pred] == [r.tokens for r in gold]


def test_checkpoint_vocab_mismatch(stub_setup, tmp_path):
    _, data, _, ckpt = stub_setup
    other = tmp_path / "other.txt"
    Vocabulary.from_corpus_tokens(["x", "y"]).save(other)
    assert run("eval", "--data", data, "--vocab", other, "--checkpoint", ckpt) == 2


# ---------------------------------------------------------- training

@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("train")
    assert run("gen-synthetic", "--seed", 4, "--num-records", 40, "--out", d / "c.conll") == 0
    assert run("build-vocab", "--in", d / "c.conll", "--max-size", 64, "--out", d / "v.txt") == 0
    return d


MODEL = ["--max-len", 12, "--d-model", 8, "--num-layers", 1, "--num-heads", 2, "--d-ff", 8]


def test_training_commands_write_log_plot_and_checkpoint(small_corpus):
    d = small_corpus
    assert run("pretrain", "--data", d / "c.conll", "--vocab", d / "v.txt", "--seed", 1, "--epochs", 2,
               *MODEL, "--log", d / "pre.log", "--plot", d / "pre.png", "--out", d / "pre.ckpt") == 0
    assert run("finetune", "--data", d / "c.conll", "--vocab", d / "v.txt", "--seed", 1, "--epochs", 2,
               "--init", d / "pre.ckpt", "--freeze-encoder", "--dev", d / "c.conll",
               "--log", d / "ft.log", "--plot", d / "ft.png", "--out", d / "ft.ckpt") == 0
    assert len((d / "pre.log").read_text().splitlines()) == 2
    assert "dev_f1" in (d / "ft.log").read_text()
    for png in ("pre.png", "ft.png"):
        assert (d / png).stat().st_size > 1000


def test_training_requires_seed(small_corpus):
    d = small_corpus
    assert run("pretrain", "--data", d / "c.conll", "--vocab", d / "v.txt", *MODEL, "--out", d / "x.ckpt") == 2


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_divergence_exits_3(small_corpus, capsys):
    d = small_corpus
    code = run("finetune", "--data", d / "c.conll", "--vocab", d / "v.txt", "--seed", 1, "--epochs", 3,
               "--lr", 1e300, *MODEL, "--out", d / "boom.ckpt")
    assert code == 3
    assert "numeric" in capsys.readouterr().err
