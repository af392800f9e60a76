"""End-to-end command-line runs on small generated datasets.

Every test drives ``conceptkit.cli.main`` directly with argv lists and
temporary files, checking exit codes, companion artifacts, report keys,
and byte-level determinism under a fixed seed.
"""

import json

import pytest

from conceptkit import fnet, rerank, sentic
from conceptkit.cli import main
from conceptkit.embed import load_embeddings, save_embeddings
from conceptkit.synth import synth_fnet, synth_nbest, synth_tsa


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(
        "embed.dims = 8\n"
        "embed.epochs = 1\n"
        "embed.groups = word,pos,self\n"
        "embed.clusters = 2\n"
        "fnet.dims = 16\n"
        "fnet.epochs = 1\n"
        "fnet.prototypes = 3\n"
        "rerank.hidden = 8\n"
        "rerank.epochs = 1\n"
        "rerank.lr = 0.05\n"
        "rerank.pretrain_epochs = 1\n"
        "rerank.slp_pairs = 20\n"
        "rerank.slp_iterations = 2\n"
        "tsa.d_w = 6\n"
        "tsa.d_h = 4\n"
        "tsa.d_m = 3\n"
        "tsa.d_c = 3\n"
        "tsa.epochs = 1\n"
        "tsa.lr = 0.01\n"
        "tsa.dropout = 0.0\n"
        "tsa.aspects = price,service\n"
    )
    return str(path)


def _write_corpus(path):
    lines = []
    sents = [
        [("the", "DT", "O"), ("acme", "NNP", "B-ORG"), ("board", "NN", "O")],
        [("alice", "NNP", "B-PER"), ("visited", "VBD", "O"), ("paris", "NNP", "B-LOC")],
        [("the", "DT", "O"), ("paris", "NNP", "B-LOC"), ("board", "NN", "O")],
    ] * 4
    for sent in sents:
        for surface, pos, ne in sent:
            lines.append(f"{surface}\t{pos}\t{ne}")
        lines.append("")
    path.write_text("\n".join(lines) + "\n")


def _read(path):
    with open(path, "rb") as f:
        return f.read()


# ---------------------------------------------------------------------------
# exit codes


def test_missing_file_exits_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.txt")
    assert main(["embed-query", missing, "word"]) == 2
    assert "nope.txt" in capsys.readouterr().err


def test_malformed_mentions_exit_2(tmp_path, capsys):
    bad = tmp_path / "mentions.jsonl"
    bad.write_text('{"tokens": ["a"], "start": 0}\n')
    hier = tmp_path / "hier.txt"
    hier.write_text("/A\n")
    out = str(tmp_path / "m.model")
    code = main(["fnet-train", str(bad), str(hier), "--output", out])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_fnet_eval_requires_model_or_oracle(tmp_path):
    mentions, hierarchy, _ = synth_fnet(n_mentions=5, seed=0)
    mpath = tmp_path / "mentions.jsonl"
    fnet.save_mentions(mentions, mpath)
    hpath = tmp_path / "hier.txt"
    hpath.write_text("\n".join(hierarchy.labels) + "\n")
    assert main(["fnet-eval", str(mpath), str(hpath)]) == 2


# ---------------------------------------------------------------------------
# embed pipeline


def test_embed_pipeline(tmp_path, cfg_file, capsys):
    corpus = tmp_path / "corpus.tsv"
    _write_corpus(corpus)
    out = str(tmp_path / "vectors.txt")
    code = main(
        ["embed-train", str(corpus), "--output", out, "--config", cfg_file, "--seed", "7"]
    )
    assert code == 0
    emb = load_embeddings(out)
    assert emb.word_vectors.shape[1] == 8
    capsys.readouterr()

    assert main(["embed-query", out, "paris", "-k", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert 0 < len(lines) <= 3
    # OOV word is an input error
    assert main(["embed-query", out, "zzz-not-here"]) == 2

    feats = str(tmp_path / "crf.feats")
    code = main(
        ["embed-crf-feats", str(corpus), out, "--output", feats, "--config", cfg_file]
    )
    assert code == 0
    text = _read(feats).decode()
    assert "w[0]=" in text and "vd[0]=" in text


def test_embed_train_deterministic(tmp_path, cfg_file):
    corpus = tmp_path / "corpus.tsv"
    _write_corpus(corpus)
    outs = []
    for name in ("a.txt", "b.txt"):
        out = str(tmp_path / name)
        args = ["embed-train", str(corpus), "--output", out, "--config", cfg_file,
                "--seed", "7", "--workers", "1"]
        assert main(args) == 0
        outs.append(_read(out))
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# fnet pipeline


@pytest.fixture
def fnet_files(tmp_path):
    mentions, hierarchy, emb = synth_fnet(n_mentions=120, seed=3)
    mpath = str(tmp_path / "mentions.jsonl")
    fnet.save_mentions(mentions, mpath)
    hpath = str(tmp_path / "hier.txt")
    with open(hpath, "w") as f:
        f.write("\n".join(hierarchy.labels) + "\n")
    epath = str(tmp_path / "embeddings.txt")
    save_embeddings(emb, epath)
    return mpath, hpath, epath


def test_fnet_pipeline(tmp_path, fnet_files, cfg_file, capsys):
    mpath, hpath, epath = fnet_files
    proto = str(tmp_path / "protos.tsv")
    assert main(["fnet-proto", mpath, hpath, "--output", proto, "--config", cfg_file]) == 0
    assert _read(proto)

    model = str(tmp_path / "typing.model")
    code = main(
        ["fnet-train", mpath, hpath, "--mode", "fixed", "--label-emb", "proto",
         "--prototypes", proto, "--embeddings", epath,
         "--output", model, "--config", cfg_file, "--seed", "7"]
    )
    assert code == 0
    assert _read(model + ".feats")  # companion feature table

    report = str(tmp_path / "report.json")
    assert main(["fnet-eval", mpath, hpath, "--model", model, "--report", report,
                 "--config", cfg_file]) == 0
    rep = json.loads(_read(report))
    assert set(rep) == {"strict_acc", "macro_f1", "micro_f1"}
    assert all(0.0 <= v <= 1.0 for v in rep.values())


def test_fnet_oracle_eval_is_perfect(tmp_path, fnet_files, capsys):
    mpath, hpath, _ = fnet_files
    assert main(["fnet-eval", mpath, hpath, "--oracle"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep == {"strict_acc": 1.0, "macro_f1": 1.0, "micro_f1": 1.0}


def test_fnet_threshold_sweep(tmp_path, fnet_files, cfg_file, capsys):
    mpath, hpath, epath = fnet_files
    model = str(tmp_path / "typing.model")
    assert main(["fnet-train", mpath, hpath, "--output", model,
                 "--config", cfg_file, "--seed", "7"]) == 0
    assert main(["fnet-eval", mpath, hpath, "--model", model,
                 "--threshold-sweep", "--config", cfg_file]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert "t=0.0:strict_acc" in rep and "t=2.0:micro_f1" in rep


def test_fnet_zero_shot_flag(tmp_path, fnet_files, cfg_file):
    mpath, hpath, epath = fnet_files
    proto = str(tmp_path / "protos.tsv")
    assert main(["fnet-proto", mpath, hpath, "--output", proto, "--config", cfg_file]) == 0
    model = str(tmp_path / "zs.model")
    code = main(
        ["fnet-train", mpath, hpath, "--zero-shot", "--mode", "fixed",
         "--label-emb", "proto-hle", "--prototypes", proto, "--embeddings", epath,
         "--output", model, "--config", cfg_file, "--seed", "7"]
    )
    assert code == 0
    loaded, kind = fnet.load_model(model)
    assert kind == "proto-hle"
    # zero-shot training still scores the full label set
    assert len(loaded.labels) == 12


def test_fnet_train_deterministic(tmp_path, fnet_files, cfg_file):
    mpath, hpath, _ = fnet_files
    blobs = []
    for name in ("m1", "m2"):
        model = str(tmp_path / name)
        assert main(["fnet-train", mpath, hpath, "--output", model,
                     "--config", cfg_file, "--seed", "7", "--workers", "1"]) == 0
        blobs.append(_read(model))
    assert blobs[0] == blobs[1]


# ---------------------------------------------------------------------------
# rerank pipeline


@pytest.fixture
def nbest_files(tmp_path):
    lists, gaz = synth_nbest(n_utts=40, n_best=5, seed=5)
    npath = str(tmp_path / "nbest.jsonl")
    rerank.save_nbest(lists, npath)
    gpath = str(tmp_path / "gaz.tsv")
    with open(gpath, "w") as f:
        for word, cls in sorted(gaz.items()):
            f.write(f"{word}\t{cls}\n")
    return npath, gpath


def test_rerank_pipeline(tmp_path, nbest_files, cfg_file, capsys):
    npath, gpath = nbest_files
    init = str(tmp_path / "init.drbm")
    assert main(["rerank-pretrain", npath, "--output", init,
                 "--config", cfg_file, "--seed", "7"]) == 0
    assert _read(init + ".vocab")

    model = str(tmp_path / "trained.drbm")
    code = main(["rerank-train", npath, "--init", init, "--gazetteer", gpath,
                 "--output", model, "--config", cfg_file, "--seed", "7"])
    assert code == 0
    assert _read(model + ".vocab")

    report = str(tmp_path / "rerank.json")
    assert main(["rerank-eval", npath, "--model", model, "--report", report,
                 "--config", cfg_file]) == 0
    rep = json.loads(_read(report))
    assert set(rep) == {"wer", "asr_wer", "oracle_wer"}
    assert rep["oracle_wer"] <= rep["wer"] <= 1.0


def test_rerank_zero_model_reproduces_asr(tmp_path, nbest_files, capsys):
    npath, _ = nbest_files
    assert main(["rerank-eval", npath, "--zero-model"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["wer"] == rep["asr_wer"]


def test_rerank_fusion_and_keywords(tmp_path, nbest_files, cfg_file, capsys):
    npath, _ = nbest_files
    model = str(tmp_path / "trained.drbm")
    assert main(["rerank-train", npath, "--output", model,
                 "--config", cfg_file, "--seed", "7"]) == 0
    kpath = str(tmp_path / "keywords.tsv")
    rerank.save_keywords({"london": 1.0, "paris": 1.0}, kpath)
    assert main(["rerank-eval", npath, "--model", model, "--fuse-slp", "1.0",
                 "--keywords", kpath, "--config", cfg_file, "--seed", "7"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert "weighted_wer" in rep and 0.0 <= rep["weighted_wer"] <= 1.0


def test_rerank_train_deterministic(tmp_path, nbest_files, cfg_file):
    npath, gpath = nbest_files
    blobs = []
    for name in ("r1", "r2"):
        model = str(tmp_path / name)
        assert main(["rerank-train", npath, "--gazetteer", gpath, "--output", model,
                     "--config", cfg_file, "--seed", "7", "--workers", "1"]) == 0
        blobs.append(_read(model))
    assert blobs[0] == blobs[1]


# ---------------------------------------------------------------------------
# tsa pipeline


@pytest.fixture
def tsa_files(tmp_path):
    data = synth_tsa(90, seed=4, length=7, fillers=10, span_junk=1)
    tr = str(tmp_path / "train.jsonl")
    dv = str(tmp_path / "dev.jsonl")
    sentic.save_tsa(data[:60], tr)
    sentic.save_tsa(data[60:], dv)
    return tr, dv


def test_tsa_pipeline(tmp_path, tsa_files, cfg_file, capsys):
    tr, dv = tsa_files
    ckpt = str(tmp_path / "tsa.ckpt")
    code = main(["tsa-train", tr, dv, "--output", ckpt,
                 "--config", cfg_file, "--seed", "7"])
    assert code == 0
    assert "best epoch" in capsys.readouterr().err

    report = str(tmp_path / "tsa.json")
    assert main(["tsa-eval", ckpt, dv, "--report", report]) == 0
    rep = json.loads(_read(report))
    assert set(rep) == {"strict_acc", "macro_f1", "micro_f1", "sentiment_acc"}


def test_tsa_target_averaging_flag(tmp_path, tsa_files, cfg_file):
    tr, dv = tsa_files
    ckpt = str(tmp_path / "avg.ckpt")
    assert main(["tsa-train", tr, dv, "--target-averaging", "--output", ckpt,
                 "--config", cfg_file, "--seed", "7"]) == 0
    params = sentic.load_checkpoint(ckpt)
    assert params.config.target_averaging is True


def test_tsa_train_deterministic(tmp_path, tsa_files, cfg_file):
    tr, dv = tsa_files
    blobs = []
    for name in ("t1", "t2"):
        ckpt = str(tmp_path / name)
        assert main(["tsa-train", tr, dv, "--output", ckpt,
                     "--config", cfg_file, "--seed", "7", "--workers", "1"]) == 0
        blobs.append(_read(ckpt))
    assert blobs[0] == blobs[1]
