"""Subcommand front door for the training and evaluation pipelines.

Exit codes: 0 success, 2 input error (missing/malformed files, bad flags,
unknown config keys), 3 numeric failure (non-finite values produced).
Inputs are fully loaded and validated before any output file is written, so
a failing invocation leaves no partial artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import corpus as corpus_mod
from . import embed as embed_mod
from . import fnet as fnet_mod
from . import metrics as metrics_mod
from . import rerank as rerank_mod
from . import sentic as sentic_mod
from .config import RunConfig, load_config

__all__ = ["main"]


class NumericFailure(Exception):
    """Raised when a pipeline produces non-finite values."""


def _check_finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericFailure(f"{name} produced non-finite values")


def _config_from(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.workers is not None:
        cfg.set("workers", args.workers)
    return cfg


def _write_report(values, path):
    text = metrics_mod.format_report(values, as_json=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _save_tokens(tokens, path):
    with open(path, "w", encoding="utf-8") as f:
        for t in tokens:
            f.write(t + "\n")


def _load_vocab_file(path):
    with open(path, encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
    if corpus_mod.UNK not in tokens:
        raise ValueError(f"{path}: vocabulary lacks {corpus_mod.UNK}")
    return corpus_mod.Vocabulary(
        token_to_id={t: i for i, t in enumerate(tokens)},
        id_to_token=tokens,
        counts={t: 0 for t in tokens},
        min_count=1,
    )


# ---------------------------------------------------------------------------
# embed


def cmd_embed_train(args):
    cfg = _config_from(args)
    corpus = corpus_mod.load_corpus(args.corpus)
    taxonomy = corpus_mod.load_taxonomy(args.taxonomy) if args.taxonomy else None
    vocab = corpus_mod.build_vocab(corpus, min_count=cfg["embed.min_count"])
    train_cfg = embed_mod.SkipNerConfig(
        dims=cfg["embed.dims"],
        window=cfg["embed.window"],
        negatives=cfg["embed.negatives"],
        lr_initial=cfg["embed.lr_initial"],
        lr_final=cfg["embed.lr_final"],
        epochs=cfg["embed.epochs"],
        groups=tuple(cfg.strings("embed.groups")),
        unigram_exponent=cfg["embed.unigram_exponent"],
        seed=cfg["seed"],
    )
    emb, _ = embed_mod.train_skipner(corpus, vocab, train_cfg, taxonomy=taxonomy)
    _check_finite("embedding training", emb.word_vectors)
    embed_mod.save_embeddings(emb, args.output)
    print(f"wrote {emb.word_vectors.shape[0]} vectors to {args.output}", file=sys.stderr)
    return 0


def cmd_embed_query(args):
    emb = embed_mod.load_embeddings(args.embeddings)
    neighbors = embed_mod.nearest_neighbors(emb, args.word, args.k)
    width = max((len(w) for w, _ in neighbors), default=4)
    for word, cos in neighbors:
        print(f"{word.ljust(width)}  {cos:.6f}")
    return 0


def cmd_embed_crf_feats(args):
    cfg = _config_from(args)
    corpus = corpus_mod.load_corpus(args.corpus)
    emb = embed_mod.load_embeddings(args.embeddings)
    if corpus_mod.UNK not in emb.tokens:
        raise ValueError(f"{args.embeddings}: embedding vocabulary lacks {corpus_mod.UNK}")
    vocab = corpus_mod.Vocabulary(
        token_to_id={t: i for i, t in enumerate(emb.tokens)},
        id_to_token=list(emb.tokens),
        counts={t: 0 for t in emb.tokens},
        min_count=1,
    )
    binarized = embed_mod.binarize(emb)
    ks = [k for k in cfg.ints("embed.clusters") if k <= len(emb.tokens)]
    clusterings = embed_mod.cluster_words(emb, ks, seed=cfg["seed"])
    text = corpus_mod.emit_crf_features(
        corpus, vocab, binarized, clusterings, window=cfg["embed.window"]
    )
    with open(args.output, "w", encoding="utf-8") as f:
        f.write(text)
    return 0


# ---------------------------------------------------------------------------
# fnet


def _mention_features(instances, table=None, freeze=False):
    if table is None:
        table = corpus_mod.FeatureGroupTable()
    for inst in instances:
        inst.features, _ = fnet_mod.extract_mention_features(
            inst, table=table, freeze=freeze
        )
    return table


def _feats_path(model_path):
    return str(model_path) + ".feats"


def cmd_fnet_proto(args):
    cfg = _config_from(args)
    mentions = fnet_mod.load_mentions(args.mentions)
    hierarchy = fnet_mod.load_hierarchy(args.hierarchy)
    table = fnet_mod.select_prototypes(mentions, hierarchy, k=cfg["fnet.prototypes"])
    fnet_mod.save_prototypes(table, args.output)
    return 0


def _build_label_embedding(kind, hierarchy, args, cfg):
    if kind in ("proto", "proto-hle"):
        if not args.prototypes or not args.embeddings:
            raise ValueError(f"label embedding {kind!r} needs --prototypes and --embeddings")
        protos = fnet_mod.load_prototypes(args.prototypes, k=cfg["fnet.prototypes"])
        emb = embed_mod.load_embeddings(args.embeddings)
        b_proto = fnet_mod.proto_le(protos, hierarchy, emb)
        if kind == "proto":
            return b_proto
        return fnet_mod.proto_hle(b_proto, fnet_mod.hle(hierarchy))
    if kind == "hle":
        return fnet_mod.hle(hierarchy)
    raise ValueError(f"unknown label embedding kind {kind!r}")


def cmd_fnet_train(args):
    cfg = _config_from(args)
    mentions = fnet_mod.load_mentions(args.mentions)
    hierarchy = fnet_mod.load_hierarchy(args.hierarchy)
    if args.zero_shot:
        # hold every level-2 label out of training
        kept = []
        for inst in mentions:
            labels = {l for l in inst.labels if hierarchy.level[l] < 2}
            if labels:
                kept.append(
                    fnet_mod.MentionInstance(
                        tokens=inst.tokens, start=inst.start, end=inst.end, labels=labels
                    )
                )
        mentions = kept
        if not mentions:
            raise ValueError("zero-shot filter removed every training mention")
    b_init = None
    if args.mode in ("fixed", "adaptive") or args.label_emb:
        kind = args.label_emb or "proto"
        b_init = _build_label_embedding(kind, hierarchy, args, cfg)
    table = _mention_features(mentions)
    warp_cfg = fnet_mod.WarpConfig(
        dims=cfg["fnet.dims"],
        epochs=cfg["fnet.epochs"],
        lr=cfg["fnet.lr"],
        lam=cfg["fnet.lam"],
        margin=cfg["fnet.margin"],
        seed=cfg["seed"],
    )
    model = fnet_mod.warp_train(mentions, hierarchy, args.mode, warp_cfg, b_init=b_init)
    _check_finite("typing model", model.A, model.B)
    fnet_mod.save_model(model, args.label_emb or "joint", args.output)
    _save_tokens(list(table.groups.get("mention:0", {})), _feats_path(args.output))
    return 0


def _fnet_predict(inst, model, hierarchy, threshold, top_k):
    scores = fnet_mod.score_all(inst.features, model)
    ranked = sorted(
        zip(model.labels, scores.tolist()), key=lambda t: (-t[1], t[0])
    )
    return fnet_mod.type_infer(ranked, hierarchy, threshold, top_k)


def cmd_fnet_eval(args):
    cfg = _config_from(args)
    mentions = fnet_mod.load_mentions(args.mentions)
    hierarchy = fnet_mod.load_hierarchy(args.hierarchy)
    if args.oracle:
        preds = [
            metrics_mod.LabelSetPrediction(gold=m.labels, predicted=m.labels)
            for m in mentions
        ]
        _write_report(_set_metrics(preds), args.report)
        return 0
    if not args.model:
        raise ValueError("either --model or --oracle is required")
    model, _kind = fnet_mod.load_model(args.model)
    table = corpus_mod.FeatureGroupTable()
    with open(_feats_path(args.model), encoding="utf-8") as f:
        for line in f:
            feat = line.rstrip("\n")
            if feat:
                table.intern("mention:0", feat)
    _mention_features(mentions, table=table, freeze=True)
    top_k = cfg["fnet.top_k"]
    if args.threshold_sweep:
        report = {}
        for t in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0]:
            preds = [
                metrics_mod.LabelSetPrediction(
                    gold=m.labels,
                    predicted=_fnet_predict(m, model, hierarchy, t, top_k),
                )
                for m in mentions
            ]
            for key, val in _set_metrics(preds).items():
                report[f"t={t}:{key}"] = val
        _write_report(report, args.report)
        return 0
    threshold = cfg["fnet.threshold"]
    preds = [
        metrics_mod.LabelSetPrediction(
            gold=m.labels,
            predicted=_fnet_predict(m, model, hierarchy, threshold, top_k),
        )
        for m in mentions
    ]
    _write_report(_set_metrics(preds), args.report)
    return 0


def _set_metrics(preds):
    return {
        "strict_acc": metrics_mod.strict_accuracy(preds),
        "macro_f1": metrics_mod.macro_f1(preds),
        "micro_f1": metrics_mod.micro_f1(preds),
    }


# ---------------------------------------------------------------------------
# rerank


def cmd_rerank_pretrain(args):
    cfg = _config_from(args)
    data = rerank_mod.load_nbest(args.nbest)
    vocab = rerank_mod.build_nbest_vocab(data)
    W, b, c = rerank_mod.pretrain_generative(
        [nb.reference for nb in data],
        vocab,
        cfg["rerank.hidden"],
        epochs=cfg["rerank.pretrain_epochs"],
        seed=cfg["seed"],
        lr=cfg["rerank.pretrain_lr"],
    )
    params = rerank_mod.DrbmParams(W=W, b=b, c=c, w0=cfg["rerank.w0"])
    _check_finite("generative pretraining", params.W, params.b, params.c)
    rerank_mod.save_drbm(params, args.output)
    _save_tokens(vocab.id_to_token, str(args.output) + ".vocab")
    return 0


def cmd_rerank_train(args):
    cfg = _config_from(args)
    data = rerank_mod.load_nbest(args.nbest)
    if args.init:
        params = rerank_mod.load_drbm(args.init)
        vocab = _load_vocab_file(str(args.init) + ".vocab")
        if params.W.shape[0] != len(vocab):
            raise ValueError("init model and vocabulary sizes disagree")
    else:
        vocab = rerank_mod.build_nbest_vocab(data)
        params = rerank_mod.DrbmParams.zeros(
            len(vocab), cfg["rerank.hidden"], w0=cfg["rerank.w0"]
        )
    prior = None
    if args.gazetteer:
        gaz = corpus_mod.load_gazetteer(args.gazetteer)
        classes = {c: i for i, c in enumerate(corpus_mod.GAZETTEER_CLASSES)}
        pairs = [
            (vocab.id_of(word), classes[cls])
            for word, cls in sorted(gaz.items())
            if word in vocab
        ]
        if not pairs:
            raise ValueError(f"{args.gazetteer}: no gazetteer word is in the vocabulary")
        prior = rerank_mod.EntityPrior(pairs=pairs, lam=cfg["rerank.lam"])
    train_cfg = rerank_mod.DrbmConfig(
        epochs=cfg["rerank.epochs"],
        lr=cfg["rerank.lr"],
        seed=cfg["seed"],
        presence=cfg["rerank.presence"],
        literal_prior=cfg["rerank.literal_prior"],
    )
    trained = rerank_mod.train_drbm(data, params, vocab, train_cfg, prior=prior)
    _check_finite("reranker training", trained.W, trained.b, trained.c)
    rerank_mod.save_drbm(trained, args.output)
    _save_tokens(vocab.id_to_token, str(args.output) + ".vocab")
    return 0


def cmd_rerank_eval(args):
    cfg = _config_from(args)
    data = rerank_mod.load_nbest(args.nbest)
    keywords = rerank_mod.load_keywords(args.keywords) if args.keywords else None
    if args.zero_model:
        scorer = lambda h: h.asr_logp  # noqa: E731 - tiny adapter
    else:
        if not args.model:
            raise ValueError("either --model or --zero-model is required")
        params = rerank_mod.load_drbm(args.model)
        vocab = _load_vocab_file(str(args.model) + ".vocab")
        presence = cfg["rerank.presence"]
        rbm = lambda h: rerank_mod.score_rbm(h, params, vocab, presence=presence)  # noqa: E731
        if args.fuse_slp is not None:
            slp_data = rerank_mod.load_nbest(args.slp_train) if args.slp_train else data
            slp_vocab = vocab
            model = rerank_mod.train_slp(
                slp_data,
                slp_vocab,
                pairs_per_list=cfg["rerank.slp_pairs"],
                iterations=cfg["rerank.slp_iterations"],
                lr=cfg["rerank.slp_lr"],
                seed=cfg["seed"],
            )
            alpha = args.fuse_slp
            scorer = lambda h: rerank_mod.fuse(  # noqa: E731
                rbm(h), rerank_mod.slp_score(h, model, slp_vocab), alpha=alpha
            )
        else:
            scorer = rbm
    report = {
        "wer": rerank_mod.corpus_wer(data, scorer),
        "asr_wer": rerank_mod.corpus_wer(data, lambda h: h.asr_logp),
        "oracle_wer": _oracle_wer(data),
    }
    if keywords is not None:
        report["weighted_wer"] = _weighted_corpus_wer(data, scorer, keywords)
    _write_report(report, args.report)
    return 0


def _oracle_wer(data):
    errors = sum(
        metrics_mod.align(nb.reference, nb.hyps[nb.oracle_index()].words).errors
        for nb in data
    )
    return errors / max(1, sum(len(nb.reference) for nb in data))


def _weighted_corpus_wer(data, scorer, keywords):
    """Keyword-weighted corpus WER; words off the keyword list weigh 0."""
    err = 0.0
    denom = 0.0
    for nb in data:
        chosen = rerank_mod.rerank(nb, scorer)
        a = metrics_mod.align(nb.reference, chosen.words)
        for op, ri, hi in a.ops:
            if op in ("sub", "del"):
                err += keywords.get(nb.reference[ri], 0.0)
            elif op == "ins":
                err += keywords.get(chosen.words[hi], 0.0)
        denom += sum(keywords.get(w, 0.0) for w in nb.reference)
    return err / max(1.0, denom)


# ---------------------------------------------------------------------------
# tsa


def _sentic_config(cfg, args):
    return sentic_mod.SenticConfig(
        d_w=cfg["tsa.d_w"],
        d_h=cfg["tsa.d_h"],
        d_m=cfg["tsa.d_m"],
        d_c=cfg["tsa.d_c"],
        max_concepts=cfg["tsa.max_concepts"],
        aspects=tuple(cfg.strings("tsa.aspects")),
        four_class=(args.classes == 4),
        lr=cfg["tsa.lr"],
        epochs=cfg["tsa.epochs"],
        dropout=cfg["tsa.dropout"],
        seed=cfg["seed"],
        target_averaging=args.target_averaging,
    )


def cmd_tsa_train(args):
    cfg = _config_from(args)
    train_set = sentic_mod.load_tsa(args.train)
    dev_set = sentic_mod.load_tsa(args.dev)
    model_cfg = _sentic_config(cfg, args)
    params = sentic_mod.train(train_set, dev_set, model_cfg)
    _check_finite("sentiment training", *params.arrays.values())
    sentic_mod.save_checkpoint(params, args.output)
    print(f"best epoch {params.best_epoch}", file=sys.stderr)
    return 0


def cmd_tsa_eval(args):
    params = sentic_mod.load_checkpoint(args.checkpoint)
    data = sentic_mod.load_tsa(args.data)
    report = sentic_mod.predict_and_evaluate(data, params)
    _write_report(
        {
            "strict_acc": report["strict_accuracy"],
            "macro_f1": report["macro_f1"],
            "micro_f1": report["micro_f1"],
            "sentiment_acc": report["sentiment_accuracy"],
        },
        args.report,
    )
    return 0


# ---------------------------------------------------------------------------
# dispatch


def _add_common(p):
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("--seed", type=int, help="global random seed")
    p.add_argument("--workers", type=int, help="worker count (1 = deterministic)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="conceptkit",
        description="Concept-embedding pipelines: tagging embeddings, "
        "fine-grained typing, hypothesis reranking, targeted sentiment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed-train", help="train multi-task word embeddings")
    p.add_argument("corpus")
    p.add_argument("--taxonomy")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_embed_train)

    p = sub.add_parser("embed-query", help="nearest neighbors of a word")
    p.add_argument("embeddings")
    p.add_argument("word")
    p.add_argument("-k", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_embed_query)

    p = sub.add_parser("embed-crf-feats", help="emit tagging feature file")
    p.add_argument("corpus")
    p.add_argument("embeddings")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_embed_crf_feats)

    p = sub.add_parser("fnet-proto", help="select label prototypes")
    p.add_argument("mentions")
    p.add_argument("hierarchy")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fnet_proto)

    p = sub.add_parser("fnet-train", help="train the mention-typing model")
    p.add_argument("mentions")
    p.add_argument("hierarchy")
    p.add_argument("--mode", choices=["joint", "fixed", "adaptive"], default="joint")
    p.add_argument("--label-emb", choices=["proto", "hle", "proto-hle"])
    p.add_argument("--prototypes")
    p.add_argument("--embeddings")
    p.add_argument("--zero-shot", action="store_true")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fnet_train)

    p = sub.add_parser("fnet-eval", help="evaluate mention typing")
    p.add_argument("mentions")
    p.add_argument("hierarchy")
    p.add_argument("--model")
    p.add_argument("--oracle", action="store_true", help="score gold against itself")
    p.add_argument("--threshold-sweep", action="store_true")
    p.add_argument("--report")
    _add_common(p)
    p.set_defaults(func=cmd_fnet_eval)

    p = sub.add_parser("rerank-pretrain", help="generative initialization")
    p.add_argument("nbest")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_rerank_pretrain)

    p = sub.add_parser("rerank-train", help="train the discriminative reranker")
    p.add_argument("nbest")
    p.add_argument("--init")
    p.add_argument("--gazetteer")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_rerank_train)

    p = sub.add_parser("rerank-eval", help="rerank and score an N-best file")
    p.add_argument("nbest")
    p.add_argument("--model")
    p.add_argument("--zero-model", action="store_true")
    p.add_argument("--keywords")
    p.add_argument("--fuse-slp", type=float, metavar="ALPHA")
    p.add_argument("--slp-train")
    p.add_argument("--report")
    _add_common(p)
    p.set_defaults(func=cmd_rerank_eval)

    p = sub.add_parser("tsa-train", help="train the targeted sentiment model")
    p.add_argument("train")
    p.add_argument("dev")
    p.add_argument("--classes", type=int, choices=[3, 4], default=3)
    p.add_argument("--target-averaging", action="store_true")
    p.add_argument("--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_tsa_train)

    p = sub.add_parser("tsa-eval", help="evaluate targeted sentiment")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--classes", type=int, choices=[3, 4], default=3)
    p.add_argument("--target-averaging", action="store_true")
    p.add_argument("--report")
    _add_common(p)
    p.set_defaults(func=cmd_tsa_eval)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
