"""Synthetic dataset generators for the three learning pipelines.

Real corpora for these tasks hang off large external resources, so the test
suite and demos exercise the pipelines on rule-generated data whose signal
is known by construction: typed mentions whose head words predict their
label path, N-best lists whose oracle keeps a gazetteer word that the
recognizer's top guess replaces, and sentences where a cue adjacent to the
primary target decides polarity while a decoy cue misleads plain averaging.
"""

from __future__ import annotations

import numpy as np

from .embed import EmbeddingSet
from .fnet import LabelHierarchy, MentionInstance
from .numerics import substream_rng
from .rerank import Hypothesis, NBestList
from .sentic import TsaInstance

__all__ = [
    "synth_fnet",
    "synth_nbest",
    "synth_tsa",
    "FNET_HIERARCHY",
    "TSA_ASPECTS",
]

# 4 coarse labels, 2 fine children each.
FNET_HIERARCHY = [
    "/ORG", "/ORG/COMPANY", "/ORG/TEAM",
    "/PER", "/PER/ARTIST", "/PER/ATHLETE",
    "/LOC", "/LOC/CITY", "/LOC/RIVER",
    "/MISC", "/MISC/EVENT", "/MISC/WORK",
]

_FNET_HEADS = {
    "/ORG/COMPANY": ["acme", "globex", "initech"],
    "/ORG/TEAM": ["rovers", "united", "wanderers"],
    "/PER/ARTIST": ["painter", "singer", "poet"],
    "/PER/ATHLETE": ["runner", "jumper", "swimmer"],
    "/LOC/CITY": ["springfield", "rivertown", "hillview"],
    "/LOC/RIVER": ["longflow", "clearwater", "stonebrook"],
    "/MISC/EVENT": ["festival", "summit", "derby"],
    "/MISC/WORK": ["novel", "symphony", "mural"],
}

_FNET_CONTEXT = {
    "/ORG": ["firm", "board"],
    "/PER": ["who", "born"],
    "/LOC": ["near", "situated"],
    "/MISC": ["famous", "annual"],
}


def synth_fnet(n_mentions=2000, seed=0, embed_dims=16, noise=0.05, cue_reliability=0.6):
    """Typed mentions plus a word-embedding table aligned with the labels.

    Each mention's head word is drawn from its fine label's head list and
    its context word from the coarse label's cue list (with probability
    ``cue_reliability``, otherwise a generic filler), so features are
    label-correlated; head-word embeddings cluster by fine label with the
    two siblings of a coarse label sharing a parent direction.
    """
    rng = substream_rng(seed, "synth.fnet")
    hierarchy = LabelHierarchy(FNET_HIERARCHY)
    fine_labels = sorted(_FNET_HEADS)
    mentions = []
    for _ in range(n_mentions):
        fine = fine_labels[int(rng.integers(len(fine_labels)))]
        coarse = hierarchy.parent[fine]
        head = _FNET_HEADS[fine][int(rng.integers(3))]
        if rng.random() < cue_reliability:
            cue = _FNET_CONTEXT[coarse][int(rng.integers(2))]
        else:
            cue = f"x{int(rng.integers(6))}"
        filler = f"x{int(rng.integers(6))}"
        tokens = [cue, head, filler]
        mentions.append(
            MentionInstance(tokens=tokens, start=1, end=2, labels={coarse, fine})
        )
    # embedding table: one gaussian center per coarse label, offset per fine
    words = sorted({w for ws in _FNET_HEADS.values() for w in ws})
    coarse_dirs = {
        c: rng.normal(size=embed_dims) for c in sorted(_FNET_CONTEXT)
    }
    fine_dirs = {f: rng.normal(size=embed_dims) for f in fine_labels}
    vectors = []
    for w in words:
        fine = next(f for f, ws in _FNET_HEADS.items() if w in ws)
        coarse = hierarchy.parent[fine]
        vectors.append(
            coarse_dirs[coarse] + fine_dirs[fine] + noise * rng.normal(size=embed_dims)
        )
    emb = EmbeddingSet(tokens=words, word_vectors=np.array(vectors))
    return mentions, hierarchy, emb


_GAZETTEER = {
    "london": "LOCATION",
    "paris": "LOCATION",
    "acme": "ORGANIZATION",
    "globex": "ORGANIZATION",
    "alice": "PERSON",
    "bob": "PERSON",
}


def synth_nbest(n_utts=500, n_best=20, seed=0, fillers=30, sent_len=6):
    """N-best lists whose oracle hypothesis keeps the reference's gazetteer
    word while higher-posterior competitors swap it for a distractor.

    Returns (lists, gazetteer word->class map).
    """
    rng = substream_rng(seed, "synth.nbest")
    gaz_words = sorted(_GAZETTEER)
    lists = []
    for u in range(n_utts):
        ref = [f"f{int(rng.integers(fillers))}" for _ in range(sent_len)]
        g = gaz_words[int(rng.integers(len(gaz_words)))]
        gpos = int(rng.integers(len(ref)))
        ref[gpos] = g
        hyps = []
        oracle_slot = int(rng.integers(n_best // 2, n_best))
        for j in range(n_best):
            if j == oracle_slot:
                hyps.append(Hypothesis(list(ref), -6.0 - 0.05 * j))
                continue
            bad = list(ref)
            bad[gpos] = "noise" if rng.random() < 0.7 else f"f{int(rng.integers(fillers))}"
            if rng.random() < 0.3:  # occasional extra error elsewhere
                k = int(rng.integers(len(bad)))
                if k != gpos:
                    bad[k] = f"f{int(rng.integers(fillers))}"
            hyps.append(Hypothesis(bad, -1.0 - 0.1 * j))
        lists.append(NBestList(f"utt{u:04d}", ref, hyps))
    return lists, dict(_GAZETTEER)


TSA_ASPECTS = ("price", "service")

_POL_CUES = {"superb": "positive", "dreadful": "negative"}
_ASP_CUES = {"cost": "price", "staff": "service"}
_CUE_CONCEPTS = {"superb": ["c_praise"], "dreadful": ["c_blame"]}


def synth_tsa(n=3000, seed=0, length=12, fillers=300, span_junk=4):
    """Rule-generated targeted-sentiment sentences.

    Each sentence scatters three cue words over random filler: a polarity
    cue at the target's head position, a decoy polarity cue outside the
    target, and an aspect cue that names the gold aspect. The target span
    is the head cue plus ``span_junk`` random filler positions, drawn
    from a large filler vocabulary so the junk stays noisy. Learned
    target attention can isolate the head cue's column, giving a clean
    query for the sentence-level attention; uniform target averaging
    buries it under the junk columns, which in practice degrades the
    per-aspect none-versus-polarity calibration.
    """
    rng = substream_rng(seed, "synth.tsa")
    data = []
    pol_words = sorted(_POL_CUES)
    asp_words = sorted(_ASP_CUES)
    for _ in range(n):
        tokens = [f"w{int(rng.integers(fillers))}" for _ in range(length)]
        pos = [int(x) for x in rng.permutation(length)[: 3 + span_junk]]
        head, decoy, asp_pos, *junk = pos
        gold_cue = pol_words[int(rng.integers(2))]
        tokens[head] = gold_cue
        tokens[decoy] = pol_words[int(rng.integers(2))]
        tokens[asp_pos] = asp_words[int(rng.integers(2))]
        concepts = [[] for _ in tokens]
        for i, tok in enumerate(tokens):
            if tok in _CUE_CONCEPTS:
                concepts[i] = list(_CUE_CONCEPTS[tok])
        data.append(
            TsaInstance(
                tokens=tokens,
                target_positions=sorted([head] + junk),
                aspects={_ASP_CUES[tokens[asp_pos]]: _POL_CUES[gold_cue]},
                concepts=concepts,
            )
        )
    return data
