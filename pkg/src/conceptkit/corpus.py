"""Corpus ingestion and feature extraction.

File formats:
  * corpus: one token per line, TAB-separated columns TOKEN, POS, NETAG and an
    optional comma-separated CONCEPTS column; a blank line ends a sentence.
  * taxonomy: ``concept<TAB>w1,w2,...`` per line.
  * gazetteer: ``word<TAB>CLASS`` with CLASS in {LOCATION, ORGANIZATION, PERSON}.
  * CRF feature file: TAB-separated feature strings per token, gold BIO tag
    last, blank line between sentences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

UNK = "<unk>"

GAZETTEER_CLASSES = ("LOCATION", "ORGANIZATION", "PERSON")


@dataclass
class Token:
    surface: str
    pos: str = ""
    ne_tag: str = ""
    concepts: tuple = ()


@dataclass
class Corpus:
    sentences: list  # list of list[Token]

    def __post_init__(self):
        for si, sent in enumerate(self.sentences):
            if not sent:
                raise ValueError(f"sentence {si} is empty")
            _check_bio(sent, si)

    def tokens(self):
        for sent in self.sentences:
            yield from sent


def _check_bio(sent, si):
    prev = "O"
    for tok in sent:
        tag = tok.ne_tag or "O"
        if tag.startswith("I-"):
            cls = tag[2:]
            if not (prev == "B-" + cls or prev == "I-" + cls):
                raise ValueError(
                    f"sentence {si}: malformed BIO transition {prev} -> {tag}"
                )
        prev = tag


def parse_corpus(lines):
    """Parse the tab-separated token-per-line format into a Corpus."""
    sentences = []
    current = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = line.split("\t")
        if len(cols) < 1 or not cols[0]:
            raise ValueError(f"line {lineno}: missing token column")
        concepts = ()
        if len(cols) >= 4 and cols[3]:
            concepts = tuple(c for c in cols[3].split(",") if c)
        current.append(
            Token(
                surface=cols[0],
                pos=cols[1] if len(cols) > 1 else "",
                ne_tag=cols[2] if len(cols) > 2 else "",
                concepts=concepts,
            )
        )
    if current:
        sentences.append(current)
    if not sentences:
        raise ValueError("empty corpus")
    return Corpus(sentences)


def load_corpus(path):
    with open(path, encoding="utf-8") as f:
        return parse_corpus(f)


def serialize_corpus(corpus):
    """Inverse of parse_corpus; round-trips exactly."""
    out = []
    for sent in corpus.sentences:
        for tok in sent:
            cols = [tok.surface, tok.pos, tok.ne_tag]
            if tok.concepts:
                cols.append(",".join(tok.concepts))
            out.append("\t".join(cols))
        out.append("")
    return "\n".join(out) + "\n"


@dataclass
class Vocabulary:
    """Dense token ids ordered by (count desc, token asc); <unk> is id 0."""

    token_to_id: dict
    id_to_token: list
    counts: dict
    min_count: int

    def __len__(self):
        return len(self.id_to_token)

    def id_of(self, token):
        return self.token_to_id.get(token, self.token_to_id[UNK])

    def __contains__(self, token):
        return token in self.token_to_id


def build_vocab(corpus, min_count=1):
    counts = {}
    for tok in corpus.tokens():
        counts[tok.surface] = counts.get(tok.surface, 0) + 1
    if not counts:
        raise ValueError("empty corpus")
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    id_to_token = [UNK] + kept
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    return Vocabulary(
        token_to_id=token_to_id,
        id_to_token=id_to_token,
        counts={t: counts.get(t, 0) for t in id_to_token},
        min_count=min_count,
    )


@dataclass
class ConceptLexicon:
    """Case-insensitive concept -> word-set map."""

    concept_words: dict

    def __post_init__(self):
        self.concept_words = {
            c: {w.lower() for w in ws} for c, ws in self.concept_words.items()
        }
        self._word_concepts = {}
        for c, ws in self.concept_words.items():
            for w in ws:
                self._word_concepts.setdefault(w, []).append(c)
        for cs in self._word_concepts.values():
            cs.sort()

    def concepts_of(self, word):
        return self._word_concepts.get(word.lower(), [])


def load_taxonomy(path):
    concept_words = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1]:
                raise ValueError(f"{path}:{lineno}: expected 'concept<TAB>w1,w2,...'")
            words = {w for w in parts[1].split(",") if w}
            if not words:
                raise ValueError(f"{path}:{lineno}: empty word set")
            concept_words.setdefault(parts[0], set()).update(words)
    if not concept_words:
        log.warning("taxonomy file %s is empty", path)
    return ConceptLexicon(concept_words)


def load_gazetteer(path):
    """word -> entity class; words listed under several classes are dropped."""
    seen = {}
    ambiguous = set()
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>CLASS'")
            word, cls = parts[0].lower(), parts[1]
            if cls not in GAZETTEER_CLASSES:
                raise ValueError(f"{path}:{lineno}: unknown class {cls!r}")
            if word in seen and seen[word] != cls:
                ambiguous.add(word)
            seen[word] = cls
    for word in ambiguous:
        del seen[word]
    if ambiguous:
        log.warning("dropped %d ambiguous gazetteer words", len(ambiguous))
    return seen


@dataclass
class FeatureGroupTable:
    """Feature-string interner keyed by (feature type, relative position).

    Every feature id is dense within its group and belongs to exactly one
    group, so the id-to-group map is a total single-valued function.
    """

    groups: dict = field(default_factory=dict)  # key -> {feature: id}

    def group_key(self, ftype, offset):
        return f"{ftype}:{offset}"

    def intern(self, key, feature):
        table = self.groups.setdefault(key, {})
        if feature not in table:
            table[feature] = len(table)
        return table[feature]

    def lookup(self, key, feature):
        return self.groups[key].get(feature)

    def group_size(self, key):
        return len(self.groups.get(key, {}))

    def group_keys(self):
        return list(self.groups)


@dataclass(frozen=True)
class FeatureEvent:
    center_word_id: int
    feature_id: int
    group_key: str


# Feature type names used for group keys.
WORD, POS, TAXO, SELF = "word", "pos", "taxo", "self"


def extract_feature_events(
    corpus,
    vocab,
    table,
    window=2,
    groups=(WORD, POS, TAXO, SELF),
    taxonomy=None,
    freeze=False,
):
    """Yield one FeatureEvent per (center word, feature) pair.

    Per enabled group and position i: context words w_{i+k} and POS tags
    t_{i+k} for -window <= k <= window (k != 0 for the word group, which is
    the plain skip-gram context), taxonomic membership indicators at every
    offset including 0, and NE tags from the NETAG column. The group key
    encodes (type, k). When ``freeze`` is set unseen features are skipped
    instead of being added to the table.
    """
    groups = set(groups)
    if TAXO in groups and taxonomy is None:
        raise ValueError("taxonomic group enabled but no taxonomy given")

    def emit(key, feature, wid):
        if freeze:
            fid = table.lookup(key, feature)
            if fid is None:
                return None
        else:
            fid = table.intern(key, feature)
        return FeatureEvent(wid, fid, key)

    for si, sent in enumerate(corpus.sentences):
        n = len(sent)
        for i, tok in enumerate(sent):
            wid = vocab.id_of(tok.surface)
            for k in range(-window, window + 1):
                j = i + k
                if j < 0 or j >= n:
                    continue
                other = sent[j]
                if WORD in groups and k != 0:
                    ev = emit(
                        table.group_key(WORD, k), other.surface, wid
                    )
                    if ev:
                        yield ev
                if POS in groups:
                    if not other.pos:
                        raise ValueError(
                            f"sentence {si}: POS column required for pos group"
                        )
                    ev = emit(table.group_key(POS, k), other.pos, wid)
                    if ev:
                        yield ev
                if TAXO in groups:
                    for concept in taxonomy.concepts_of(other.surface):
                        ev = emit(table.group_key(TAXO, k), concept, wid)
                        if ev:
                            yield ev
                if SELF in groups:
                    if not other.ne_tag:
                        raise ValueError(
                            f"sentence {si}: NETAG column required for self group"
                        )
                    ev = emit(table.group_key(SELF, k), other.ne_tag, wid)
                    if ev:
                        yield ev


def _affixes(word, max_len=4):
    feats = []
    for l in range(1, max_len + 1):
        if l <= len(word):
            feats.append(("pre", l, word[:l]))
            feats.append(("suf", l, word[-l:]))
    return feats


def baseline_features(sent, i, window=2):
    """Unigram/bigram word and POS plus affix features around position i."""
    n = len(sent)
    feats = []
    for k in range(-window, window + 1):
        j = i + k
        if 0 <= j < n:
            feats.append(f"w[{k}]={sent[j].surface}")
            feats.append(f"pos[{k}]={sent[j].pos}")
            for kind, l, s in _affixes(sent[j].surface):
                feats.append(f"{kind}{l}[{k}]={s}")
    for k in range(-window, window):
        j, j2 = i + k, i + k + 1
        if 0 <= j < n and 0 <= j2 < n:
            feats.append(f"w[{k},{k+1}]={sent[j].surface}_{sent[j2].surface}")
            feats.append(f"pos[{k},{k+1}]={sent[j].pos}_{sent[j2].pos}")
    return feats


def emit_crf_features(corpus, vocab, binarized, clusterings, window=2):
    """Render the CRF training file: baseline templates plus embedding-derived
    binarized-dimension and cluster features, BIO tag last.

    ``binarized`` is the (dims x V) matrix in {-1,0,1}; ``clusterings`` maps
    K to a V-length assignment array. Only non-zero binarized entries emit
    features.
    """
    lines = []
    for sent in corpus.sentences:
        n = len(sent)
        wid = [vocab.id_of(t.surface) for t in sent]
        for i, tok in enumerate(sent):
            feats = baseline_features(sent, i, window)
            for k in range(-window, window + 1):
                j = i + k
                if not (0 <= j < n):
                    continue
                col = binarized[:, wid[j]]
                for dim in col.nonzero()[0]:
                    feats.append(f"vd[{k}]={dim}:{int(col[dim])}")
                for K, assign in sorted(clusterings.items()):
                    feats.append(f"c{K}[{k}]={int(assign[wid[j]])}")
            for K, assign in sorted(clusterings.items()):
                for k in range(-window, window):
                    j, j2 = i + k, i + k + 1
                    if 0 <= j < n and 0 <= j2 < n:
                        feats.append(
                            f"c{K}[{k},{k+1}]={int(assign[wid[j]])}_{int(assign[wid[j2]])}"
                        )
                if 0 <= i - 1 and i + 1 < n:
                    feats.append(
                        f"c{K}[-1^+1]={int(assign[wid[i-1]])}_{int(assign[wid[i+1]])}"
                    )
            feats.append(tok.ne_tag or "O")
            lines.append("\t".join(feats))
        lines.append("")
    return "\n".join(lines) + "\n"
