"""Featurization: tokenization, tf-idf vocabulary, user scaling, story bundles."""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .cascade import (
    PROFILE_COUNT_FIELDS,
    PROFILE_FLAG_FIELDS,
    NewsStory,
    UserProfile,
)
from .errors import EmptyCorpus
from .pointprocess import (
    KernelParams,
    DEFAULT_PARAMS,
    default_grid,
    infectiousness_series,
    post_count_series,
)

URL_RE = re.compile(r"https?://\S+|www\.\S+", re.IGNORECASE)
WORD_RE = re.compile(r"[\w']+", re.UNICODE)
URL_TOKEN = "<url>"

VARIANTS = ("full", "no_cim", "no_time", "freq")


def _is_han(ch: str) -> bool:
    return "一" <= ch <= "鿿" or "㐀" <= ch <= "䶿"


def _split_han(token: str):
    """Split a token into han runs (emitted as character bigrams) and the rest."""
    out = []
    run = []
    other = []

    def flush_other():
        if other:
            out.append("".join(other))
            other.clear()

    def flush_run():
        if len(run) == 1:
            out.append(run[0])
        elif run:
            out.extend(a + b for a, b in zip(run, run[1:]))
        run.clear()

    for ch in token:
        if _is_han(ch):
            flush_other()
            run.append(ch)
        else:
            flush_run()
            other.append(ch)
    flush_other()
    flush_run()
    return out


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; URLs collapse to a sentinel; han runs become
    character bigrams."""
    if not text:
        return []
    text = URL_RE.sub(f" {URL_TOKEN} ", text)
    text = unicodedata.normalize("NFKC", text).lower()
    tokens = []
    for piece in text.split():
        if piece == URL_TOKEN:
            tokens.append(URL_TOKEN)
            continue
        for tok in WORD_RE.findall(piece):
            if any(_is_han(c) for c in tok):
                tokens.extend(_split_han(tok))
            else:
                tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Top-K terms ranked by tf-idf, with smoothed idf weights."""

    terms: tuple[str, ...]
    idf: np.ndarray  # aligned with terms

    def __post_init__(self):
        object.__setattr__(self, "idf", np.asarray(self.idf, dtype=float))
        if len(self.terms) != len(self.idf):
            raise ValueError("terms and idf lengths differ")

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def index(self) -> dict[str, int]:
        # cached lazily on first access
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = {t: i for i, t in enumerate(self.terms)}
            self.__dict__["_index"] = idx
        return idx


def build_vocabulary(corpus: list[NewsStory], K: int = 5000,
                     rank_by: str = "max") -> Vocabulary:
    """Build the top-K tf-idf vocabulary from training stories.

    idf(w) = ln((1 + N) / (1 + df(w))) + 1 over the N training posts; terms
    are ranked by their max (or sum) tf-idf across posts, ties lexicographic.
    """
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    docs = [tokenize(p.text) for story in corpus for p in story.posts]
    n_docs = len(docs)
    df: Counter = Counter()
    best_tf: dict[str, float] = {}
    for doc in docs:
        counts = Counter(doc)
        for w, tf in counts.items():
            df[w] += 1
            if rank_by == "max":
                best_tf[w] = max(best_tf.get(w, 0.0), tf)
            else:
                best_tf[w] = best_tf.get(w, 0.0) + tf
    idf = {w: math.log((1 + n_docs) / (1 + d)) + 1.0 for w, d in df.items()}
    scored = sorted(idf, key=lambda w: (-best_tf[w] * idf[w], w))
    terms = tuple(scored[:K])
    return Vocabulary(terms=terms, idf=np.array([idf[w] for w in terms]))


@dataclass(frozen=True)
class SparseVec:
    """Sparse K-dimensional tf-idf vector of one post."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def vectorize_post(tokens: list[str], vocab: Vocabulary) -> SparseVec:
    """tf * idf over in-vocabulary tokens; OOV tokens are dropped."""
    idx = vocab.index
    counts: Counter = Counter(t for t in tokens if t in idx)
    if not counts:
        return SparseVec(np.empty(0, dtype=np.int64), np.empty(0), vocab.size)
    indices = np.array(sorted(idx[w] for w in counts), dtype=np.int64)
    values = np.array([counts[vocab.terms[i]] * vocab.idf[i] for i in indices])
    return SparseVec(indices=indices, values=values, dim=vocab.size)


@dataclass(frozen=True)
class UserScaler:
    """Per-feature standardization of the six count features; flags pass through."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=float))


def fit_user_scaler(corpus: list[NewsStory]) -> UserScaler:
    if not corpus:
        raise EmptyCorpus("cannot fit a scaler on an empty corpus")
    rows = np.array([p.user.as_tuple()[:6] for s in corpus for p in s.posts], dtype=float)
    means = rows.mean(axis=0)
    stds = rows.std(axis=0)
    stds[stds == 0] = 1.0
    return UserScaler(means=means, stds=stds)


def user_vector(profile: UserProfile, scaler: UserScaler) -> np.ndarray:
    raw = np.array(profile.as_tuple(), dtype=float)
    out = raw.copy()
    out[:6] = (raw[:6] - scaler.means) / scaler.stds
    return out


@dataclass(frozen=True)
class BundleConfig:
    seq_len: int = 30          # posts fed to the linguistic/user GRUs
    temporal_len: int = 47     # hourly infectiousness points
    variant: str = "full"
    kernel: KernelParams = DEFAULT_PARAMS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def grid(self) -> np.ndarray:
        return default_grid(self.temporal_len)


@dataclass(frozen=True)
class FeatureBundle:
    """Featurized story: linguistic sequence, user sequence, temporal series."""

    linguistic: tuple[SparseVec, ...]
    users: np.ndarray            # (seq_len, 8)
    mask: np.ndarray             # (seq_len,) bool, True at real posts
    temporal: np.ndarray | None  # (temporal_len,) or None for the no_time variant
    label: str


def build_bundle(story: NewsStory, vocab: Vocabulary, scaler: UserScaler,
                 config: BundleConfig) -> FeatureBundle:
    """Vectorize the first seq_len posts and attach the variant's temporal stream."""
    T = config.seq_len
    posts = story.posts[:T]
    n_real = len(posts)
    empty = SparseVec(np.empty(0, dtype=np.int64), np.empty(0), vocab.size)
    linguistic = tuple(vectorize_post(tokenize(p.text), vocab) for p in posts) \
        + (empty,) * (T - n_real)
    users = np.zeros((T, 8))
    for i, p in enumerate(posts):
        users[i] = user_vector(p.user, scaler)
    mask = np.zeros(T, dtype=bool)
    mask[:n_real] = True

    if config.variant in ("full", "no_cim"):
        temporal = np.array(infectiousness_series(story, config.grid(), config.kernel).values)
    elif config.variant == "freq":
        temporal = post_count_series(story, config.grid())
    else:  # no_time
        temporal = None
    return FeatureBundle(linguistic=linguistic, users=users, mask=mask,
                         temporal=temporal, label=story.label)


ARTIFACT_VERSION = 1


def save_featurizer(path, vocab: Vocabulary, scaler: UserScaler) -> None:
    """Persist the vocabulary and scaler as a versioned JSON artifact."""
    doc = {
        "version": ARTIFACT_VERSION,
        "terms": list(vocab.terms),
        "idf": vocab.idf.tolist(),
        "user_means": scaler.means.tolist(),
        "user_stds": scaler.stds.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False)


def load_featurizer(path) -> tuple[Vocabulary, UserScaler]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported featurizer version {doc.get('version')!r}")
    vocab = Vocabulary(terms=tuple(doc["terms"]), idf=np.array(doc["idf"]))
    scaler = UserScaler(means=np.array(doc["user_means"]), stds=np.array(doc["user_stds"]))
    return vocab, scaler
