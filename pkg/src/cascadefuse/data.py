"""Dataset I/O, train/val/test splitting, and the synthetic cascade generator.

The on-disk format is JSON Lines, one story per line:

    {"id": ..., "label": ..., "posts": [{"t": ..., "followers": ..., "text": ...,
      "user": {"desc_len", "name_len", "followers", "follows", "posts",
               "account_age_days", "verified", "geo"}}]}
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .cascade import (
    BINARY_LABELS,
    FOURWAY_LABELS,
    NewsStory,
    Post,
    UserProfile,
    profile_from_dict,
    validate_story,
)
from .errors import CascadeFuseError, MixedLabelSets, ParseError, TooFewStories
from .pointprocess import KernelParams, DEFAULT_PARAMS, simulate_hawkes

SECONDS_PER_DAY = 86400.0


@dataclass
class DatasetManifest:
    stories: list[NewsStory]
    label_set: tuple[str, ...]
    split: dict[str, str] = field(default_factory=dict)  # story id -> train/val/test
    seed: int | None = None

    def by_split(self) -> dict[str, list[NewsStory]]:
        out: dict[str, list[NewsStory]] = defaultdict(list)
        for s in self.stories:
            out[self.split.get(s.id, "train")].append(s)
        return dict(out)


def _story_from_obj(obj: dict) -> tuple[NewsStory, tuple[str, ...] | None]:
    posts = []
    for p in obj["posts"]:
        user = dict(p.get("user", {}))
        if "posts" in user:  # wire name for the post-count profile field
            user["post_count"] = user.pop("posts")
        posts.append(Post(t=float(p["t"]), followers=float(p["followers"]),
                          text=p.get("text", ""), user=profile_from_dict(user)))
    declared = obj.get("label_set")
    story = NewsStory(id=str(obj["id"]), label=str(obj["label"]), posts=tuple(posts))
    return story, tuple(declared) if declared else None


def load_dataset(path) -> DatasetManifest:
    """Parse and validate a JSONL dataset; infers the label set."""
    stories = []
    declared_sets = set()
    labels_seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                story, declared = _story_from_obj(obj)
                story = validate_story(story)
            except CascadeFuseError:
                raise
            except Exception as e:
                raise ParseError(f"line {lineno}: {e}", line=lineno) from e
            if declared:
                declared_sets.add(declared)
            labels_seen.add(story.label)
            stories.append(story)
    if len(declared_sets) > 1:
        raise MixedLabelSets(f"conflicting declared label sets: {sorted(declared_sets)}")
    if declared_sets:
        label_set = next(iter(declared_sets))
    elif labels_seen <= set(BINARY_LABELS):
        label_set = BINARY_LABELS
    else:
        label_set = FOURWAY_LABELS
    unknown = labels_seen - set(label_set)
    if unknown:
        raise MixedLabelSets(f"labels {sorted(unknown)} outside declared set {label_set}")
    return DatasetManifest(stories=stories, label_set=label_set)


def _post_obj(p: Post) -> dict:
    u = p.user
    return {
        "t": p.t, "followers": p.followers, "text": p.text,
        "user": {"desc_len": u.desc_len, "name_len": u.name_len,
                 "followers": u.followers, "follows": u.follows,
                 "posts": u.post_count, "account_age_days": u.account_age_days,
                 "verified": u.verified, "geo": u.geo},
    }


def save_dataset(manifest: DatasetManifest, path) -> None:
    """Write the canonical JSONL form (load -> save -> load round-trips)."""
    with open(path, "w", encoding="utf-8") as f:
        for s in manifest.stories:
            obj = {"id": s.id, "label": s.label,
                   "label_set": list(manifest.label_set),
                   "posts": [_post_obj(p) for p in s.posts]}
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def split_dataset(manifest: DatasetManifest, test_frac: float = 0.25,
                  val_frac: float = 0.15, seed: int = 0,
                  stratified: bool = True) -> DatasetManifest:
    """Seeded split: test_frac held out (3:1 default), then val_frac of the
    remaining training portion moved to validation; optionally per-label."""
    rng = np.random.default_rng(seed)
    groups: dict[str, list[NewsStory]]
    if stratified:
        groups = defaultdict(list)
        for s in manifest.stories:
            groups[s.label].append(s)
        for label in manifest.label_set:
            if len(groups.get(label, [])) < 3:
                raise TooFewStories(
                    f"label {label!r} has too few stories for a stratified split")
    else:
        groups = {"_all": list(manifest.stories)}
        if len(manifest.stories) < 3:
            raise TooFewStories("need at least 3 stories to split")

    split: dict[str, str] = {}
    for _, items in sorted(groups.items()):
        order = rng.permutation(len(items))
        n = len(items)
        n_test = round(test_frac * n)
        n_trainval = n - n_test
        n_val = round(val_frac * n_trainval)
        for rank, idx in enumerate(order):
            if rank < n_test:
                split[items[idx].id] = "test"
            elif rank < n_test + n_val:
                split[items[idx].id] = "val"
            else:
                split[items[idx].id] = "train"
    return DatasetManifest(stories=list(manifest.stories), label_set=manifest.label_set,
                           split=split, seed=seed)


# --- synthetic generation ---

REAL_TOKENS = ("breaking", "report", "official", "confirmed", "statement",
               "news", "update", "today", "sources", "according")
FAKE_TOKENS = ("shocking", "exposed", "truth", "hoax", "really", "unbelievable",
               "news", "update", "today", "share")


@dataclass(frozen=True)
class SyntheticProfile:
    """Infectiousness profile shapes for the generator: real news decays
    monotonically; fake news adds a second upsurge near hour 20-24."""

    base: float = 0.75
    decay_hours: float = 10.0
    bump_height: float = 0.65
    bump_hour: float = 22.0
    bump_width: float = 3.0
    source_followers: float = 150.0
    follower_mean: float = 1.0
    horizon_days: float = 2.0
    shared_text: bool = False  # draw texts from one pooled distribution

    def real(self, h: float) -> float:
        return self.base * math.exp(-h / self.decay_hours)

    def fake(self, h: float) -> float:
        bump = self.bump_height * math.exp(-0.5 * ((h - self.bump_hour) / self.bump_width) ** 2)
        return min(self.base * math.exp(-h / self.decay_hours) + bump, 1.0)


def _sample_text(rng, tokens, n_words=8):
    return " ".join(rng.choice(tokens, size=n_words))


def _sample_profile(rng) -> UserProfile:
    return UserProfile(
        desc_len=float(rng.integers(0, 160)),
        name_len=float(rng.integers(1, 30)),
        followers=float(rng.lognormal(4.0, 1.5)),
        follows=float(rng.lognormal(4.0, 1.0)),
        post_count=float(rng.lognormal(5.0, 1.5)),
        account_age_days=float(rng.integers(1, 4000)),
        verified=int(rng.uniform() < 0.05),
        geo=int(rng.uniform() < 0.3),
    )


def generate_synthetic(n_per_class: int, seed: int = 0,
                       profile_spec: SyntheticProfile | None = None,
                       kernel: KernelParams = DEFAULT_PARAMS) -> DatasetManifest:
    """Fully seeded synthetic dataset: single-bump (real) vs double-bump (fake)
    cascades with overlapping text/user distributions."""
    spec = profile_spec or SyntheticProfile()
    rng = np.random.default_rng(seed)
    horizon = spec.horizon_days * SECONDS_PER_DAY
    stories = []
    for k in range(n_per_class):
        for label in ("true", "fake"):
            s_h = spec.real if label == "true" else spec.fake
            sim_seed = int(rng.integers(0, 2**31))
            cascade = simulate_hawkes(
                s_h, lambda r: r.poisson(spec.follower_mean), horizon,
                seed=sim_seed, params=kernel,
                source_followers=spec.source_followers,
                story_id=f"{label}-{k}", label=label)
            if spec.shared_text:
                tokens = tuple(sorted(set(REAL_TOKENS) | set(FAKE_TOKENS)))
            else:
                tokens = REAL_TOKENS if label == "true" else FAKE_TOKENS
            posts = tuple(
                Post(t=p.t, followers=p.followers,
                     text=_sample_text(rng, tokens),
                     user=_sample_profile(rng))
                for p in cascade.posts)
            stories.append(NewsStory(id=cascade.id, label=label, posts=posts))
    return DatasetManifest(stories=stories, label_set=BINARY_LABELS, seed=seed)


# --- best-effort import of the public tree-layout releases ---

def import_tree_dataset(root) -> DatasetManifest:
    """Import a rumor dataset in the label.txt + tree/<id>.txt layout.

    Expects `label.txt` lines of the form "label:story_id" and one
    `tree/<story_id>.txt` per story whose lines look like
    "['uid', 'tid', minutes]->['uid', 'tid', minutes]". Follower counts are
    not present in that layout and default to 1.
    """
    import ast
    from pathlib import Path

    root = Path(root)
    label_file = root / "label.txt"
    if not label_file.exists():
        raise ParseError(f"{label_file} not found")
    label_map = {"true": "true", "non-rumor": "true", "false": "fake",
                 "fake": "fake", "unverified": "unverified",
                 "debunking": "debunking", "debunk": "debunking"}
    stories = []
    labels_seen = set()
    for lineno, line in enumerate(label_file.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw_label, sid = line.split(":", 1)
        except ValueError as e:
            raise ParseError(f"label.txt line {lineno}: {e}", line=lineno) from e
        label = label_map.get(raw_label.strip().lower())
        if label is None:
            raise ParseError(f"label.txt line {lineno}: unknown label {raw_label!r}",
                             line=lineno)
        tree_file = root / "tree" / f"{sid.strip()}.txt"
        if not tree_file.exists():
            continue
        minutes = set()
        for raw in tree_file.read_text().splitlines():
            if "->" not in raw:
                continue
            for side in raw.split("->", 1):
                try:
                    tup = ast.literal_eval(side.strip())
                    minutes.add(float(tup[2]))
                except Exception:
                    continue
        if not minutes:
            continue
        t0 = min(minutes)
        posts = tuple(Post(t=(m - t0) * 60.0, followers=1.0)
                      for m in sorted(minutes))
        stories.append(validate_story(
            NewsStory(id=sid.strip(), label=label, posts=posts)))
        labels_seen.add(label)
    label_set = BINARY_LABELS if labels_seen <= set(BINARY_LABELS) else FOURWAY_LABELS
    return DatasetManifest(stories=stories, label_set=label_set)
