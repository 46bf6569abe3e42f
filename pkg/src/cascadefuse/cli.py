"""Command-line entry point.

Subcommands: validate, simulate, generate-synthetic, infectiousness,
featurize, train, eval, ablate, sweep, import.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data as dat
from . import features as feat
from . import model as mdl
from . import pointprocess as pp
from .errors import CascadeFuseError, UsageError
from .layers import load_checkpoint, save_checkpoint


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("CASCADEFUSE_THREADS")
    return int(env) if env else 1


def _load_config(args, tau: int) -> mdl.ModelConfig:
    fields = {f.name for f in dataclasses.fields(mdl.ModelConfig)}
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            values.update({k: v for k, v in json.load(f).items() if k in fields})
    # CLI flags override file values
    for name in ("variant", "seed", "seq_len", "max_epochs", "vocab_size"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values.setdefault("tau", tau)
    return mdl.ModelConfig(**values)


def _grid(args) -> np.ndarray:
    return pp.default_grid(args.grid_hours)


def _featurize_manifest(manifest, config: mdl.ModelConfig, variant=None):
    splits = manifest.by_split()
    train_stories = splits.get("train", manifest.stories)
    vocab = feat.build_vocabulary(train_stories, K=config.vocab_size)
    scaler = feat.fit_user_scaler(train_stories)
    config = dataclasses.replace(config, vocab_size=vocab.size)
    bcfg = feat.BundleConfig(seq_len=config.seq_len, temporal_len=config.temporal_len,
                             variant=variant or config.variant)
    bundles = {split: [feat.build_bundle(s, vocab, scaler, bcfg) for s in stories]
               for split, stories in splits.items()}
    return vocab, scaler, bundles, config


def cmd_validate(args):
    manifest = dat.load_dataset(args.input)
    print(f"{len(manifest.stories)} stories, label set {list(manifest.label_set)}")
    return 0


def cmd_simulate(args):
    spec = dat.SyntheticProfile()
    profile = spec.fake if args.profile == "fake" else spec.real
    story = pp.simulate_hawkes(
        profile, lambda r: r.poisson(spec.follower_mean),
        horizon=args.horizon_days * dat.SECONDS_PER_DAY, seed=args.seed,
        source_followers=spec.source_followers,
        story_id=f"sim-{args.seed}", label="true" if args.profile == "real" else "fake")
    manifest = dat.DatasetManifest(stories=[story], label_set=dat.BINARY_LABELS)
    dat.save_dataset(manifest, args.out)
    print(f"simulated cascade with {len(story.posts)} posts -> {args.out}")
    return 0


def cmd_generate_synthetic(args):
    spec = dat.SyntheticProfile(shared_text=args.shared_text,
                                horizon_days=args.horizon_days)
    manifest = dat.generate_synthetic(args.n_per_class, seed=args.seed,
                                      profile_spec=spec)
    try:
        manifest = dat.split_dataset(manifest, seed=args.seed)
    except CascadeFuseError:
        manifest = dat.split_dataset(manifest, seed=args.seed, stratified=False)
    dat.save_dataset(manifest, args.out)
    with open(str(args.out) + ".split.json", "w", encoding="utf-8") as f:
        json.dump(manifest.split, f, indent=0, sort_keys=True)
    print(f"{len(manifest.stories)} synthetic stories -> {args.out}")
    return 0


def cmd_infectiousness(args):
    manifest = dat.load_dataset(args.input)
    grid = _grid(args)

    def one(story):
        return story.id, pp.infectiousness_series(story, grid).values

    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        rows = list(pool.map(one, manifest.stories))
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["story_id"] + [f"h{int(h)}" for h in grid])
        for sid, values in rows:
            w.writerow([sid] + [f"{v:.10g}" for v in values])
    print(f"wrote {len(rows)} series -> {args.out}")
    return 0


def _load_split(args, manifest):
    split_path = getattr(args, "split", None) or str(args.input) + ".split.json"
    if os.path.exists(split_path):
        with open(split_path, encoding="utf-8") as f:
            manifest.split = json.load(f)
    else:
        manifest = dat.split_dataset(manifest, seed=getattr(args, "seed", 0) or 0)
    return manifest


def cmd_featurize(args):
    manifest = _load_split(args, dat.load_dataset(args.input))
    config = _load_config(args, tau=len(manifest.label_set))
    vocab, scaler, bundles, config = _featurize_manifest(manifest, config)
    feat.save_featurizer(args.out, vocab, scaler)
    counts = {k: len(v) for k, v in bundles.items()}
    print(f"featurizer (K={vocab.size}) -> {args.out}; bundles per split: {counts}")
    return 0


def cmd_train(args):
    manifest = _load_split(args, dat.load_dataset(args.input))
    config = _load_config(args, tau=len(manifest.label_set))
    vocab, scaler, bundles, config = _featurize_manifest(manifest, config)
    params, history, tscaler = mdl.train(bundles["train"], bundles["val"], config,
                                         label_set=manifest.label_set)
    save_checkpoint(args.out, params, manifest={
        "config": dataclasses.asdict(config),
        "temporal_scaler": {"mean": tscaler.mean, "std": tscaler.std},
        "label_set": list(manifest.label_set)})
    with open(str(args.out) + ".history.json", "w", encoding="utf-8") as f:
        json.dump(history.to_dict(), f, indent=2)
    print(f"trained {config.variant}: best epoch {history.best_epoch}, "
          f"val loss {min(history.val_loss):.4f} -> {args.out}")
    return 0


def cmd_eval(args):
    manifest = _load_split(args, dat.load_dataset(args.input))
    values, meta = load_checkpoint(args.checkpoint)
    config = mdl.ModelConfig(**meta["config"])
    vocab, scaler, bundles, config2 = _featurize_manifest(manifest, config)
    params = mdl.init_params(config)
    params.load_values(values)
    tscaler = mdl.TemporalScaler(**meta["temporal_scaler"])
    report = mdl.evaluate(bundles["test"], params, config,
                          label_set=tuple(meta["label_set"]), scaler=tscaler)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
    print(f"accuracy {report.accuracy:.4f} -> {args.out}")
    return 0


def _train_eval(manifest, config):
    _, _, bundles, config = _featurize_manifest(manifest, config)
    params, _, tscaler = mdl.train(bundles["train"], bundles["val"], config,
                                   label_set=manifest.label_set)
    report = mdl.evaluate(bundles["test"], params, config,
                          label_set=manifest.label_set, scaler=tscaler)
    return report


def cmd_ablate(args):
    manifest = _load_split(args, dat.load_dataset(args.input))
    out = {}
    for variant in ("full", "no_cim", "no_time", "freq"):
        config = dataclasses.replace(_load_config(args, tau=len(manifest.label_set)),
                                     variant=variant)
        report = _train_eval(manifest, config)
        out[variant] = report.to_dict()
        print(f"{variant}: accuracy {report.accuracy:.4f}")
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=2)
    return 0


def cmd_sweep(args):
    manifest = _load_split(args, dat.load_dataset(args.input))
    config = _load_config(args, tau=len(manifest.label_set))
    splits = manifest.by_split()
    train_stories = splits.get("train", manifest.stories)
    vocab = feat.build_vocabulary(train_stories, K=config.vocab_size)
    scaler = feat.fit_user_scaler(train_stories)
    config = dataclasses.replace(config, vocab_size=vocab.size)
    days = [int(d) for d in args.days.split(",")]
    rows = mdl.timeframe_sweep(splits, vocab, scaler, days, config,
                               label_set=manifest.label_set)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["days", "accuracy"])
        for d, acc in rows:
            w.writerow([d, f"{acc:.6f}"])
    for d, acc in rows:
        print(f"days={d}: accuracy {acc:.4f}")
    return 0


def cmd_import(args):
    manifest = dat.import_tree_dataset(args.input)
    dat.save_dataset(manifest, args.out)
    print(f"imported {len(manifest.stories)} stories -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cascadefuse")
    ap.add_argument("--threads", type=int, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--input", required=True)
        if needs_out:
            p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--split", default=None)
        p.add_argument("--config", default=None)
        p.add_argument("--variant", default=None)
        p.add_argument("--seq-len", dest="seq_len", type=int, default=None)
        p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
        p.add_argument("--vocab-size", dest="vocab_size", type=int, default=None)

    p = sub.add_parser("validate", help="parse and validate a JSONL dataset")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate a single Hawkes cascade")
    p.add_argument("--profile", choices=("real", "fake"), default="real")
    p.add_argument("--horizon-days", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate-synthetic", help="generate a labeled synthetic dataset")
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon-days", type=float, default=2.0)
    p.add_argument("--shared-text", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_synthetic)

    p = sub.add_parser("infectiousness", help="per-story hourly infectiousness CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--grid-hours", type=int, default=47)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_infectiousness)

    p = sub.add_parser("featurize", help="build and save the featurizer artifact")
    common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a model variant")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate all four variants")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="time-frame sweep over day counts")
    common(p)
    p.add_argument("--days", default="0,1,2,3,4,5,6")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("import", help="import a public tree-layout dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import)

    return ap


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (CascadeFuseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
