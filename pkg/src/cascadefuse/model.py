"""The fused classifier: three GRU encoder paths, inter-modal attention,
max-pool concatenation, and a two-layer softmax head, with training,
evaluation, grid search, and the time-frame sweep."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigMismatch, EmptyDataset, EmptySpace
from .features import BundleConfig, FeatureBundle, build_bundle
from .layers import (
    HiddenSequence,
    ParameterSet,
    adadelta_step,
    cim_attention,
    cross_entropy,
    fc,
    glorot,
    gru_unroll,
)

VARIANTS = ("full", "no_cim", "no_time", "freq")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "full"
    vocab_size: int = 5000
    embed_dim: int = 100          # linguistic embedding dimension
    user_dim: int = 8
    seq_len: int = 30             # linguistic/user sequence length
    temporal_len: int = 47
    E_l: int = 32
    E_u: int = 32
    E_s: int = 32
    f2_dim: int | None = None     # defaults to E_con
    tau: int = 2
    dropout: float = 0.5
    max_epochs: int = 500
    patience: int = 10
    min_improvement: float = 1e-6
    seed: int = 0
    gru_form: str = "paper"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.E_l != self.E_u:
            raise ValueError("CIM requires E_l == E_u")

    @property
    def has_temporal(self) -> bool:
        return self.variant != "no_time"

    @property
    def has_cim(self) -> bool:
        return self.variant != "no_cim"

    @property
    def e_con(self) -> int:
        """Dimension of the pooled concatenation f1 for this variant."""
        dim = self.E_l + self.E_u
        if self.has_cim:
            dim += 2 * self.E_l
        if self.has_temporal:
            dim += self.E_s
        return dim

    @property
    def f2_dim_effective(self) -> int:
        return self.f2_dim if self.f2_dim is not None else self.e_con


@dataclass
class EvalReport:
    accuracy: float
    per_class_f1: dict[str, float]
    confusion: np.ndarray  # (tau, tau) counts, rows = truth
    loss: float

    def to_dict(self):
        return {"accuracy": self.accuracy, "per_class_f1": self.per_class_f1,
                "confusion": self.confusion.tolist(), "loss": self.loss}


def init_params(config: ModelConfig, seed: int | None = None) -> ParameterSet:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    p = ParameterSet()
    p.add("embed", glorot(rng, config.vocab_size, config.embed_dim))

    def add_gru(prefix, in_dim, out_dim):
        for gate in ("z", "r", "h"):
            p.add(f"{prefix}_U{gate}", glorot(rng, in_dim, out_dim))
            p.add(f"{prefix}_W{gate}", glorot(rng, out_dim, out_dim))
        p.add(f"{prefix}_fcW", glorot(rng, out_dim, out_dim))
        p.add(f"{prefix}_fcb", np.zeros(out_dim))

    add_gru("ling", config.embed_dim, config.E_l)
    add_gru("user", config.user_dim, config.E_u)
    if config.has_temporal:
        add_gru("temp", 1, config.E_s)

    f2 = config.f2_dim_effective
    p.add("f2_W", glorot(rng, config.e_con, f2))
    p.add("f2_b", np.zeros(f2))
    p.add("out_W", glorot(rng, f2, config.tau))
    p.add("out_b", np.zeros(config.tau))
    return p


def _gru_weights(params, prefix):
    return tuple(params[f"{prefix}_{n}"] for n in ("Uz", "Wz", "Ur", "Wr", "Uh", "Wh"))


def _encode_path(inputs, mask, params, prefix, config, training, rng) -> HiddenSequence:
    """GRU over the sequence, dropout on the raw states, per-step FC, dropout
    again, then re-zero the padded rows."""
    seq = gru_unroll(inputs, mask, *_gru_weights(params, prefix), form=config.gru_form)
    h = ad.dropout(seq.states, config.dropout, training, rng)
    h = fc(h, params[f"{prefix}_fcW"], params[f"{prefix}_fcb"])
    h = ad.dropout(h, config.dropout, training, rng)
    h = h * Tensor(mask.astype(float)[:, None])  # FC bias leaks into padded rows
    return HiddenSequence(states=h, mask=mask)


def forward(bundle: FeatureBundle, params: ParameterSet, config: ModelConfig,
            training: bool = False, rng: np.random.Generator | None = None):
    """Run the variant's architecture on one featurized story.

    Returns the class-probability tensor and a trace dict of intermediates.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if len(bundle.linguistic) != config.seq_len:
        raise ConfigMismatch(
            f"bundle sequence length {len(bundle.linguistic)} != config {config.seq_len}")
    if config.has_temporal:
        if bundle.temporal is None:
            raise ConfigMismatch(f"variant {config.variant!r} needs a temporal stream")
        if len(bundle.temporal) != config.temporal_len:
            raise ConfigMismatch(
                f"temporal length {len(bundle.temporal)} != config {config.temporal_len}")
    if bundle.linguistic[0].dim != config.vocab_size:
        raise ConfigMismatch(
            f"vocab size {bundle.linguistic[0].dim} != config {config.vocab_size}")

    mask = bundle.mask
    E = params["embed"]
    ling_in = [ad.embedding_lookup(E, v.indices, v.values) if mask[t]
               else Tensor(np.zeros(config.embed_dim))
               for t, v in enumerate(bundle.linguistic)]
    H_l = _encode_path(ling_in, mask, params, "ling", config, training, rng)

    user_in = [Tensor(bundle.users[t]) for t in range(config.seq_len)]
    H_u = _encode_path(user_in, mask, params, "user", config, training, rng)

    pooled = [ad.maxpool_time(H_l.states, mask), ad.maxpool_time(H_u.states, mask)]
    trace = {}
    if config.has_cim:
        H_ul, attn = cim_attention(H_l, H_u)
        pooled.append(ad.maxpool_time(H_ul.states, mask))
        trace["attention"] = attn
    if config.has_temporal:
        temp_mask = np.ones(config.temporal_len, dtype=bool)
        temp_in = [Tensor(np.array([v])) for v in bundle.temporal]
        H_s = _encode_path(temp_in, temp_mask, params, "temp", config, training, rng)
        pooled.append(ad.maxpool_time(H_s.states, temp_mask))

    f1 = ad.concat(pooled, axis=0)
    f1 = ad.dropout(f1, config.dropout, training, rng)
    f2 = ad.relu(fc(f1, params["f2_W"], params["f2_b"]))
    f2 = ad.dropout(f2, config.dropout, training, rng)
    z = ad.softmax(fc(f2, params["out_W"], params["out_b"]))
    trace["f1_dim"] = f1.data.shape[0]
    return z, trace


@dataclass
class TemporalScaler:
    """Train-split standardization of the temporal stream (raw infectiousness
    values are ~1e-4 scale and would vanish through tanh)."""

    mean: float = 0.0
    std: float = 1.0

    def apply(self, bundle: FeatureBundle) -> FeatureBundle:
        if bundle.temporal is None:
            return bundle
        return replace(bundle, temporal=(bundle.temporal - self.mean) / self.std)


def fit_temporal_scaler(bundles: list[FeatureBundle]) -> TemporalScaler:
    vals = np.concatenate([b.temporal for b in bundles if b.temporal is not None]) \
        if any(b.temporal is not None for b in bundles) else np.array([0.0])
    std = float(vals.std())
    return TemporalScaler(mean=float(vals.mean()), std=std if std > 0 else 1.0)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_dict(self):
        return {"train_loss": self.train_loss, "val_loss": self.val_loss,
                "best_epoch": self.best_epoch}


def _label_index(label: str, label_set) -> int:
    return list(label_set).index(label)


def _dataset_loss(bundles, labels, params, config) -> float:
    total = 0.0
    for b, y in zip(bundles, labels):
        z, _ = forward(b, params, config, training=False)
        total += float(cross_entropy(z, y).data)
    return total / len(bundles)


def train(train_bundles: list[FeatureBundle], val_bundles: list[FeatureBundle],
          config: ModelConfig, label_set=("true", "fake")):
    """Per-story AdaDelta training with early stopping on validation loss.

    Returns the best-validation-epoch parameters and the loss history.
    """
    if not train_bundles or not val_bundles:
        raise EmptyDataset("training and validation sets must be non-empty")
    scaler = fit_temporal_scaler(train_bundles)
    train_bundles = [scaler.apply(b) for b in train_bundles]
    val_bundles = [scaler.apply(b) for b in val_bundles]
    y_train = [_label_index(b.label, label_set) for b in train_bundles]
    y_val = [_label_index(b.label, label_set) for b in val_bundles]

    params = init_params(config)
    rng = np.random.default_rng(config.seed + 1)
    history = TrainHistory()
    best_val = np.inf
    best_values = params.copy_values()
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_bundles))
        epoch_loss = 0.0
        for i in order:
            z, _ = forward(train_bundles[i], params, config, training=True, rng=rng)
            loss = cross_entropy(z, y_train[i])
            epoch_loss += float(loss.data)
            loss.backward()
            adadelta_step(params)
        history.train_loss.append(epoch_loss / len(train_bundles))

        val_loss = _dataset_loss(val_bundles, y_val, params, config)
        history.val_loss.append(val_loss)
        if val_loss < best_val - config.min_improvement:
            best_val = val_loss
            best_values = params.copy_values()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    params.load_values(best_values)
    return params, history, scaler


def f1_scores(confusion: np.ndarray, label_set) -> dict[str, float]:
    """Per-class F1 = 2PR/(P+R) from a confusion matrix (rows = truth);
    classes absent from both predictions and truth score 0 by convention."""
    out = {}
    for k, name in enumerate(label_set):
        tp = confusion[k, k]
        fp = confusion[:, k].sum() - tp
        fn = confusion[k, :].sum() - tp
        denom = 2 * tp + fp + fn
        out[name] = float(2 * tp / denom) if denom > 0 else 0.0
    return out


def evaluate(test_bundles: list[FeatureBundle], params: ParameterSet,
             config: ModelConfig, label_set=("true", "fake"),
             scaler: TemporalScaler | None = None) -> EvalReport:
    """Argmax predictions; accuracy, per-class F1 and confusion counts."""
    if not test_bundles:
        raise EmptyDataset("evaluation set is empty")
    if scaler is not None:
        test_bundles = [scaler.apply(b) for b in test_bundles]
    tau = config.tau
    confusion = np.zeros((tau, tau), dtype=int)
    total_loss = 0.0
    for b in test_bundles:
        y = _label_index(b.label, label_set)
        z, _ = forward(b, params, config, training=False)
        pred = int(np.argmax(z.data))
        confusion[y, pred] += 1
        total_loss += float(cross_entropy(z, y).data)

    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    return EvalReport(accuracy=accuracy, per_class_f1=f1_scores(confusion, label_set),
                      confusion=confusion, loss=total_loss / len(test_bundles))


def grid_search(train_bundles, val_bundles, candidates: list[ModelConfig],
                label_set=("true", "fake"), quick_epochs: int | None = 50):
    """Train each candidate (optionally with a reduced epoch cap), pick the
    best validation accuracy; ties broken by lower val loss, then smaller E_con."""
    if not candidates:
        raise EmptySpace("empty configuration space")
    results = []
    for cfg in candidates:
        quick = cfg if quick_epochs is None else replace(cfg, max_epochs=quick_epochs)
        params, history, scaler = train(train_bundles, val_bundles, quick, label_set)
        report = evaluate(val_bundles, params, quick, label_set, scaler=scaler)
        results.append((report.accuracy, -report.loss, -cfg.e_con, cfg, report))
    results.sort(key=lambda r: (r[0], r[1], r[2]), reverse=True)
    best = results[0][3]
    log = [{"config": c.__dict__ | {}, "val_accuracy": acc, "val_loss": -nl}
           for acc, nl, _, c, _ in results]
    return best, log


def timeframe_sweep(stories_by_split, vocab, user_scaler, days: list[int],
                    config: ModelConfig, label_set=("true", "fake"),
                    kernel=None):
    """Re-featurize and retrain for each time frame; day 0 is the no_time variant.

    stories_by_split maps {"train": [...], "val": [...], "test": [...]}.
    Returns a list of (days, accuracy) pairs.
    """
    from .pointprocess import DEFAULT_PARAMS

    kernel = kernel or DEFAULT_PARAMS
    rows = []
    for d in days:
        if d == 0:
            cfg = replace(config, variant="no_time")
            bcfg = BundleConfig(seq_len=config.seq_len, temporal_len=config.temporal_len,
                                variant="no_time", kernel=kernel)
        else:
            t_len = 24 * d - 1
            cfg = replace(config, temporal_len=t_len)
            bcfg = BundleConfig(seq_len=config.seq_len, temporal_len=t_len,
                                variant=cfg.variant, kernel=kernel)
        bundles = {split: [build_bundle(s, vocab, user_scaler, bcfg)
                           for s in stories]
                   for split, stories in stories_by_split.items()}
        params, _, scaler = train(bundles["train"], bundles["val"], cfg, label_set)
        report = evaluate(bundles["test"], params, cfg, label_set, scaler=scaler)
        rows.append((d, report.accuracy))
    return rows
