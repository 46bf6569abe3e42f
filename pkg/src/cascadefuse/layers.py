"""Trainable layers assembled from the autodiff primitives: embedding, GRU,
FC, CIM attention, cross-entropy, and the AdaDelta update."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionalityMismatch, InvalidClass, ShapeMismatch

PROB_FLOOR = 1e-12


class Parameter(Tensor):
    """A trainable tensor carrying its AdaDelta accumulators."""

    __slots__ = ("name", "acc_grad_sq", "acc_delta_sq")

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.acc_grad_sq = np.zeros_like(self.data)
        self.acc_delta_sq = np.zeros_like(self.data)


class ParameterSet(dict):
    """Named parameters; behaves as a dict name -> Parameter."""

    def add(self, name, data) -> Parameter:
        p = Parameter(data, name=name)
        self[name] = p
        return p

    def zero_grad(self):
        for p in self.values():
            p.grad = None

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.items()}

    def load_values(self, values: dict[str, np.ndarray]):
        for k, v in values.items():
            self[k].data = v.copy()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape)


def fc(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Affine layer x @ W + b; broadcasts the bias over rows of a 2-D input."""
    if x.data.shape[-1] != W.data.shape[0]:
        raise ShapeMismatch(f"fc: input dim {x.data.shape[-1]} vs weight {W.data.shape}")
    return x @ W + b


def gru_step(x: Tensor, h_prev: Tensor, U_z, W_z, U_r, W_r, U_h, W_h,
             form: str = "paper") -> Tensor:
    """One GRU update.

    form="paper" gates the candidate as h_prev * (W_h @ r); form="standard"
    uses the conventional W_h @ (r * h_prev).
    """
    z = ad.sigmoid(x @ U_z + h_prev @ W_z)
    r = ad.sigmoid(x @ U_r + h_prev @ W_r)
    if form == "paper":
        f = ad.tanh(x @ U_h + h_prev * (r @ W_h))
    elif form == "standard":
        f = ad.tanh(x @ U_h + (r * h_prev) @ W_h)
    else:
        raise ValueError(f"unknown GRU form {form!r}")
    return (1.0 - z) * h_prev + z * f


@dataclass
class HiddenSequence:
    """Stacked per-step hidden states with a validity mask; padded rows are zero."""

    states: Tensor       # (T, E)
    mask: np.ndarray     # (T,) bool


def gru_unroll(inputs: list[Tensor], mask: np.ndarray, U_z, W_z, U_r, W_r, U_h, W_h,
               form: str = "paper") -> HiddenSequence:
    """Run the GRU over the real prefix of a sequence of 1-D step inputs.

    Padded positions emit zero rows and do not advance the carried state.
    """
    T = len(inputs)
    E = U_z.data.shape[1]
    h = Tensor(np.zeros(E))
    zero = Tensor(np.zeros(E))
    rows = []
    for t in range(T):
        if mask[t]:
            h = gru_step(inputs[t], h, U_z, W_z, U_r, W_r, U_h, W_h, form=form)
            rows.append(h)
        else:
            rows.append(zero)
    return HiddenSequence(states=ad.stack_rows(rows), mask=np.asarray(mask, dtype=bool))


def cim_attention(H_l: HiddenSequence, H_u: HiddenSequence):
    """Pairwise contextual inter-modal attention between two hidden sequences.

    Returns the (T, 2E) fused sequence and a trace of the intermediate
    matching/attention matrices.
    """
    Tl, El = H_l.states.data.shape
    Tu, Eu = H_u.states.data.shape
    if El != Eu:
        raise DimensionalityMismatch(f"hidden dims differ: {El} vs {Eu}")
    if Tl != Tu or not np.array_equal(H_l.mask, H_u.mask):
        raise ShapeMismatch("sequence lengths/masks differ between modalities")
    mask = H_l.mask
    M1 = H_l.states @ H_u.states.T
    M2 = H_u.states @ H_l.states.T
    N1 = ad.masked_row_softmax(M1, mask)
    N2 = ad.masked_row_softmax(M2, mask)
    O1 = N1 @ H_u.states
    O2 = N2 @ H_l.states
    A1 = O1 * H_l.states
    A2 = O2 * H_u.states
    H_ul = ad.concat([A1, A2], axis=1)
    trace = {"M1": M1.data, "M2": M2.data, "N1": N1.data, "N2": N2.data,
             "O1": O1.data, "O2": O2.data, "A1": A1.data, "A2": A2.data}
    return HiddenSequence(states=H_ul, mask=mask), trace


def cross_entropy(z: Tensor, label: int) -> Tensor:
    """-ln z[label], with the probability floored at 1e-12."""
    tau = z.data.shape[0]
    if not 0 <= label < tau:
        raise InvalidClass(f"label {label} outside 0..{tau - 1}")
    return -ad.log(ad.clamp_min(ad.pick(z, label), PROB_FLOOR))


def adadelta_step(params: ParameterSet, rho: float = 0.95, eps: float = 1e-6):
    """Apply one AdaDelta update to every parameter with a gradient, then
    zero the gradient buffers."""
    for p in params.values():
        if p.grad is None:
            continue
        g = p.grad
        p.acc_grad_sq *= rho
        p.acc_grad_sq += (1.0 - rho) * g * g
        delta = -np.sqrt(p.acc_delta_sq + eps) / np.sqrt(p.acc_grad_sq + eps) * g
        p.acc_delta_sq *= rho
        p.acc_delta_sq += (1.0 - rho) * delta * delta
        p.data = p.data + delta
    params.zero_grad()


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ParameterSet, manifest: dict | None = None):
    """Write parameters as an .npz of float64 arrays plus a JSON manifest."""
    path = str(path)
    np.savez(path if path.endswith(".npz") else path + ".npz",
             **{k: p.data for k, p in params.items()})
    meta = {"version": CHECKPOINT_VERSION,
            "shapes": {k: list(p.data.shape) for k, p in params.items()}}
    meta.update(manifest or {})
    base = path[:-4] if path.endswith(".npz") else path
    with open(base + ".json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = str(path)
    base = path[:-4] if path.endswith(".npz") else path
    with open(base + ".json", encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    with np.load(base + ".npz") as npz:
        values = {k: npz[k] for k in npz.files}
    return values, meta
