"""Tiny numpy networks with hand-written backprop, Adam, and the training loop.

Architectures (``h0`` is the first hidden width, ``rest`` the remaining ones):

* independent, disentangled: one bit classifier ``d -> hidden -> 1`` shared by
  every pixel block; entangled variant maps the whole input to ``k`` logits.
* joint: shared block encoder ``d -> h0`` (ReLU), embeddings concatenated
  and classified ``k*h0 -> rest -> 2**k``.
* ar: shared block encoder plus a shared bit classifier
  ``h0 + 4 -> rest -> 1``. The four extra inputs are ``[first, prev=0,
  prev=1, lin(emb_prev)]`` where ``lin`` is a scalar linear read-out of the
  previous block's embedding. Both values of the previous bit are
  enumerated, so the full conditional table is exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics, models
from .logic import Program, concept_to_index
from .synthtask import Dataset


KINK_TOL = 1e-2
SCALE_FLOOR = 1e-6  # difference quotients carry ~1e-11 of roundoff


class TrainingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Dense stacks
# ---------------------------------------------------------------------------


def _init_dense(rng: np.random.Generator, params: dict, name: str, sizes: Sequence[int]) -> None:
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"{name}.{i}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"{name}.{i}.b"] = rng.uniform(-bound, bound, size=fan_out)


def _dense_forward(params: dict, name: str, n_layers: int, x: np.ndarray, final_relu: bool):
    cache = []
    h = x
    for i in range(n_layers):
        z = h @ params[f"{name}.{i}.W"] + params[f"{name}.{i}.b"]
        cache.append((h, z))
        h = np.maximum(z, 0.0) if (i < n_layers - 1 or final_relu) else z
    return h, cache


def _dense_backward(params: dict, name: str, cache, dout: np.ndarray, final_relu: bool, grads: dict):
    n_layers = len(cache)
    d = dout
    for i in reversed(range(n_layers)):
        h, z = cache[i]
        if i < n_layers - 1 or final_relu:
            d = d * (z > 0)
        grads[f"{name}.{i}.W"] = grads.get(f"{name}.{i}.W", 0.0) + h.T @ d
        grads[f"{name}.{i}.b"] = grads.get(f"{name}.{i}.b", 0.0) + d.sum(axis=0)
        d = d @ params[f"{name}.{i}.W"].T
    return d


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    k: int
    kind: str
    hidden_dims: tuple = (32, 32)
    disentangled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.kind not in models.KINDS:
            raise ValueError(f"kind must be one of {models.KINDS}")
        if self.input_dim % self.k:
            raise ValueError("input_dim must split into k equal pixel blocks")

    @property
    def block(self) -> int:
        return self.input_dim // self.k

    @property
    def n_outputs(self) -> int:
        return models.n_params(self.kind, self.k)


class Model:
    """Network mapping inputs to the raw parameters of one concept distribution."""

    def __init__(self, spec: MLPSpec, params: dict):
        self.spec = spec
        self.params = params
        self._n_layers = {}
        for key in params:
            if key.endswith(".W") and key.count(".") == 2:
                name = key.split(".")[0]
                self._n_layers[name] = self._n_layers.get(name, 0) + 1

    def _layers(self, name: str) -> int:
        return self._n_layers.get(name, 0)

    @property
    def _h0(self) -> int:
        hd = self.spec.hidden_dims
        return hd[0] if hd else self.spec.block

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected inputs of shape (B, {self.spec.input_dim}), got {x.shape}")
        raw, cache = getattr(self, f"_fwd_{self.spec.kind}")(x)
        return (raw, cache) if keep_cache else raw

    def backward(self, cache, draw: np.ndarray) -> dict:
        grads: dict = {}
        getattr(self, f"_bwd_{self.spec.kind}")(cache, draw, grads)
        return {key: grads.get(key, np.zeros_like(v)) for key, v in self.params.items()}

    # encoders -----------------------------------------------------------
    def _encode(self, x: np.ndarray):
        b, k = x.shape[0], self.spec.k
        blocks = x.reshape(b * k, self.spec.block)
        n = self._layers("enc")
        if n == 0:
            return blocks.reshape(b, k, -1), None
        emb, cache = _dense_forward(self.params, "enc", n, blocks, final_relu=True)
        return emb.reshape(b, k, -1), cache

    def _encode_backward(self, cache, demb: np.ndarray, grads: dict) -> None:
        if cache is not None:
            _dense_backward(self.params, "enc", cache, demb.reshape(-1, demb.shape[-1]), True, grads)

    # independent --------------------------------------------------------
    def _fwd_independent(self, x):
        n = self._layers("net")
        if self.spec.disentangled:
            b, k = x.shape[0], self.spec.k
            out, cache = _dense_forward(self.params, "net", n, x.reshape(b * k, self.spec.block), False)
            return out.reshape(b, k), cache
        return _dense_forward(self.params, "net", n, x, False)

    def _bwd_independent(self, cache, draw, grads):
        _dense_backward(self.params, "net", cache, draw.reshape(-1, 1 if self.spec.disentangled else self.spec.k), False, grads)

    # joint --------------------------------------------------------------
    def _fwd_joint(self, x):
        emb, enc_cache = self._encode(x)
        flat = emb.reshape(x.shape[0], -1)
        raw, cls_cache = _dense_forward(self.params, "cls", self._layers("cls"), flat, False)
        return raw, (emb.shape, enc_cache, cls_cache)

    def _bwd_joint(self, cache, draw, grads):
        shape, enc_cache, cls_cache = cache
        dflat = _dense_backward(self.params, "cls", cls_cache, draw, False, grads)
        self._encode_backward(enc_cache, dflat.reshape(shape), grads)

    # autoregressive -----------------------------------------------------
    def _fwd_ar(self, x):
        b, k = x.shape[0], self.spec.k
        emb, enc_cache = self._encode(x)  # (b, k, h0)
        h0 = emb.shape[2]
        lin = emb @ self.params["lin.W"] + self.params["lin.b"]  # (b, k, 1)
        n_calls = 2 * k - 1
        inp = np.zeros((b, n_calls, h0 + 4))
        inp[:, 0, :h0] = emb[:, 0]
        inp[:, 0, h0] = 1.0
        for i in range(1, k):
            for v in (0, 1):
                c = 2 * i - 1 + v
                inp[:, c, :h0] = emb[:, i]
                inp[:, c, h0 + 1 + v] = 1.0
                inp[:, c, h0 + 3] = lin[:, i - 1, 0]
        out, cls_cache = _dense_forward(self.params, "cls", self._layers("cls"), inp.reshape(b * n_calls, -1), False)
        calls = out.reshape(b, n_calls)
        raw = calls[:, _ar_call_index(k)]
        return raw, (emb, enc_cache, cls_cache)

    def _bwd_ar(self, cache, draw, grads):
        emb, enc_cache, cls_cache = cache
        b, k, h0 = emb.shape
        n_calls = 2 * k - 1
        dcalls = draw @ _ar_call_scatter(k)  # (b, n_calls)
        dinp = _dense_backward(self.params, "cls", cls_cache, dcalls.reshape(-1, 1), False, grads)
        dinp = dinp.reshape(b, n_calls, h0 + 4)
        demb = np.zeros_like(emb)
        demb[:, 0] += dinp[:, 0, :h0]
        dlin = np.zeros((b, k))
        for i in range(1, k):
            for v in (0, 1):
                c = 2 * i - 1 + v
                demb[:, i] += dinp[:, c, :h0]
                dlin[:, i - 1] += dinp[:, c, h0 + 3]
        grads["lin.W"] = np.einsum("bkh,bk->h", emb, dlin)[:, None]
        grads["lin.b"] = np.array([dlin.sum()])
        demb += dlin[:, :, None] * self.params["lin.W"][:, 0][None, None, :]
        self._encode_backward(enc_cache, demb, grads)


def _ar_call_index(k: int) -> np.ndarray:
    """Classifier call feeding each ar parameter: the call for (position, last prefix bit)."""
    idx = [0]
    for i in range(1, k):
        for prefix in range(2**i):
            idx.append(2 * i - 1 + (prefix & 1))
    return np.array(idx)


def _ar_call_scatter(k: int) -> np.ndarray:
    idx = _ar_call_index(k)
    scatter = np.zeros((len(idx), 2 * k - 1))
    scatter[np.arange(len(idx)), idx] = 1.0
    return scatter


def init_model(spec: MLPSpec, seed: int) -> Model:
    rng = np.random.default_rng(seed)
    hd = list(spec.hidden_dims)
    params: dict = {}
    if spec.kind == "independent":
        if spec.disentangled:
            _init_dense(rng, params, "net", [spec.block] + hd + [1])
        else:
            _init_dense(rng, params, "net", [spec.input_dim] + hd + [spec.k])
    else:
        h0 = hd[0] if hd else spec.block
        if hd:
            _init_dense(rng, params, "enc", [spec.block, h0])
        rest = hd[1:]
        if spec.kind == "joint":
            _init_dense(rng, params, "cls", [spec.k * h0] + rest + [2**spec.k])
        else:
            _init_dense(rng, params, "cls", [h0 + 4] + rest + [1])
            bound = 1.0 / math.sqrt(h0)
            params["lin.W"] = rng.uniform(-bound, bound, size=(h0, 1))
            params["lin.b"] = rng.uniform(-bound, bound, size=1)
    return Model(spec, params)


def checksum(model: Model) -> float:
    return float(sum(np.sum(v * (i + 1)) for i, v in enumerate(model.params.values())))


# ---------------------------------------------------------------------------
# Losses and optimisation
# ---------------------------------------------------------------------------


def model_loss(model: Model, x: np.ndarray, y: np.ndarray, p: Program, loss: str, with_grad: bool = True):
    """Mean loss over the batch and (optionally) parameter gradients."""
    raw, cache = model.forward(x, keep_cache=True)
    values, draw = models.batch_loss(raw, model.spec.kind, p, y, loss)
    value = float(values.mean())
    if not with_grad:
        return value, None
    return value, model.backward(cache, draw / len(values))


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for key, g in grads.items():
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            params[key] -= self.lr * (self.m[key] / bc1) / (np.sqrt(self.v[key] / bc2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "semantic"
    kind: str = "independent"
    lr: float = 1e-3
    batch: int = 64
    epochs: int = 30
    seed: int = 0
    eval_every: int = 5
    hidden_dims: tuple = (32, 32)
    disentangled: bool = True
    ece_bins: int = 10
    probe_per_concept: int = 2

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.loss not in models.LOSSES:
            raise ValueError(f"loss must be one of {models.LOSSES}")
        if self.kind not in models.KINDS:
            raise ValueError(f"kind must be one of {models.KINDS}")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["hidden_dims"] = list(self.hidden_dims)
        return doc


@dataclass
class HistoryEntry:
    epoch: int
    train_loss: float
    acc_y: float
    acc_w: float
    ece_w: float
    probe_tables: np.ndarray
    records: metrics.EvalRecords = field(repr=False)


@dataclass
class History:
    config: TrainConfig
    probe_concepts: np.ndarray
    entries: list = field(default_factory=list)

    @property
    def final(self) -> HistoryEntry:
        return self.entries[-1]


def evaluate(model: Model, data: Dataset, p: Program) -> metrics.EvalRecords:
    tables = models.table(model.forward(data.x), model.spec.kind)
    pred = np.argmax(models.label_posterior(tables, p), axis=1)
    return metrics.EvalRecords(pred, data.y, np.clip(models.bit_marginals(tables), 0.0, 1.0), data.g)


def probe_indices(data: Dataset, per_concept: int) -> np.ndarray:
    """First ``per_concept`` samples of every concept present, ordered by concept index."""
    codes = np.array([concept_to_index(g) for g in data.g])
    picks = []
    for code in np.unique(codes):
        picks.extend(np.flatnonzero(codes == code)[:per_concept])
    return np.array(picks, dtype=int)


def train(cfg: TrainConfig, train_data: Dataset, p: Program, test_data: Optional[Dataset] = None):
    """Minibatch Adam on ``cfg.loss``; returns ``(model, history)``."""
    test_data = train_data if test_data is None else test_data
    labels = np.array([p.table[concept_to_index(g)] for g in train_data.g])
    if not np.array_equal(labels, train_data.y):
        raise ValueError("dataset labels are inconsistent with the program")
    spec = MLPSpec(train_data.x.shape[1], p.k, cfg.kind, cfg.hidden_dims, cfg.disentangled)
    model = init_model(spec, cfg.seed)
    opt = Adam(cfg.lr)
    rng = np.random.default_rng([cfg.seed, 1])
    probe = probe_indices(test_data, cfg.probe_per_concept)
    history = History(cfg, test_data.g[probe])

    def record(epoch: int, train_loss: float) -> None:
        rec = evaluate(model, test_data, p)
        tables = models.table(model.forward(test_data.x[probe]), cfg.kind)
        summary = metrics.summarize(rec, cfg.ece_bins)
        history.entries.append(HistoryEntry(epoch, train_loss, summary["acc_y"], summary["acc_w"], summary["ece_w"], tables, rec))

    record(0, model_loss(model, train_data.x, train_data.y, p, cfg.loss, with_grad=False)[0])
    n = len(train_data)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch):
            idx = order[start:start + cfg.batch]
            value, grads = model_loss(model, train_data.x[idx], train_data.y[idx], p, cfg.loss)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch offset {start} "
                    f"(kind={cfg.kind}, loss={cfg.loss}, seed={cfg.seed})"
                )
            opt.step(model.params, grads)
            total += value * len(idx)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            record(epoch, total / n)
    return model, history


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def _flat_view(params: dict) -> list[tuple[str, int]]:
    return [(key, i) for key, v in params.items() for i in range(v.size)]


def grad_check(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    p: Program,
    loss: str,
    n_weights: int = 200,
    h: float = 1e-5,
    seed: int = 0,
    grad_fn: Optional[Callable] = None,
) -> float:
    """Max relative error between backprop and central differences over sampled weights.

    Relative errors use a denominator floor of ``SCALE_FLOOR``. Weights whose perturbation crosses a ReLU kink (forward and backward
    one-sided slopes disagree) are skipped; the test only looks at the loss,
    so it cannot hide a wrong analytic gradient.
    ``grad_fn(model, x, y, p, loss) -> grads`` overrides the analytic path.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y))
    if grad_fn is None:
        grads = model_loss(model, x, y, p, loss)[1]
    else:
        grads = grad_fn(model, x, y, p, loss)
    base = model_loss(model, x, y, p, loss, with_grad=False)[0]
    slots = _flat_view(model.params)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(slots), size=min(n_weights, len(slots)), replace=False)
    worst = 0.0
    for c in chosen:
        key, i = slots[c]
        arr = model.params[key].reshape(-1)
        old = arr[i]
        arr[i] = old + h
        up = model_loss(model, x, y, p, loss, with_grad=False)[0]
        arr[i] = old - h
        down = model_loss(model, x, y, p, loss, with_grad=False)[0]
        arr[i] = old
        fwd, bwd = (up - base) / h, (base - down) / h
        if abs(fwd - bwd) > max(KINK_TOL * max(abs(fwd), abs(bwd)), 1e-7):
            continue
        numeric = (up - down) / (2 * h)
        analytic = float(grads[key].reshape(-1)[i])
        scale = max(abs(numeric), abs(analytic), SCALE_FLOOR)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst
