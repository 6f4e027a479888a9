"""Concept-distribution parameterizations and the two training losses.

Raw parameters are unconstrained reals, one row per example:

* ``independent``: ``k`` pre-sigmoid logits, one per bit.
* ``joint``: ``2**k`` softmax logits, big-endian concept order.
* ``ar``: ``2**k - 1`` pre-sigmoid conditional logits. Position ``i`` (0-based)
  owns ``2**i`` consecutive entries, one per prefix ``c_1..c_i`` in
  big-endian order, giving ``P(c_{i+1} = 1 | prefix)``.

Losses are brute-force sums over the consistent set and return per-example
values together with gradients with respect to the raw parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .logic import Program, all_concepts
from .shortcuts import Distribution

KINDS = ("independent", "joint", "ar")
LOSSES = ("semantic", "uniform_kl")
EPS = 1e-7


class ZeroProbabilityError(ArithmeticError):
    """A consistent concept or label has probability exactly zero."""


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def n_params(kind: str, k: int) -> int:
    if kind == "independent":
        return k
    if kind == "joint":
        return 2**k
    if kind == "ar":
        return 2**k - 1
    raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")


class _Layout:
    """Cached bit matrices for arity ``k``."""

    _cache: dict = {}

    def __new__(cls, k: int):
        if k not in cls._cache:
            obj = super().__new__(cls)
            obj.bits = np.array(all_concepts(k), dtype=float)  # (2^k, k)
            n = 2**k
            # ar_index[w, i]: column of the conditional used by concept w at position i
            idx = np.empty((n, k), dtype=int)
            for w in range(n):
                for i in range(k):
                    prefix = w >> (k - i)
                    idx[w, i] = (2**i - 1) + prefix
            obj.ar_index = idx
            scatter = np.zeros((k, n, n - 1))
            for i in range(k):
                scatter[i, np.arange(n), idx[:, i]] = 1.0
            obj.ar_scatter = scatter
            cls._cache[k] = obj
        return cls._cache[k]


def _as_batch(raw) -> tuple[np.ndarray, bool]:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        return raw[None, :], True
    return raw, False


def infer_k(kind: str, n: int) -> int:
    if kind == "independent":
        return n
    k = int(round(np.log2(n + (1 if kind == "ar" else 0))))
    if n_params(kind, k) != n:
        raise ValueError(f"{n} raw parameters do not fit kind {kind!r}")
    return k


def _clamped_sigmoid(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = sigmoid(z)
    active = (s < EPS) | (s > 1 - EPS)
    return np.clip(s, EPS, 1 - EPS), active


def table(raw, kind: str) -> np.ndarray:
    """Explicit ``(B, 2**k)`` probability tables (a single row for 1-d input)."""
    batch, single = _as_batch(raw)
    t, _ = _table_and_aux(batch, kind)
    return t[0] if single else t


def _table_and_aux(raw: np.ndarray, kind: str):
    k = infer_k(kind, raw.shape[1])
    lay = _Layout(k)
    if kind == "joint":
        z = raw - raw.max(axis=1, keepdims=True)
        e = np.exp(z)
        t = e / e.sum(axis=1, keepdims=True)
        return t, None
    if kind == "independent":
        mu, active = _clamped_sigmoid(raw)
        # (B, 1, k) against (2^k, k)
        per_bit = np.where(lay.bits[None], mu[:, None, :], 1.0 - mu[:, None, :])
        return per_bit.prod(axis=2), (mu, active)
    if kind == "ar":
        mu = sigmoid(raw)
        active = np.zeros(mu.shape, dtype=bool)
        cond = mu[:, lay.ar_index]  # (B, 2^k, k)
        per_bit = np.where(lay.bits[None], cond, 1.0 - cond)
        return per_bit.prod(axis=2), (mu, active)
    raise ValueError(f"unknown kind {kind!r}")


def joint_table(raw, kind: str) -> Distribution:
    """Single-example table wrapped as a float :class:`Distribution`."""
    t = table(np.asarray(raw, dtype=float), kind)
    return Distribution(int(np.log2(t.size)), t.tolist())


def _chain_to_raw(kind: str, t: np.ndarray, aux, g_table: np.ndarray) -> np.ndarray:
    """Back-propagate ``dL/dtable`` to the raw parameters."""
    if kind == "joint":
        gp = g_table * t
        return gp - t * gp.sum(axis=1, keepdims=True)
    mu, active = aux
    k = mu.shape[1] if kind == "independent" else int(np.log2(t.shape[1]))
    lay = _Layout(k)
    gp = g_table * t  # (B, 2^k)
    if kind == "independent":
        # dL/dz_i = sum_w g_w p_w (c_wi - mu_i)
        grad = gp @ lay.bits - gp.sum(axis=1, keepdims=True) * mu
    else:
        cond = mu[:, lay.ar_index]
        contrib = gp[:, :, None] * (lay.bits[None] - cond)  # (B, 2^k, k)
        grad = np.einsum("bwi,iwp->bp", contrib, lay.ar_scatter)
    grad[active] = 0.0
    return grad


def _masks(p: Program, ys: np.ndarray) -> np.ndarray:
    table_arr = np.asarray(p.table)
    return (table_arr[None, :] == np.asarray(ys)[:, None]).astype(float)


def batch_loss(raw, kind: str, p: Program, ys, loss: str, clamp: bool = True):
    """Per-example losses ``(B,)`` and raw-parameter gradients ``(B, P)``.

    With ``clamp`` the probabilities entering logs are floored at ``EPS``;
    without it a zero probability raises :class:`ZeroProbabilityError`.
    """
    raw, _ = _as_batch(raw)
    t, aux = _table_and_aux(raw, kind)
    mask = _masks(p, ys)
    n_consistent = mask.sum(axis=1)
    floor = EPS if clamp else 0.0
    if np.any(n_consistent == 0):
        raise ValueError("some label has an empty consistent set")
    if loss == "semantic":
        py = (t * mask).sum(axis=1)
        if not clamp and np.any(py == 0):
            raise ZeroProbabilityError("label has zero probability; gradient undefined")
        py_c = np.maximum(py, floor)
        values = -np.log(py_c)
        g_table = -mask / py_c[:, None]
        g_table[py < floor] = 0.0
    elif loss == "uniform_kl":
        if not clamp and np.any((t == 0) & (mask > 0)):
            raise ZeroProbabilityError("consistent concept has zero probability; gradient undefined")
        t_c = np.where(mask > 0, np.maximum(t, floor), 1.0)
        n = n_consistent[:, None]
        values = -(mask * np.log(n * t_c)).sum(axis=1) / n_consistent
        g_table = np.where(t >= floor, -mask / (n * t_c), 0.0)
    else:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    return values, _chain_to_raw(kind, t, aux, g_table)


@dataclass
class LossValue:
    value: float
    grad: Optional[np.ndarray] = field(default=None)


def semantic_nll(raw, kind: str, p: Program, y: int) -> LossValue:
    values, grads = batch_loss(np.asarray(raw, dtype=float)[None], kind, p, [y], "semantic", clamp=False)
    return LossValue(float(values[0]), grads[0])


def uniform_kl(raw, kind: str, p: Program, y: int) -> LossValue:
    values, grads = batch_loss(np.asarray(raw, dtype=float)[None], kind, p, [y], "uniform_kl", clamp=False)
    return LossValue(float(values[0]), grads[0])


def label_posterior(d, p: Program) -> np.ndarray:
    """``P(y)`` for each label; accepts a Distribution or ``(B, 2**k)`` tables."""
    probs = np.asarray(d.probs if isinstance(d, Distribution) else d, dtype=float)
    onehot = np.zeros((len(p.table), p.label_count))
    onehot[np.arange(len(p.table)), p.table] = 1.0
    return probs @ onehot


def predict(d, p: Program):
    """(label, concept index) argmaxes; ``np.argmax`` breaks ties toward the lowest index."""
    probs = np.asarray(d.probs if isinstance(d, Distribution) else d, dtype=float)
    labels = np.argmax(label_posterior(probs, p), axis=-1)
    concepts = np.argmax(probs, axis=-1)
    if probs.ndim == 1:
        return int(labels), all_concepts(p.k)[int(concepts)]
    return labels, concepts


def bit_marginals(t: np.ndarray) -> np.ndarray:
    """``P(c_i = 1)`` per row of a ``(B, 2**k)`` table."""
    k = int(np.log2(t.shape[-1]))
    return t @ _Layout(k).bits


def params_for_table(target, kind: str) -> np.ndarray:
    """Raw parameters reproducing ``target`` (joint and ar are universal)."""
    t = np.asarray(target, dtype=float)
    k = int(np.log2(t.size))
    if kind == "joint":
        with np.errstate(divide="ignore"):
            return np.log(t)
    if kind == "ar":
        raw = np.empty(2**k - 1)
        for i in range(k):
            for prefix in range(2**i):
                block = t.reshape(2**i, 2, -1)[prefix]  # next bit 0 / 1
                mass = block.sum()
                cond = block[1].sum() / mass if mass > 0 else 0.5
                with np.errstate(divide="ignore"):
                    raw[(2**i - 1) + prefix] = logit(cond)
        return raw
    raise ValueError("only joint and ar parameterizations are universal")
