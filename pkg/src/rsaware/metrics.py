"""Label accuracy, concept accuracy and expected calibration error.

Concept metrics are micro-averaged: the per-bit predictions of every
position are concatenated into one binary classification stream. A bit is
predicted as 1 only when ``P(c_i = 1) > 0.5``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

ECE_KEYS = ("confidence", "positive_prob")


@dataclass
class EvalRecords:
    pred_label: np.ndarray  # (n,)
    true_label: np.ndarray  # (n,)
    bit_probs: np.ndarray  # (n, k), P(c_i = 1)
    true_bits: np.ndarray  # (n, k)

    def __post_init__(self):
        self.pred_label = np.asarray(self.pred_label, dtype=int)
        self.true_label = np.asarray(self.true_label, dtype=int)
        self.bit_probs = np.atleast_2d(np.asarray(self.bit_probs, dtype=float))
        self.true_bits = np.atleast_2d(np.asarray(self.true_bits, dtype=int))
        if self.bit_probs.shape != self.true_bits.shape:
            raise ValueError("bit_probs and true_bits shapes differ")
        if np.any((self.bit_probs < 0) | (self.bit_probs > 1)):
            raise ValueError("bit probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.true_label)


def _require(records: EvalRecords) -> None:
    if len(records) == 0:
        raise ValueError("no records")


def accuracy_label(records: EvalRecords) -> float:
    _require(records)
    return 100.0 * float(np.mean(records.pred_label == records.true_label))


def predicted_bits(probs: np.ndarray) -> np.ndarray:
    return (np.asarray(probs) > 0.5).astype(int)


def accuracy_concept(records: EvalRecords) -> float:
    _require(records)
    hits = predicted_bits(records.bit_probs) == records.true_bits
    return 100.0 * float(np.mean(hits))


def bin_index(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Bins ``(i/K, (i+1)/K]``; exact boundaries fall to the lower bin, 0 goes to bin 0."""
    idx = np.ceil(np.asarray(values) * n_bins).astype(int) - 1
    return np.clip(idx, 0, n_bins - 1)


def ece(records: EvalRecords, n_bins: int = 10, key: str = "confidence") -> float:
    """Expected calibration error in percent over the concatenated bit stream.

    ``confidence`` bins by the predicted bit's probability ``max(p, 1-p)``
    and compares with accuracy. ``positive_prob`` bins by ``p`` and compares
    with the frequency of true 1s (the reliability-diagram view).
    """
    if n_bins < 1:
        raise ValueError("need at least one bin")
    probs = records.bit_probs.ravel()
    truth = records.true_bits.ravel()
    if probs.size == 0:
        return 0.0
    if key == "confidence":
        score = np.maximum(probs, 1.0 - probs)
        outcome = (predicted_bits(probs) == truth).astype(float)
    elif key == "positive_prob":
        score = probs
        outcome = truth.astype(float)
    else:
        raise ValueError(f"key must be one of {ECE_KEYS}")
    idx = bin_index(score, n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    occupied = counts > 0
    acc = np.bincount(idx, weights=outcome, minlength=n_bins)[occupied] / counts[occupied]
    conf = np.bincount(idx, weights=score, minlength=n_bins)[occupied] / counts[occupied]
    return 100.0 * float(np.sum(counts[occupied] / probs.size * np.abs(acc - conf)))


def summarize(records: EvalRecords, n_bins: int = 10, key: str = "confidence") -> dict:
    return {
        "acc_y": accuracy_label(records),
        "acc_w": accuracy_concept(records),
        "ece_w": ece(records, n_bins, key),
    }


def save_records(records: EvalRecords, path: Union[str, Path]) -> None:
    k = records.bit_probs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pred_y", "true_y"] + [f"p_c{i + 1}" for i in range(k)] + [f"true_c{i + 1}" for i in range(k)]
        )
        for row in zip(records.pred_label, records.true_label, records.bit_probs, records.true_bits):
            writer.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2]] + [int(v) for v in row[3]])


def load_records(path: Union[str, Path]) -> EvalRecords:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(r) for r in reader]
    k = sum(h.startswith("p_c") for h in header)
    arr = np.array(rows, dtype=float).reshape(len(rows), 2 + 2 * k)
    return EvalRecords(arr[:, 0], arr[:, 1], arr[:, 2:2 + k], arr[:, 2 + k:])
