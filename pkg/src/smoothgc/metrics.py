"""Clustering evaluation: accuracy under optimal matching, NMI, macro F1.

Predicted cluster ids and ground-truth class ids are matched by an optimal
injective assignment on the confusion matrix (Hungarian algorithm); the same
alignment backs both accuracy and the macro F1 protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class LabelAlignment:
    """Optimal injective map from predicted cluster ids to true class ids."""

    mapping: dict[int, int]
    confusion: np.ndarray   # (r_pred, r_true) counts


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    if pred.size == 0:
        raise ValueError("empty label sequences")
    return pred, truth


def _confusion(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    rp, rt = int(pred.max()) + 1, int(truth.max()) + 1
    c = np.zeros((rp, rt), dtype=np.int64)
    np.add.at(c, (pred, truth), 1)
    return c


def align_labels(pred, truth) -> LabelAlignment:
    """Hungarian matching on the (zero-padded, square) confusion matrix."""
    pred, truth = _check_pair(pred, truth)
    conf = _confusion(pred, truth)
    rp, rt = conf.shape
    size = max(rp, rt)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:rp, :rt] = conf
    rows, cols = linear_sum_assignment(-padded)
    mapping = {int(p): int(t) for p, t in zip(rows, cols) if p < rp and t < rt}
    return LabelAlignment(mapping=mapping, confusion=conf)


def clustering_accuracy(pred, truth) -> float:
    """Fraction matched under the best injective cluster-to-class relabeling."""
    pred, truth = _check_pair(pred, truth)
    al = align_labels(pred, truth)
    matched = sum(int(al.confusion[p, t]) for p, t in al.mapping.items())
    return matched / pred.size


def nmi(pred, truth, normalization: str = "geometric") -> float:
    """Mutual information normalized by the mean of the two entropies.

    Natural logarithms; empty contingency cells contribute zero.  The default
    geometric-mean normalization can be swapped for the arithmetic mean.
    """
    pred, truth = _check_pair(pred, truth)
    conf = _confusion(pred, truth).astype(np.float64)
    n = conf.sum()
    pij = conf / n
    pi = pij.sum(axis=1)
    pj = pij.sum(axis=0)
    nz = pij > 0
    outer = pi[:, None] * pj[None, :]
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    hi = float(-(pi[pi > 0] * np.log(pi[pi > 0])).sum())
    hj = float(-(pj[pj > 0] * np.log(pj[pj > 0])).sum())
    if normalization == "geometric":
        denom = np.sqrt(hi * hj)
    elif normalization == "arithmetic":
        denom = 0.5 * (hi + hj)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if denom == 0.0:
        # Both partitions constant -> identical up to relabeling; one constant
        # side against a varied one carries no information.
        return 1.0 if hi == hj else 0.0
    return float(min(max(mi / denom, 0.0), 1.0))


def macro_f1(pred, truth) -> float:
    """Per-class F1 under the shared optimal alignment, averaged over true classes."""
    pred, truth = _check_pair(pred, truth)
    al = align_labels(pred, truth)
    conf = al.confusion
    inverse = {t: p for p, t in al.mapping.items()}
    scores = []
    for t in range(conf.shape[1]):
        p = inverse.get(t)
        if p is None:
            scores.append(0.0)
            continue
        tp = conf[p, t]
        fp = conf[p, :].sum() - tp
        fn = conf[:, t].sum() - tp
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0)
    return float(np.mean(scores))


def evaluate(pred, truth) -> dict[str, float]:
    """All three metrics in one call."""
    return {
        "acc": clustering_accuracy(pred, truth),
        "nmi": nmi(pred, truth),
        "f1": macro_f1(pred, truth),
    }
