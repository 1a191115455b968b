"""Evaluation metrics: accuracy, AUC, calibration, and trace tracking error."""

from __future__ import annotations

import numpy as np


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    return float(((scores >= threshold) == (labels > 0.5)).mean())


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    base = np.arange(1, len(values) + 1, dtype=np.float64)
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        base[i : j + 1] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    ranks[order] = base
    return ranks


def auc(scores, labels) -> float:
    """Rank-based AUC-ROC with tied scores given average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64) > 0.5
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = _average_ranks(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def brier(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    return float(np.mean((scores - labels) ** 2))


def ece(scores, labels, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width probability bins."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    bins = np.clip((scores * n_bins).astype(int), 0, n_bins - 1)
    total = len(scores)
    err = 0.0
    for b in range(n_bins):
        mask = bins == b
        count = int(mask.sum())
        if count == 0:
            continue
        gap = abs(float(scores[mask].mean()) - float(labels[mask].mean()))
        err += (count / total) * gap
    return float(err)


def mae_by_turn_index(per_turn_preds: list[np.ndarray], traces: list[np.ndarray]) -> np.ndarray:
    """Mean |prediction - true propensity| grouped by turn index."""
    max_len = max(len(p) for p in per_turn_preds)
    sums = np.zeros(max_len)
    counts = np.zeros(max_len)
    for preds, trace in zip(per_turn_preds, traces):
        errs = np.abs(np.asarray(preds) - np.asarray(trace))
        sums[: len(errs)] += errs
        counts[: len(errs)] += 1
    valid = counts > 0
    out = np.zeros(max_len)
    out[valid] = sums[valid] / counts[valid]
    return out[valid]


def tracking_mae(per_turn_preds: list[np.ndarray], traces: list[np.ndarray]) -> float:
    errs = [np.abs(np.asarray(p) - np.asarray(t)) for p, t in zip(per_turn_preds, traces)]
    return float(np.concatenate(errs).mean())


def accuracy_by_turn_index(
    per_turn_preds: list[np.ndarray], outcomes: list[bool], threshold: float = 0.5
) -> np.ndarray:
    max_len = max(len(p) for p in per_turn_preds)
    correct = np.zeros(max_len)
    counts = np.zeros(max_len)
    for preds, outcome in zip(per_turn_preds, outcomes):
        hits = (np.asarray(preds) >= threshold) == bool(outcome)
        correct[: len(hits)] += hits
        counts[: len(hits)] += 1
    valid = counts > 0
    return correct[valid] / counts[valid]
