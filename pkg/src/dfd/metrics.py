"""Evaluation metrics, bias probing, and 2-D embedding projection.

auc_roc and auc_prc are written to agree exactly with brute-force pair
counting / rank enumeration, including ties, so they can be oracle-checked.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import torch

from .seeding import numpy_rng, torch_generator


class MetricError(ValueError):
    pass


def _check_binary(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise MetricError("labels must be binary 0/1")
    return labels.astype(np.int64)


def auc_roc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Ties credit 0.5; equals the normalized Mann-Whitney U statistic. Computed
    from average ranks, which matches all-pairs counting exactly because both
    numerators are sums of halves below 2**53.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(f"shape mismatch: scores {scores.shape}, labels {labels.shape}")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auc_roc needs both classes present")

    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # ranks are 1-based; tied group shares the average rank
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1

    rank_sum_pos = ranks[labels == 1].sum()
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_prc(scores, labels) -> float:
    """Average precision: mean of precision-at-rank over the positives.

    Descending-score order with ties broken by ascending original index
    (stable sort), so the value is deterministic on tied inputs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(f"shape mismatch: scores {scores.shape}, labels {labels.shape}")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricError("auc_prc needs at least one positive")

    order = np.argsort(-scores, kind="mergesort")
    hits = labels[order]
    tp = np.cumsum(hits)
    precision_at_rank = tp / np.arange(1, labels.size + 1)
    return float(precision_at_rank[hits == 1].sum() / n_pos)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise MetricError(f"shape mismatch: preds {preds.shape}, labels {labels.shape}")
    if preds.size == 0:
        raise MetricError("accuracy of empty input is undefined")
    return float(np.mean(preds == labels))


def bias_probe(embeddings, attr, seed: int, train_frac: float = 0.7) -> float:
    """Held-out accuracy of a multinomial linear probe predicting attr from
    frozen embeddings.

    A 70/30 split with a fixed-seed shuffle keeps the probe honest
    (in-sample accuracy would overstate separability). Deterministic given
    the seed.
    """
    h = np.asarray(embeddings, dtype=np.float64)
    if attr is None:
        raise MetricError("no bias attribute available for probing")
    attr = np.asarray(attr, dtype=np.int64)
    if h.ndim != 2 or h.shape[0] != attr.shape[0]:
        raise MetricError(f"shape mismatch: embeddings {h.shape}, attr {attr.shape}")
    n = h.shape[0]
    if n < 10:
        raise MetricError("need at least 10 rows to probe")
    num_classes = int(attr.max()) + 1

    perm = numpy_rng(seed, "probe/split").permutation(n)
    n_train = max(1, int(round(train_frac * n)))
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    # standardize on the probe-train statistics only
    mean = h[train_idx].mean(axis=0)
    std = h[train_idx].std(axis=0)
    std[std < 1e-12] = 1.0
    hs = (h - mean) / std

    x_train = torch.from_numpy(hs[train_idx])
    y_train = torch.from_numpy(attr[train_idx])
    x_test = torch.from_numpy(hs[test_idx])

    gen = torch_generator(seed, "probe/init")
    weight = torch.zeros(h.shape[1], num_classes, dtype=torch.float64, requires_grad=True)
    with torch.no_grad():
        weight.uniform_(-0.01, 0.01, generator=gen)
    bias = torch.zeros(num_classes, dtype=torch.float64, requires_grad=True)

    opt = torch.optim.LBFGS([weight, bias], max_iter=200, line_search_fn="strong_wolfe")

    def closure():
        opt.zero_grad()
        logits = x_train @ weight + bias
        loss = torch.nn.functional.cross_entropy(logits, y_train)
        loss = loss + 1e-3 * (weight * weight).sum()
        loss.backward()
        return loss

    opt.step(closure)

    with torch.no_grad():
        logits = (x_test @ weight + bias).numpy()
    preds = np.argmax(logits, axis=1)
    return accuracy(preds, attr[test_idx])


def project_2d(embeddings) -> Tuple[np.ndarray, bool]:
    """Project rows onto the top-2 principal components.

    Sign convention: each component's largest-magnitude entry is made
    positive, so the output is deterministic. Components whose singular value
    is negligible relative to the largest are zeroed out (rank-deficient or
    zero-variance input), and the degenerate flag is set.

    Returns (coords of shape (N, 2), degenerate flag).
    """
    h = np.asarray(embeddings, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise MetricError("project_2d needs a 2-D array with at least 2 rows")
    centered = h - h.mean(axis=0)
    n_comp = min(2, h.shape[1])
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    components = np.zeros((2, h.shape[1]))
    degenerate = False
    smax = svals[0] if svals.size else 0.0
    for c in range(2):
        if c >= n_comp or smax == 0.0 or svals[c] <= 1e-12 * smax:
            degenerate = True
            continue
        v = vt[c]
        pivot = int(np.argmax(np.abs(v)))
        components[c] = v if v[pivot] >= 0 else -v
    coords = centered @ components.T
    return coords, degenerate


def prediction_scores(probs: np.ndarray, positive_class: int = 1) -> np.ndarray:
    """Per-patient score of the positive class, used for binary ranking metrics."""
    return np.asarray(probs, dtype=np.float64)[:, positive_class]


def split_metrics(probs: np.ndarray, labels: np.ndarray, num_classes: int) -> dict:
    """Accuracy always; ranking metrics for the binary positive-class case."""
    preds = np.argmax(probs, axis=1)
    out = {
        "accuracy": accuracy(preds, labels),
        "per_class_counts": [int(c) for c in np.bincount(labels, minlength=num_classes)],
    }
    if num_classes == 2:
        scores = prediction_scores(probs)
        out["auc_roc"] = auc_roc(scores, labels)
        out["auc_prc"] = auc_prc(scores, labels)
    else:
        out["auc_roc"] = None
        out["auc_prc"] = None
    return out
