"""Distributional and comparative statistics over logit matrices.

Covers max-logit and logit-gap distributions, gap-vs-adversarial-accuracy
curves, per-class confidence rank profiles and their divergence, error
prediction from class-mean logits, average overlap of rank lists, and
cosine-similarity neighbor queries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import substream
from .store import DatasetBundle, LogitMatrix


class StatsError(Exception):
    pass


@dataclass(frozen=True)
class DistributionSummary:
    mean: float
    std: float
    skewness: float
    histogram: tuple  # of (bin_left, bin_right, count)


@dataclass(frozen=True)
class GapAccuracyCurve:
    bins: tuple  # of (gap_low, gap_high, n_samples, adversarial_accuracy)


@dataclass(frozen=True)
class RankProfile:
    class_index: int
    sample_ids: np.ndarray
    ranks: np.ndarray


@dataclass(frozen=True)
class OverlapCurve:
    k_values: np.ndarray
    ao_at_k: np.ndarray


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax, safe against overflow."""
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=axis, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=axis, keepdims=True)


def adjusted_skewness(x: np.ndarray) -> float:
    """Adjusted Fisher-Pearson estimator g1*sqrt(n(n-1))/(n-2); 0 for constant data."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        raise StatsError(f"skewness needs at least 3 samples, got {n}")
    mu = x.mean()
    m2 = np.mean((x - mu) ** 2)
    if m2 == 0.0:
        return 0.0
    m3 = np.mean((x - mu) ** 3)
    g1 = m3 / m2**1.5
    return float(g1 * np.sqrt(n * (n - 1)) / (n - 2))


def _summarize(x: np.ndarray, bin_width: float) -> DistributionSummary:
    if bin_width <= 0:
        raise StatsError("bin_width must be positive")
    lo = np.floor(x.min() / bin_width) * bin_width
    hi = np.ceil(x.max() / bin_width) * bin_width
    if hi <= lo:
        hi = lo + bin_width
    n_bins = int(round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    hist = tuple(
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)
    )
    return DistributionSummary(
        mean=float(x.mean()),
        std=float(x.std(ddof=0)),
        skewness=adjusted_skewness(x),
        histogram=hist,
    )


def max_logit_distribution(m: LogitMatrix, bin_width: float) -> DistributionSummary:
    """Summary of the per-row maximum logit values."""
    return _summarize(m.values.max(axis=1), bin_width)


def logit_gaps(m: LogitMatrix) -> np.ndarray:
    """Per-row difference between the largest and second-largest logit."""
    part = np.partition(m.values, m.cols - 2, axis=1)
    return part[:, -1] - part[:, -2]


def gap_distribution(m: LogitMatrix, bin_width: float) -> DistributionSummary:
    return _summarize(logit_gaps(m), bin_width)


def gap_accuracy_curve(
    bundle: DatasetBundle, bin_width: float = 0.25, min_count: int = 50
) -> GapAccuracyCurve:
    """Fraction of attack-surviving samples per logit-gap bin.

    Bins with fewer than min_count samples are merged into their right
    neighbor; a trailing underpopulated bin stays merged with the last
    emitted one.
    """
    if bundle.flags is None:
        raise StatsError("gap_accuracy_curve requires robustness flags")
    if bin_width <= 0:
        raise StatsError("bin_width must be positive")
    gaps = logit_gaps(bundle.logits)
    flags = bundle.flags.flags.astype(np.float64)
    n_bins = int(np.floor(gaps.max() / bin_width)) + 1
    edges = bin_width * np.arange(n_bins + 1)
    idx = np.minimum((gaps / bin_width).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    hits = np.bincount(idx, weights=flags, minlength=n_bins)

    merged = []
    acc_n, acc_h, lo = 0, 0.0, edges[0]
    for b in range(n_bins):
        acc_n += int(counts[b])
        acc_h += float(hits[b])
        if acc_n >= min_count:
            merged.append((float(lo), float(edges[b + 1]), acc_n, acc_h / acc_n))
            acc_n, acc_h, lo = 0, 0.0, edges[b + 1]
    if acc_n > 0:
        if merged:
            plo, _, pn, pa = merged.pop()
            tot = pn + acc_n
            merged.append((plo, float(edges[-1]), tot, (pa * pn + acc_h) / tot))
        elif acc_n > 0:
            merged.append((float(lo), float(edges[-1]), acc_n, acc_h / acc_n))
    return GapAccuracyCurve(bins=tuple(merged))


def confidence_ranks(bundle: DatasetBundle, class_index: int) -> RankProfile:
    """Rank samples of a ground-truth class by predicted-class softmax confidence.

    Rank 0 is the most confident sample; ties break by ascending sample id.
    """
    labels = bundle.labels.labels
    ids = np.flatnonzero(labels == class_index)
    if ids.size == 0:
        raise StatsError(f"class {class_index} has no samples")
    probs = softmax(bundle.logits.values[ids])
    conf = probs.max(axis=1)
    # stable argsort on (-conf, id): descending confidence, ascending id on ties
    order = np.lexsort((ids, -conf))
    ranks = np.empty(ids.size, dtype=np.int64)
    ranks[order] = np.arange(ids.size)
    return RankProfile(class_index=class_index, sample_ids=ids, ranks=ranks)


def rank_divergence(a: RankProfile, b: RankProfile, threshold_fraction: float) -> float:
    """Fraction of shared samples whose two ranks differ by more than
    threshold_fraction of the maximum possible rank difference."""
    if not (0.0 < threshold_fraction <= 1.0):
        raise StatsError("threshold_fraction must be in (0, 1]")
    if a.sample_ids.shape != b.sample_ids.shape or not np.array_equal(
        a.sample_ids, b.sample_ids
    ):
        raise StatsError("rank profiles cover different sample sets")
    n = a.sample_ids.size
    if n == 1:
        return 0.0
    diff = np.abs(a.ranks - b.ranks)
    return float(np.mean(diff > threshold_fraction * (n - 1)))


def error_prediction_profile(bundle: DatasetBundle) -> np.ndarray:
    """Histogram over k of how often a misclassified sample's predicted class
    sits at rank k within its true class's correct-sample mean logit vector.

    Rank 1 is the true class itself and collects no mass. Returns an all-zero
    profile (with a warning) when there are no errors.
    """
    logits = bundle.logits.values
    labels = bundle.labels.labels
    n, n_classes = logits.shape
    preds = np.argmax(logits, axis=1)
    correct = preds == labels

    mean_vectors = np.empty((n_classes, n_classes))
    for c in range(n_classes):
        mask = correct & (labels == c)
        if (labels == c).any() and not mask.any():
            raise StatsError(f"class {c} has no correctly predicted samples")
        if mask.any():
            mean_vectors[c] = logits[mask].mean(axis=0)
        else:
            mean_vectors[c] = np.nan

    profile = np.zeros(n_classes)
    wrong = np.flatnonzero(~correct)
    if wrong.size == 0:
        warnings.warn("no incorrect predictions; error profile is all zeros")
        return profile
    for i in wrong:
        c = labels[i]
        mv = mean_vectors[c]
        if np.isnan(mv).any():
            raise StatsError(f"class {c} has no correctly predicted samples")
        # rank classes by descending mean logit, ties by ascending class index
        order = np.lexsort((np.arange(n_classes), -mv))
        k = int(np.flatnonzero(order == preds[i])[0])  # 0-based rank
        profile[k] += 1.0
    return profile / wrong.size


def _rank_lists(m: np.ndarray) -> np.ndarray:
    """Per-row class indices sorted by descending value, ties by ascending index."""
    n, c = m.shape
    cols = np.broadcast_to(np.arange(c), (n, c))
    return np.lexsort((cols, -m), axis=1)


def average_overlap(m1: LogitMatrix, m2: LogitMatrix, k_max: int) -> OverlapCurve:
    """AO@k between the two matrices' per-row class rankings, sample-averaged."""
    if m1.values.shape != m2.values.shape:
        raise StatsError("matrices must have the same shape")
    if not (1 <= k_max <= m1.cols):
        raise StatsError("k_max must be in [1, N_classes]")
    r1 = _rank_lists(m1.values)
    r2 = _rank_lists(m2.values)
    n, c = r1.shape
    # membership[i, cls] = 1 + rank position of cls (0 = not yet seen)
    ao = np.zeros(k_max)
    pos1 = np.empty_like(r1)
    pos2 = np.empty_like(r2)
    rows = np.arange(n)[:, None]
    pos1[rows, r1] = np.arange(c)
    pos2[rows, r2] = np.arange(c)
    # overlap at depth i: count of classes with pos1 < i and pos2 < i
    o_running = np.zeros(n)
    ao_sum = np.zeros(n)
    for i in range(1, k_max + 1):
        in_both = (pos1 < i) & (pos2 < i)
        o_running = in_both.sum(axis=1) / i
        ao_sum += o_running
        ao[i - 1] = np.mean(ao_sum / i)
    return OverlapCurve(k_values=np.arange(1, k_max + 1), ao_at_k=ao)


def within_class_permuted_overlap(
    bundle1: DatasetBundle, bundle2: DatasetBundle, k_max: int, seed: int
) -> OverlapCurve:
    """AO@k after permuting bundle2's samples uniformly within each class."""
    l1 = bundle1.labels.labels
    l2 = bundle2.labels.labels
    if not np.array_equal(l1, l2):
        raise StatsError("bundles must share labels")
    perm = np.arange(l1.size)
    for c in np.unique(l1):
        ids = np.flatnonzero(l1 == c)
        rng = substream(seed, int(c))
        perm[ids] = ids[rng.permutation(ids.size)]
    permuted = LogitMatrix(bundle2.logits.values[perm])
    return average_overlap(bundle1.logits, permuted, k_max)


def cosine_neighbors(m: LogitMatrix, seed_row: int, n: int) -> list[tuple[int, float]]:
    """The n rows most cosine-similar to the seed row, descending, ties by index."""
    if not (0 <= seed_row < m.rows):
        raise StatsError(f"seed_row {seed_row} out of range")
    v = m.values[seed_row]
    nv = np.linalg.norm(v)
    if nv == 0:
        raise StatsError("seed row has zero norm")
    norms = np.linalg.norm(m.values, axis=1)
    if (norms == 0).any():
        raise StatsError(f"row {int(np.argmax(norms == 0))} has zero norm")
    sims = m.values @ v / (norms * nv)
    order = np.lexsort((np.arange(m.rows), -sims))
    order = order[order != seed_row][:n]
    return [(int(i), float(sims[i])) for i in order]
