"""Similarity distributions of true and false positive/negative pairs."""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy.special import rel_entr

from .errors import ConfigError, EmptyDistribution, LengthMismatch, MissingLatentLabels
from .numerics import sim_matrix

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50


class PairCategory(str, Enum):
    TRUE_POS = "true_pos"
    TRUE_NEG = "true_neg"
    FALSE_POS = "false_pos"
    FALSE_NEG = "false_neg"


CATEGORIES = tuple(PairCategory)

# category pairs whose divergence is reported
COMPARISONS = (
    (PairCategory.TRUE_POS, PairCategory.TRUE_NEG),
    (PairCategory.TRUE_POS, PairCategory.FALSE_POS),
    (PairCategory.TRUE_NEG, PairCategory.FALSE_POS),
)


class OverlapMode(str, Enum):
    POOLED = "pooled"
    PER_CLASS = "per_class"


@dataclass
class CategorizedPairs:
    """Unordered pairs ``(first[k], second[k])`` with their category codes.

    ``codes`` index into :data:`CATEGORIES`.
    """

    first: np.ndarray
    second: np.ndarray
    codes: np.ndarray

    def __len__(self):
        return self.codes.size

    def category(self, k):
        return CATEGORIES[self.codes[k]]

    def count(self, category):
        return int(np.count_nonzero(self.codes == CATEGORIES.index(PairCategory(category))))

    def counts(self):
        return {c.value: self.count(c) for c in CATEGORIES}


@dataclass
class PairHistograms:
    bin_edges: np.ndarray
    counts: dict = field(default_factory=dict)

    @property
    def bins(self):
        return self.bin_edges.size - 1

    def total(self):
        return int(sum(int(c.sum()) for c in self.counts.values()))

    def distribution(self, category):
        """Normalized histogram, or ``None`` when the category has no pairs."""
        counts = self.counts[PairCategory(category)]
        total = counts.sum()
        return None if total == 0 else counts / total

    def to_frame(self):
        """One row per bin per category."""
        rows = []
        for category in CATEGORIES:
            for b, count in enumerate(self.counts[category]):
                rows.append(
                    {
                        "category": category.value,
                        "bin": b,
                        "left": float(self.bin_edges[b]),
                        "right": float(self.bin_edges[b + 1]),
                        "count": int(count),
                    }
                )
        return pd.DataFrame(rows, columns=["category", "bin", "left", "right", "count"])


def categorize_pairs(batch):
    """Assign every unordered pair ``i < j`` to its agreement category."""
    if not batch.has_latent:
        raise MissingLatentLabels("pair categories need latent labels")
    first, second = np.triu_indices(batch.n, k=1)
    same_assigned = batch.assigned[first] == batch.assigned[second]
    same_latent = batch.latent[first] == batch.latent[second]
    codes = np.select(
        [
            same_assigned & same_latent,
            ~same_assigned & ~same_latent,
            same_assigned & ~same_latent,
        ],
        [
            CATEGORIES.index(PairCategory.TRUE_POS),
            CATEGORIES.index(PairCategory.TRUE_NEG),
            CATEGORIES.index(PairCategory.FALSE_POS),
        ],
        default=CATEGORIES.index(PairCategory.FALSE_NEG),
    )
    return CategorizedPairs(first, second, codes)


def bin_edges(temperature, bins=DEFAULT_BINS):
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    limit = 1.0 / temperature
    return np.linspace(-limit, limit, bins + 1)


def _histograms(sims, pairs, mask, edges):
    values = np.clip(sims[pairs.first[mask], pairs.second[mask]], edges[0], edges[-1])
    codes = pairs.codes[mask]
    return PairHistograms(
        edges,
        {
            category: np.histogram(values[codes == k], bins=edges)[0].astype(np.int64)
            for k, category in enumerate(CATEGORIES)
        },
    )


def pair_similarity_histograms(batch, bins=DEFAULT_BINS):
    """Histogram of scaled similarities per pair category over ``[-1/T, 1/T]``."""
    if batch.n < 2:
        raise ConfigError("need at least two rows to form a pair")
    pairs = categorize_pairs(batch)
    sims = sim_matrix(batch.embeddings, batch.embeddings)
    edges = bin_edges(batch.temperature, bins)
    return _histograms(sims, pairs, np.ones(len(pairs), dtype=bool), edges)


def jsd(p, q):
    """Jensen-Shannon divergence in bits, in [0, 1]. Inputs are normalized first."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.size != q.size:
        raise LengthMismatch(f"distributions of length {p.size} and {q.size}")
    if p.size == 0 or p.sum() <= 0 or q.sum() <= 0:
        raise EmptyDistribution("distribution has no mass")
    if np.any(p < 0) or np.any(q < 0):
        raise ConfigError("distribution entries must be non-negative")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)
    value = 0.5 * np.sum(rel_entr(p, m)) + 0.5 * np.sum(rel_entr(q, m))
    return float(np.clip(value / np.log(2.0), 0.0, 1.0))


def comparison_key(a, b):
    return f"{a.value}~{b.value}"


def _divergences(histograms):
    table = {}
    for a, b in COMPARISONS:
        p, q = histograms.distribution(a), histograms.distribution(b)
        table[comparison_key(a, b)] = None if p is None or q is None else jsd(p, q)
    return table


@dataclass
class OverlapReport:
    mode: OverlapMode
    histograms: PairHistograms
    divergences: dict
    classes_used: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "pairs": self.histograms.total(),
            "category_counts": {
                c.value: int(self.histograms.counts[c].sum()) for c in CATEGORIES
            },
            "jsd": self.divergences,
            "classes_used": self.classes_used,
        }


def _per_class_divergences(batch, sims, pairs, edges):
    """Average JSD over assigned classes; a pair belongs to each endpoint's class."""
    sums = {key: [] for key in (comparison_key(a, b) for a, b in COMPARISONS)}
    first_cls = batch.assigned[pairs.first]
    second_cls = batch.assigned[pairs.second]
    for cls in np.unique(batch.assigned):
        mask = (first_cls == cls) | (second_cls == cls)
        per_class = _divergences(_histograms(sims, pairs, mask, edges))
        for key, value in per_class.items():
            if value is not None:
                sums[key].append(value)
    averaged = {key: (float(np.mean(v)) if v else None) for key, v in sums.items()}
    used = {key: len(v) for key, v in sums.items()}
    return averaged, used


def overlap_report(batch, bins=DEFAULT_BINS, mode=OverlapMode.POOLED):
    """JSD between category similarity distributions.

    A comparison whose categories are empty is reported as ``None`` rather
    than zero.
    """
    mode = OverlapMode(mode)
    if batch.n < 2:
        raise ConfigError("need at least two rows to form a pair")
    pairs = categorize_pairs(batch)
    sims = sim_matrix(batch.embeddings, batch.embeddings)
    edges = bin_edges(batch.temperature, bins)
    histograms = _histograms(sims, pairs, np.ones(len(pairs), dtype=bool), edges)
    if mode is OverlapMode.POOLED:
        divergences, used = _divergences(histograms), {}
    else:
        divergences, used = _per_class_divergences(batch, sims, pairs, edges)
    logger.info("overlap (%s): %s", mode.value, divergences)
    return OverlapReport(mode, histograms, divergences, used)
