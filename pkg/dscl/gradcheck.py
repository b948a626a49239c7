"""Finite-difference verification of the analytic loss gradients.

The loss is differentiated as a function of the raw rows composed with row
normalization, ``L(normalize(V))``. At unit rows its gradient equals the
tangent-projected analytic gradient, so the two can be compared directly.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .losses import LossConfig, Variant, evaluate
from .numerics import EmbeddingBatch, LabeledBatch, SeededRng

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-5
# finite differences are not meaningful next to the max(floor, .) kink
MIN_CLAMP_MARGIN = 0.02
MAX_REDRAWS = 50


@dataclass
class GradCheckResult:
    variant: str
    n: int
    dim: int
    seed: int
    max_relative_error: float
    tolerance: float
    redraws: int = 0

    @property
    def passed(self):
        return self.max_relative_error < self.tolerance

    def to_dict(self):
        record = asdict(self)
        record["passed"] = self.passed
        return record


def relative_error(analytic, numeric):
    """``max |a - f|`` scaled by the larger of the two max-norms."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def finite_difference_gradient(batch, cfg, step=DEFAULT_STEP, anchors=None):
    """Central differences of ``L(normalize(V))`` with respect to every entry of V."""
    base = batch.vectors
    grad = np.zeros_like(base)
    for i in range(base.shape[0]):
        for j in range(base.shape[1]):
            shifted = base.copy()
            shifted[i, j] = base[i, j] + step
            f_plus = evaluate(batch.with_vectors(shifted), cfg, anchors).value
            shifted[i, j] = base[i, j] - step
            f_minus = evaluate(batch.with_vectors(shifted), cfg, anchors).value
            grad[i, j] = (f_plus - f_minus) / (2 * step)
    return grad


def check_gradient(batch, cfg, step=DEFAULT_STEP, anchors=None):
    """Relative error between the projected analytic and the numeric gradient."""
    analytic = evaluate(batch, cfg, anchors).projected_gradient
    numeric = finite_difference_gradient(batch, cfg, step, anchors)
    return relative_error(analytic, numeric)


def random_batch(n, dim, rng, temperature=1.0, num_classes=2):
    """Random unit rows with balanced labels, so every row has a positive and a negative."""
    gen = rng.generator
    vectors = gen.standard_normal((n, dim))
    labels = gen.permutation(np.arange(n) % num_classes)
    return LabeledBatch(EmbeddingBatch.from_raw(vectors, temperature), labels)


def _smooth_batch(n, dim, seed, cfg):
    """Draw a batch whose debiased terms all sit clear of the clamp floor."""
    for redraw in range(MAX_REDRAWS):
        rng = SeededRng(seed, stream=redraw)
        batch = random_batch(n, dim, rng, cfg.temperature)
        margin = evaluate(batch, cfg).diagnostics.min_clamp_margin
        if margin >= MIN_CLAMP_MARGIN:
            return batch, redraw
        logger.debug("seed %d redraw %d: clamp margin %.3g", seed, redraw, margin)
    return batch, MAX_REDRAWS


def gradcheck_grid(
    base=None,
    variants=tuple(Variant),
    sizes=(4, 8),
    dims=(3, 8),
    seeds=range(10),
    step=DEFAULT_STEP,
    tolerance=DEFAULT_TOLERANCE,
):
    """Check every variant on random batches over the size/dimension/seed grid."""
    base = base or LossConfig(tau_plus=0.5)
    results = []
    for variant in variants:
        cfg = base.replace(variant=Variant(variant))
        for n in sizes:
            for dim in dims:
                for seed in seeds:
                    batch, redraws = _smooth_batch(n, dim, seed, cfg)
                    error = check_gradient(batch, cfg, step)
                    result = GradCheckResult(
                        cfg.variant.value, n, dim, seed, error, tolerance, redraws
                    )
                    if not result.passed:
                        logger.warning(
                            "%s n=%d d=%d seed=%d: relative error %.3g",
                            cfg.variant.value, n, dim, seed, error,
                        )
                    results.append(result)
        logger.info("gradcheck %s done", cfg.variant.value)
    return results
