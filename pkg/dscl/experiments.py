"""Ready-made comparisons built on :func:`dscl.trainer.run_comparison`."""

import logging

import pandas as pd

from .losses import Variant
from .trainer import ComparisonResult, run_comparison, summarize

logger = logging.getLogger(__name__)

DEFAULT_TAU_PLUS_VALUES = (0.01, 0.03, 0.05, 0.10, 0.20)
DEFAULT_BATCH_SIZES = (16, 32, 64)


def ablation_losses(base):
    """No debiasing, negatives only, positives only and both, sharing ``base``'s settings."""
    return [
        base.replace(variant=Variant.SUPCON_IN_REFORMULATED, name="no_debias"),
        base.replace(variant=Variant.DSCL_NEG_ONLY, name="debias_negatives"),
        base.replace(variant=Variant.DSCL_POS_ONLY, name="debias_positives"),
        base.replace(variant=Variant.DSCL_FULL, name="debias_both"),
    ]


def ablation(dataset, base_loss, train_cfg, enc, n_seeds):
    return run_comparison(dataset, ablation_losses(base_loss), train_cfg, enc, n_seeds)


def tau_plus_losses(base, values=DEFAULT_TAU_PLUS_VALUES):
    """Full debiasing at each assumed mislabelling rate, plus the uncorrected loss at the same beta.

    ``tau_plus = 0`` subtracts nothing from either side, leaving the plain
    importance-weighted means.
    """
    losses = [
        base.replace(variant=Variant.DSCL_FULL, tau_plus=v, tau_minus=None, name=f"tau_plus={v:g}")
        for v in values
    ]
    losses.append(
        base.replace(variant=Variant.DSCL_FULL, tau_plus=0.0, tau_minus=None, name="no_correction")
    )
    return losses


def tau_plus_sweep(dataset, base_loss, train_cfg, enc, n_seeds, values=DEFAULT_TAU_PLUS_VALUES):
    return run_comparison(dataset, tau_plus_losses(base_loss, values), train_cfg, enc, n_seeds)


def batch_size_sweep(dataset, losses, train_cfg, enc, n_seeds, sizes=DEFAULT_BATCH_SIZES):
    """Repeat a comparison at each batch size; rows carry a ``batch_size`` column."""
    frames, reports = [], []
    for size in sizes:
        logger.info("batch size %d", size)
        result = run_comparison(dataset, losses, train_cfg.replace(batch_size=size), enc, n_seeds)
        frames.append(result.runs.assign(batch_size=size))
        reports.extend(dict(entry, batch_size=size) for entry in result.reports)
    runs = pd.concat(frames, ignore_index=True)
    return ComparisonResult(runs, summarize(runs, by=("batch_size", "loss")), reports)
