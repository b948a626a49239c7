"""Pair-level consequences of symmetric label noise.

A sample is mislabelled with probability ``error_rate``; a mislabelled sample's
assigned label is uniform over the other ``C - 1`` classes and latent classes
are uniform. Rates are conditional: the false-positive rate is the fraction of
*positive* pairs (same assigned label) whose latent classes differ.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SHARD_SIZE = 1_000_000


class ClassPrior(str, Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseSpec:
    num_classes: int
    error_rate: float
    class_prior: ClassPrior = ClassPrior.UNIFORM

    def __post_init__(self):
        object.__setattr__(self, "class_prior", ClassPrior(self.class_prior))
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ConfigError(f"num_classes must be an integer >= 2, got {self.num_classes}")
        if not 0.0 <= self.error_rate < 1.0:
            raise ConfigError(f"error_rate must lie in [0, 1), got {self.error_rate}")
        object.__setattr__(self, "num_classes", int(self.num_classes))
        object.__setattr__(self, "error_rate", float(self.error_rate))


# benchmark regimes: (classes, per-sample error rate)
PRESETS = {
    "cifar100": NoiseSpec(100, 0.0585),
    "imagenet": NoiseSpec(1000, 0.0583),
    "typical": NoiseSpec(100, 0.033),
    "cifar10n-aggre": NoiseSpec(10, 0.18),
    "cifar10n-worst": NoiseSpec(10, 0.40),
    "cifar100n": NoiseSpec(100, 0.40),
}

OUTCOME_KEYS = tuple(itertools.product((True, False), repeat=4))


@dataclass
class PairOutcomeTable:
    """Joint probabilities keyed by ``(a_correct, b_correct, same_latent, same_assigned)``."""

    probabilities: dict

    def __getitem__(self, key):
        return self.probabilities.get(tuple(key), 0.0)

    def total(self):
        return math.fsum(self.probabilities.values())

    def marginal(self, same_latent=None, same_assigned=None):
        """Sum of the entries matching the given agreement flags."""
        return math.fsum(
            p
            for (_, _, latent, assigned), p in self.probabilities.items()
            if (same_latent is None or latent == same_latent)
            and (same_assigned is None or assigned == same_assigned)
        )

    def to_records(self):
        return [
            {
                "a_correct": a,
                "b_correct": b,
                "same_latent": latent,
                "same_assigned": assigned,
                "probability": self[(a, b, latent, assigned)],
            }
            for a, b, latent, assigned in OUTCOME_KEYS
        ]


@dataclass
class SimulatedRates:
    """Empirical FP/FN rates with binomial standard errors.

    A rate is ``None`` when no pair fell into its conditioning set.
    """

    n_pairs: int
    positive_pairs: int
    negative_pairs: int
    false_positives: int
    false_negatives: int
    fp_rate: float = field(init=False)
    fp_se: float = field(init=False)
    fn_rate: float = field(init=False)
    fn_se: float = field(init=False)

    def __post_init__(self):
        self.fp_rate, self.fp_se = _binomial(self.false_positives, self.positive_pairs)
        self.fn_rate, self.fn_se = _binomial(self.false_negatives, self.negative_pairs)

    def to_dict(self):
        return {
            "n_pairs": self.n_pairs,
            "positive_pairs": self.positive_pairs,
            "negative_pairs": self.negative_pairs,
            "fp_rate": self.fp_rate,
            "fp_se": self.fp_se,
            "fn_rate": self.fn_rate,
            "fn_se": self.fn_se,
        }


def _binomial(hits, trials):
    if trials == 0:
        return None, None
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def false_positive_rate(spec):
    """P(latent differ | assigned same) = 1 - (1-t)^2 - t^2/(C-1)."""
    t, c = spec.error_rate, spec.num_classes
    return 1.0 - (1.0 - t) ** 2 - t * t / (c - 1)


def false_negative_rate(spec):
    """P(latent same | assigned differ), which is the FP rate over C - 1."""
    return false_positive_rate(spec) / (spec.num_classes - 1)


def outcome_table(spec):
    """Exact joint distribution of correctness and agreement for a random pair."""
    t, c = spec.error_rate, spec.num_classes
    right, wrong = 1.0 - t, t
    one_wrong = right * wrong
    both_wrong = wrong * wrong
    probabilities = dict.fromkeys(OUTCOME_KEYS, 0.0)
    probabilities.update(
        {
            (True, True, True, True): right * right / c,
            (True, True, False, False): right * right * (c - 1) / c,
            (True, False, True, False): one_wrong / c,
            (True, False, False, True): one_wrong / c,
            (True, False, False, False): one_wrong * (c - 2) / c,
            (False, True, True, False): one_wrong / c,
            (False, True, False, True): one_wrong / c,
            (False, True, False, False): one_wrong * (c - 2) / c,
            (False, False, True, True): both_wrong / (c * (c - 1)),
            (False, False, True, False): both_wrong * (c - 2) / (c * (c - 1)),
            (False, False, False, True): both_wrong * (c - 2) / (c * (c - 1)),
            (False, False, False, False): (
                both_wrong * (c - 1) / c * (1.0 - (c - 2) / (c - 1) ** 2)
            ),
        }
    )
    return PairOutcomeTable(probabilities)


def corrupt_labels(latent, spec, rng):
    """Flip each label with probability ``error_rate`` to a uniform other class."""
    gen = rng.generator
    flip = gen.random(latent.shape[0]) < spec.error_rate
    offset = gen.integers(1, spec.num_classes, size=latent.shape[0])
    return np.where(flip, (latent + offset) % spec.num_classes, latent)


def _simulate_shard(spec, n_pairs, rng):
    gen = rng.generator
    c = spec.num_classes
    latent_a = gen.integers(0, c, size=n_pairs)
    latent_b = gen.integers(0, c, size=n_pairs)
    assigned_a = corrupt_labels(latent_a, spec, rng)
    assigned_b = corrupt_labels(latent_b, spec, rng)
    same_latent = latent_a == latent_b
    same_assigned = assigned_a == assigned_b
    return (
        int(np.count_nonzero(same_assigned)),
        int(np.count_nonzero(same_assigned & ~same_latent)),
        int(np.count_nonzero(~same_assigned & same_latent)),
    )


def simulate_pair_outcomes(spec, n_pairs, rng, shard_size=DEFAULT_SHARD_SIZE):
    """Monte Carlo estimate of the FP/FN pair rates.

    Pairs are drawn in shards; shard ``k`` uses stream ``rng.stream + k`` so
    the result depends only on the seed, ``n_pairs`` and ``shard_size``.
    """
    if n_pairs < 1:
        raise ConfigError(f"n_pairs must be >= 1, got {n_pairs}")
    positives = false_pos = false_neg = 0
    remaining, shard = int(n_pairs), 0
    while remaining > 0:
        size = min(shard_size, remaining)
        pos, fp, fn = _simulate_shard(spec, size, rng.for_stream(rng.stream + shard))
        positives += pos
        false_pos += fp
        false_neg += fn
        remaining -= size
        shard += 1
        logger.debug("shard %d: %d pairs, %d remaining", shard, size, remaining)
    rates = SimulatedRates(
        n_pairs=int(n_pairs),
        positive_pairs=positives,
        negative_pairs=int(n_pairs) - positives,
        false_positives=false_pos,
        false_negatives=false_neg,
    )
    logger.info(
        "simulated %d pairs over %d shards: fp=%s fn=%s",
        n_pairs, shard, rates.fp_rate, rates.fn_rate,
    )
    return rates


def rate_grid(classes, error_rates):
    """FP/FN rates for every (C, error rate) combination, one row each."""
    rows = []
    for c in classes:
        for t in error_rates:
            spec = NoiseSpec(c, t)
            rows.append(
                {
                    "classes": spec.num_classes,
                    "error_rate": spec.error_rate,
                    "fp_rate": false_positive_rate(spec),
                    "fn_rate": false_negative_rate(spec),
                    "p_same_assigned": outcome_table(spec).marginal(same_assigned=True),
                }
            )
    return pd.DataFrame(rows, columns=["classes", "error_rate", "fp_rate", "fn_rate", "p_same_assigned"])


def resolve_spec(preset=None, classes=None, error_rate=None):
    """Noise spec from a preset name, optionally overridden by explicit values."""
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = PRESETS[preset]
        classes = base.num_classes if classes is None else classes
        error_rate = base.error_rate if error_rate is None else error_rate
    if classes is None or error_rate is None:
        raise ConfigError("give --classes and --error-rate, or --preset")
    return NoiseSpec(classes, error_rate)
