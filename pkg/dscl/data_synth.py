"""Synthetic labelled point clouds on the unit hypersphere.

Each class is a von Mises-Fisher cloud around a random centroid. Labels can
then be corrupted either uniformly (symmetric noise) or towards classes whose
centroids resemble the true one (confusable noise); latent labels always keep
the true class.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import softmax

from .errors import ConfigError, MissingLatentLabels
from .noise_analysis import NoiseSpec
from .numerics import EmbeddingBatch, LabeledBatch, SeededRng, normalize_rows

logger = logging.getLogger(__name__)

DEFAULT_CONFUSION_TEMPERATURE = 0.1


class NoiseMechanism(str, Enum):
    SYMMETRIC = "symmetric"
    CONFUSABLE = "confusable"


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    num_classes: int
    dim: int
    samples_per_class: int
    concentration: float
    centroid_seed: int
    sample_seed: int
    noise_seed: int
    error_rate: float = 0.0
    noise_mechanism: NoiseMechanism = NoiseMechanism.SYMMETRIC
    confusion_temperature: float = DEFAULT_CONFUSION_TEMPERATURE

    def __post_init__(self):
        object.__setattr__(self, "noise_mechanism", NoiseMechanism(self.noise_mechanism))
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if self.samples_per_class < 2:
            raise ConfigError(f"samples_per_class must be >= 2, got {self.samples_per_class}")
        if not self.concentration > 0:
            raise ConfigError(f"concentration must be positive, got {self.concentration}")
        if not self.confusion_temperature > 0:
            raise ConfigError("confusion_temperature must be positive")
        NoiseSpec(self.num_classes, self.error_rate)

    @property
    def noise(self):
        return NoiseSpec(self.num_classes, self.error_rate)

    @property
    def size(self):
        return self.num_classes * self.samples_per_class

    def with_seed_offset(self, offset):
        """Same spec with every seed shifted by ``offset``."""
        return replace(
            self,
            centroid_seed=self.centroid_seed + offset,
            sample_seed=self.sample_seed + offset,
            noise_seed=self.noise_seed + offset,
        )


@dataclass
class SyntheticDataset:
    batch: LabeledBatch
    centroids: np.ndarray
    spec: SyntheticDatasetSpec


def _wood_radial(kappa, dim, size, gen):
    """Draw ``size`` values of w = mu . x by Wood's rejection scheme."""
    m = dim - 1
    b = m / (np.sqrt(4.0 * kappa**2 + m**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    # log(1 - x0^2) without cancellation for large kappa
    c = kappa * x0 + m * (np.log(4.0 * b) - 2.0 * np.log1p(b))

    accepted = np.empty(0)
    while accepted.size < size:
        want = size - accepted.size
        z = gen.beta(m / 2.0, m / 2.0, size=want)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        log_u = np.log(gen.random(want))
        ok = kappa * w + m * np.log(1.0 - x0 * w) - c >= log_u
        accepted = np.concatenate([accepted, w[ok]])
    return accepted


def sample_vmf(mean, kappa, size, rng):
    """``size`` unit vectors from the von Mises-Fisher distribution around ``mean``."""
    mean = np.asarray(mean, dtype=np.float64)
    mean = mean / np.linalg.norm(mean)
    gen = rng.generator
    w = _wood_radial(kappa, mean.size, size, gen)
    tangent = gen.standard_normal((size, mean.size))
    tangent -= np.outer(tangent @ mean, mean)
    tangent = normalize_rows(tangent)
    samples = w[:, None] * mean[None, :] + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * tangent
    return normalize_rows(samples)


def sample_centroids(spec):
    gen = SeededRng(spec.centroid_seed).generator
    return normalize_rows(gen.standard_normal((spec.num_classes, spec.dim)))


def generate(spec, centroids=None):
    """Clean dataset: rows grouped by class, ``assigned == latent``.

    Class ``k`` draws from stream ``k`` of ``sample_seed``.
    """
    if centroids is None:
        centroids = sample_centroids(spec)
    rows = [
        sample_vmf(centroids[k], spec.concentration, spec.samples_per_class,
                   SeededRng(spec.sample_seed, stream=k))
        for k in range(spec.num_classes)
    ]
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    return LabeledBatch(EmbeddingBatch(np.vstack(rows)), labels, labels.copy())


def _flips(batch, noise, rng):
    if not batch.has_latent:
        raise MissingLatentLabels("noise injection corrupts latent labels")
    gen = rng.generator
    flip = gen.random(batch.n) < noise.error_rate
    # u in (0, 1]: u == 0 would send a flipped class-0 label back to class 0
    u = 1.0 - gen.random(batch.n)
    return flip, u


def inject_symmetric_noise(batch, noise, rng):
    """Flip each latent label with probability ``error_rate`` to a uniform other class."""
    flip, u = _flips(batch, noise, rng)
    c = noise.num_classes
    offset = 1 + np.minimum(np.floor(u * (c - 1)).astype(np.int64), c - 2)
    assigned = np.where(flip, (batch.latent + offset) % c, batch.latent)
    logger.debug("symmetric noise: %d of %d labels flipped", int(flip.sum()), batch.n)
    return batch.with_assigned(assigned)


def confusion_matrix(centroids, temperature=DEFAULT_CONFUSION_TEMPERATURE):
    """Row ``a``: destination probabilities for a flipped label of class ``a``."""
    logits = (centroids @ centroids.T) / temperature
    np.fill_diagonal(logits, -np.inf)
    return softmax(logits, axis=1)


def inject_confusable_noise(batch, noise, rng, centroids,
                            temperature=DEFAULT_CONFUSION_TEMPERATURE):
    """Flip with probability ``error_rate`` towards classes with similar centroids.

    Draws the same random numbers as :func:`inject_symmetric_noise`, so with
    two classes both mechanisms give identical labels.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.shape[0] != noise.num_classes:
        raise ConfigError(
            f"{centroids.shape[0]} centroids for {noise.num_classes} classes"
        )
    flip, u = _flips(batch, noise, rng)
    cdf = np.cumsum(confusion_matrix(centroids, temperature), axis=1)
    cdf /= cdf[:, -1:]
    dest = np.count_nonzero(cdf[batch.latent] < u[:, None], axis=1)
    assigned = np.where(flip, dest, batch.latent)
    logger.debug("confusable noise: %d of %d labels flipped", int(flip.sum()), batch.n)
    return batch.with_assigned(assigned)


def make_dataset(spec):
    """Generate the clean clouds and apply the spec's noise mechanism."""
    centroids = sample_centroids(spec)
    batch = generate(spec, centroids)
    rng = SeededRng(spec.noise_seed)
    if spec.noise_mechanism is NoiseMechanism.SYMMETRIC:
        batch = inject_symmetric_noise(batch, spec.noise, rng)
    else:
        batch = inject_confusable_noise(
            batch, spec.noise, rng, centroids, spec.confusion_temperature
        )
    logger.info(
        "dataset: %d classes x %d samples, d=%d, kappa=%g, %s noise %.3f",
        spec.num_classes, spec.samples_per_class, spec.dim, spec.concentration,
        spec.noise_mechanism.value, spec.error_rate,
    )
    return SyntheticDataset(batch, centroids, spec)
