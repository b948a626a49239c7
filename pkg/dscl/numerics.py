"""Elementary numerics shared by the loss kernels and analyses.

Embeddings are stored as unit vectors; the temperature is applied when
similarities are formed, s(u, v) = (u . v) / T.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DimensionMismatch, EmptyInput, LengthMismatch, ZeroVector

ZERO_NORM = 1e-30
UNIT_TOL = 1e-9


class SeededRng:
    """Reproducible random stream keyed by ``(seed, stream)``.

    Every stochastic operation in the package takes one of these explicitly,
    so a Monte Carlo result is fixed by the integers that built its streams.
    """

    def __init__(self, seed, stream=0):
        if seed < 0 or stream < 0:
            raise ConfigError("seed and stream must be non-negative integers")
        self.seed = int(seed)
        self.stream = int(stream)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def for_stream(self, stream):
        """Return an independent stream under the same seed."""
        return SeededRng(self.seed, stream)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


@dataclass(frozen=True)
class EmbeddingBatch:
    """An ``n x d`` matrix of embedding rows with a similarity temperature."""

    vectors: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D matrix, got shape {vectors.shape}")
        n, d = vectors.shape
        if n < 1 or d < 2:
            raise DimensionMismatch(f"need n >= 1 and d >= 2, got n={n}, d={d}")
        if not np.all(np.isfinite(vectors)):
            raise ConfigError("embedding vectors must be finite")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "temperature", float(self.temperature))

    @classmethod
    def from_raw(cls, vectors, temperature=1.0):
        """Build a batch from arbitrary rows, normalizing each to unit length."""
        return cls(normalize_rows(np.asarray(vectors, dtype=np.float64)), temperature)

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def normalized(self):
        return EmbeddingBatch.from_raw(self.vectors, self.temperature)

    def is_unit_norm(self, tol=UNIT_TOL):
        norms = np.linalg.norm(self.vectors, axis=1)
        return bool(np.all(np.abs(norms - 1.0) <= tol))

    def rows(self, index):
        return EmbeddingBatch(self.vectors[index], self.temperature)


@dataclass(frozen=True)
class LabeledBatch:
    """Embeddings with assigned labels and, optionally, latent (true) labels."""

    embeddings: EmbeddingBatch
    assigned: np.ndarray
    latent: Optional[np.ndarray] = None

    def __post_init__(self):
        assigned = np.asarray(self.assigned, dtype=np.int64).reshape(-1)
        if assigned.shape[0] != self.embeddings.n:
            raise LengthMismatch(
                f"{assigned.shape[0]} assigned labels for {self.embeddings.n} rows"
            )
        if np.any(assigned < 0):
            raise ConfigError("labels must be non-negative")
        object.__setattr__(self, "assigned", assigned)
        if self.latent is not None:
            latent = np.asarray(self.latent, dtype=np.int64).reshape(-1)
            if latent.shape[0] != self.embeddings.n:
                raise LengthMismatch(
                    f"{latent.shape[0]} latent labels for {self.embeddings.n} rows"
                )
            if np.any(latent < 0):
                raise ConfigError("labels must be non-negative")
            object.__setattr__(self, "latent", latent)

    @property
    def n(self):
        return self.embeddings.n

    @property
    def vectors(self):
        return self.embeddings.vectors

    @property
    def temperature(self):
        return self.embeddings.temperature

    @property
    def has_latent(self):
        return self.latent is not None

    def with_vectors(self, vectors):
        """Same labels, new (normalized) rows at the same temperature."""
        return LabeledBatch(
            EmbeddingBatch.from_raw(vectors, self.temperature), self.assigned, self.latent
        )

    def with_assigned(self, assigned):
        return LabeledBatch(self.embeddings, assigned, self.latent)

    def with_temperature(self, temperature):
        return LabeledBatch(
            EmbeddingBatch(self.vectors, temperature), self.assigned, self.latent
        )

    def subset(self, index):
        latent = None if self.latent is None else self.latent[index]
        return LabeledBatch(self.embeddings.rows(index), self.assigned[index], latent)


def l2_normalize(v):
    """Scale ``v`` to unit Euclidean norm, preserving direction."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm < ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    return v / norm


def normalize_rows(matrix):
    """Row-wise :func:`l2_normalize` of a 2-D array."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms < ZERO_NORM):
        raise ZeroVector("cannot normalize a zero row")
    return matrix / norms


def project_tangent(gradient, vectors):
    """Remove the radial component of each gradient row: g - (g . v) v."""
    radial = np.sum(gradient * vectors, axis=1, keepdims=True)
    return gradient - radial * vectors


def sim_matrix(a, b):
    """Scaled similarities ``(a_i . b_j) / T`` between two batches."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} vs {b.dim}")
    if a.temperature != b.temperature:
        raise DimensionMismatch(
            f"temperature {a.temperature} vs {b.temperature}"
        )
    return (a.vectors @ b.vectors.T) / a.temperature


def log_sum_exp(xs):
    """Overflow-safe ``log(sum(exp(xs)))``."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    if xs.size == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    return float(logsumexp(xs))
