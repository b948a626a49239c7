"""Tests for synthetic vMF datasets and label-noise injection."""

from types import SimpleNamespace

import numpy as np
import pytest

from dscl.data_synth import (
    NoiseMechanism,
    SyntheticDatasetSpec,
    confusion_matrix,
    generate,
    inject_confusable_noise,
    inject_symmetric_noise,
    make_dataset,
    sample_vmf,
)
from dscl.errors import ConfigError, MissingLatentLabels
from dscl.noise_analysis import NoiseSpec
from dscl.numerics import EmbeddingBatch, LabeledBatch, SeededRng, normalize_rows


@pytest.fixture
def spec():
    return SyntheticDatasetSpec(
        num_classes=5, dim=8, samples_per_class=40, concentration=50.0,
        centroid_seed=1, sample_seed=2, noise_seed=3, error_rate=0.2,
    )


def _latent_batch(labels, dim=4):
    labels = np.asarray(labels)
    gen = np.random.default_rng(0)
    return LabeledBatch(EmbeddingBatch.from_raw(gen.standard_normal((labels.size, dim))), labels, labels)


def test_make_dataset_is_deterministic(spec):
    a = make_dataset(spec).batch
    b = make_dataset(spec).batch
    assert np.array_equal(a.vectors, b.vectors)
    assert np.array_equal(a.assigned, b.assigned)


def test_seed_offset_changes_draws(spec):
    shifted = spec.with_seed_offset(1)
    assert shifted.sample_seed == spec.sample_seed + 1
    assert not np.array_equal(make_dataset(spec).batch.vectors, make_dataset(shifted).batch.vectors)


def test_generate_is_class_major_and_clean(spec):
    batch = generate(spec)
    assert batch.n == spec.size
    assert batch.embeddings.is_unit_norm()
    assert batch.latent.tolist() == np.repeat(np.arange(5), 40).tolist()
    assert np.array_equal(batch.assigned, batch.latent)


def test_high_concentration_stays_near_mean():
    mean = np.array([0.0, 0.0, 1.0])
    samples = sample_vmf(mean, 1e6, 200, SeededRng(5))
    angles = np.arccos(np.clip(samples @ mean, -1.0, 1.0))
    assert np.all(angles < 0.01)


def test_low_concentration_spreads_out():
    mean = np.array([1.0, 0.0, 0.0, 0.0])
    samples = sample_vmf(mean, 0.1, 2000, SeededRng(6))
    assert np.linalg.norm(samples, axis=1) == pytest.approx(np.ones(2000))
    assert abs(float(np.mean(samples @ mean))) < 0.1


def test_within_class_similarity_exceeds_between(spec):
    batch = generate(spec)
    sims = batch.vectors @ batch.vectors.T
    same = batch.latent[:, None] == batch.latent[None, :]
    np.fill_diagonal(same, False)
    other = batch.latent[:, None] != batch.latent[None, :]
    assert sims[same].mean() > sims[other].mean() + 0.3


def test_zero_error_rate_is_identity():
    batch = _latent_batch(np.arange(100) % 4)
    noisy = inject_symmetric_noise(batch, NoiseSpec(4, 0.0), SeededRng(0))
    assert np.array_equal(noisy.assigned, batch.latent)


def test_symmetric_flip_rate_and_latent_kept():
    batch = _latent_batch(np.arange(2000) % 5)
    noisy = inject_symmetric_noise(batch, NoiseSpec(5, 0.2), SeededRng(7))
    flips = int(np.count_nonzero(noisy.assigned != noisy.latent))
    sd = np.sqrt(2000 * 0.2 * 0.8)
    assert abs(flips - 400) < 4 * sd
    assert np.array_equal(noisy.latent, batch.latent)
    assert noisy.assigned.max() < 5


def test_binary_mechanisms_agree():
    batch = _latent_batch(np.arange(500) % 2)
    centroids = normalize_rows(np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]))
    noise = NoiseSpec(2, 0.3)
    symmetric = inject_symmetric_noise(batch, noise, SeededRng(8))
    confusable = inject_confusable_noise(batch, noise, SeededRng(8), centroids)
    assert np.array_equal(symmetric.assigned, confusable.assigned)


def test_largest_draw_still_moves_the_label():
    """A uniform draw at its upper end picks a different class under both mechanisms."""
    batch = _latent_batch(np.arange(8) % 4)
    always_zero = SimpleNamespace(generator=SimpleNamespace(random=np.zeros))
    centroids = normalize_rows(np.random.default_rng(2).standard_normal((4, 4)))
    noise = NoiseSpec(4, 0.5)
    symmetric = inject_symmetric_noise(batch, noise, always_zero)
    confusable = inject_confusable_noise(batch, noise, always_zero, centroids)
    assert np.all(symmetric.assigned != batch.latent)
    assert np.all(confusable.assigned != batch.latent)
    assert symmetric.assigned.max() < 4 and confusable.assigned.max() < 4


def test_confusable_noise_prefers_similar_centroid():
    gen = np.random.default_rng(9)
    centroids = normalize_rows(gen.standard_normal((6, 16)))
    centroids[1] = normalize_rows((centroids[0] + 0.01 * gen.standard_normal(16))[None, :])[0]
    batch = _latent_batch(np.zeros(1000, dtype=np.int64), dim=16)
    noisy = inject_confusable_noise(batch, NoiseSpec(6, 0.5), SeededRng(10), centroids)
    flipped = noisy.assigned[noisy.assigned != 0]
    assert flipped.size > 0
    assert np.mean(flipped == 1) >= 0.8


def test_confusion_matrix_rows():
    centroids = normalize_rows(np.random.default_rng(1).standard_normal((4, 3)))
    matrix = confusion_matrix(centroids)
    assert np.allclose(matrix.sum(axis=1), 1.0)
    assert np.all(np.diag(matrix) == 0.0)


def test_confusable_noise_checks_centroid_count():
    batch = _latent_batch(np.arange(10) % 3)
    with pytest.raises(ConfigError):
        inject_confusable_noise(batch, NoiseSpec(3, 0.1), SeededRng(0), np.eye(4)[:2])


def test_noise_needs_latent_labels():
    batch = LabeledBatch(EmbeddingBatch(np.eye(3)), [0, 1, 2])
    with pytest.raises(MissingLatentLabels):
        inject_symmetric_noise(batch, NoiseSpec(3, 0.1), SeededRng(0))


def test_confusable_dataset(spec):
    data = make_dataset(
        SyntheticDatasetSpec(**{**spec.__dict__, "noise_mechanism": NoiseMechanism.CONFUSABLE})
    )
    assert data.centroids.shape == (5, 8)
    assert np.array_equal(np.sort(data.batch.latent), np.repeat(np.arange(5), 40))


@pytest.mark.parametrize(
    "field,value",
    [("num_classes", 1), ("dim", 1), ("samples_per_class", 1), ("concentration", 0.0), ("error_rate", 1.0)],
)
def test_spec_validation(spec, field, value):
    with pytest.raises(ConfigError):
        SyntheticDatasetSpec(**{**spec.__dict__, field: value})
