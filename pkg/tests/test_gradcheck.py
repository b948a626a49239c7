"""Tests for finite-difference gradient verification."""

import numpy as np
import pytest

from dscl.gradcheck import (
    GradCheckResult,
    check_gradient,
    finite_difference_gradient,
    gradcheck_grid,
    random_batch,
    relative_error,
)
from dscl.losses import LossConfig, Variant, evaluate
from dscl.numerics import SeededRng


def test_relative_error_scale():
    a = np.array([[1.0, -2.0], [0.5, 0.0]])
    assert relative_error(a, a) == 0.0
    assert relative_error(a, 2 * a) == pytest.approx(0.5)
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_result_pass_flag():
    ok = GradCheckResult("supcon_in", 4, 3, 0, 1e-8, 1e-5)
    bad = GradCheckResult("supcon_in", 4, 3, 0, 1e-3, 1e-5)
    assert ok.passed and not bad.passed
    assert ok.to_dict()["passed"] is True


def test_random_batch_is_balanced():
    batch = random_batch(8, 4, SeededRng(1), temperature=0.5, num_classes=2)
    assert batch.embeddings.is_unit_norm()
    assert sorted(np.bincount(batch.assigned).tolist()) == [4, 4]
    assert batch.temperature == 0.5


@pytest.mark.parametrize("variant", [Variant.SUPCON_IN, Variant.SUPCON_OUT, Variant.INFO_NCE])
def test_plain_losses_match_finite_differences(variant):
    batch = random_batch(6, 3, SeededRng(2), temperature=0.5)
    cfg = LossConfig(variant=variant, temperature=0.5)
    assert check_gradient(batch, cfg) < 1e-5


def test_finite_difference_is_tangent():
    """Differentiating through normalization leaves no radial component."""
    batch = random_batch(4, 3, SeededRng(3), temperature=0.5)
    cfg = LossConfig(temperature=0.5)
    numeric = finite_difference_gradient(batch, cfg)
    assert np.allclose(np.sum(numeric * batch.vectors, axis=1), 0.0, atol=1e-7)


def test_anchor_subset_gradient():
    batch = random_batch(6, 3, SeededRng(4), temperature=0.5)
    cfg = LossConfig(variant=Variant.SUPCON_IN_REFORMULATED, temperature=0.5)
    assert check_gradient(batch, cfg, anchors=[0, 3]) < 1e-5
    assert evaluate(batch, cfg, anchors=[0, 3]).diagnostics.anchors.tolist() == [0, 3]


def test_small_grid_passes_for_every_variant():
    results = gradcheck_grid(sizes=(4,), dims=(3,), seeds=range(2))
    assert len(results) == 2 * len(Variant)
    assert {r.variant for r in results} == {v.value for v in Variant}
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]


def test_grid_honours_custom_base():
    base = LossConfig(temperature=1.0, beta=0.0, tau_plus=0.5)
    results = gradcheck_grid(base, variants=[Variant.DSCL_FULL], sizes=(4,), dims=(3,), seeds=[0])
    assert len(results) == 1
    assert results[0].passed
