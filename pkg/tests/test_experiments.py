"""Tests for the ready-made comparisons."""

import pytest

from dscl.config import ExperimentConfig, from_dict
from dscl.experiments import ablation_losses, batch_size_sweep, tau_plus_losses
from dscl.losses import LossConfig, Variant
from dscl.sweeps import run_sweep


@pytest.fixture
def config(config_dict):
    return from_dict(ExperimentConfig, config_dict)


def test_ablation_losses_share_base_settings():
    base = LossConfig(temperature=0.3, beta=1.0, tau_plus=0.05)
    losses = ablation_losses(base)
    assert [l.name for l in losses] == ["no_debias", "debias_negatives", "debias_positives", "debias_both"]
    assert losses[0].variant is Variant.SUPCON_IN_REFORMULATED
    assert all(l.temperature == 0.3 and l.beta == 1.0 for l in losses)


def test_tau_plus_losses():
    losses = tau_plus_losses(LossConfig(tau_minus=0.2), values=(0.01, 0.1))
    assert [l.display_name for l in losses] == ["tau_plus=0.01", "tau_plus=0.1", "no_correction"]
    assert all(l.variant is Variant.DSCL_FULL for l in losses)
    assert losses[0].tau_minus_value == pytest.approx(0.99)
    assert losses[-1].tau_plus == 0.0 and losses[-1].tau_minus_value == 1.0
    assert losses[-1].beta == losses[0].beta


def test_ablation_sweep(config):
    result = run_sweep("ablation", config)
    assert len(result.runs) == 4 * 3
    assert list(result.summary["loss"]) == ["no_debias", "debias_negatives", "debias_positives", "debias_both"]


def test_batch_size_sweep(config):
    result = batch_size_sweep(
        config.dataset, config.comparison_losses[:1], config.train, config.encoder, 3, sizes=(5, 10)
    )
    assert sorted(result.runs["batch_size"].unique().tolist()) == [5, 10]
    assert len(result.summary) == 2
    assert {entry["batch_size"] for entry in result.reports} == {5, 10}
