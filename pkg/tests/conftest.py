"""Shared fixtures."""

import json

import pytest


@pytest.fixture
def config_dict():
    """A small experiment: 3 classes x 10 samples, 1 epoch, 3 seeds."""
    return {
        "dataset": {
            "num_classes": 3,
            "dim": 4,
            "samples_per_class": 10,
            "concentration": 20,
            "centroid_seed": 1,
            "sample_seed": 2,
            "noise_seed": 3,
            "error_rate": 0.1,
            "noise_mechanism": "confusable",
        },
        "encoder": {"input_dim": 4, "output_dim": 4, "hidden_dim": 8, "init_seed": 4},
        "train": {"epochs": 1, "batch_size": 10, "shuffle_seed": 5},
        "losses": [
            {"variant": "supcon_in", "temperature": 0.5},
            {"variant": "dscl_full", "temperature": 0.5, "beta": 0.5, "tau_plus": 0.1},
        ],
        "n_seeds": 3,
    }


@pytest.fixture
def config_file(tmp_path, config_dict):
    """The small experiment written to disk."""
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config_dict))
    return path
