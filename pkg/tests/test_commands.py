"""Tests for CLI commands."""

import io
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from dscl.commands import cli


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


@pytest.fixture
def dataset_file(runner, tmp_path):
    """A small noisy dataset written by generate-data."""
    path = tmp_path / "data.bin"
    result = runner.invoke(
        cli,
        ['generate-data', '--classes', '3', '--dim', '4', '--samples-per-class', '20',
         '--error-rate', '0.2', '--mechanism', 'confusable', '--seed', '7', '--out', str(path)],
    )
    assert result.exit_code == 0, result.output
    return path


def test_analyze_noise(runner):
    """Test the closed-form rates for a CIFAR-100-like setting."""
    result = runner.invoke(cli, ['analyze-noise', '--classes', '100', '--error-rate', '0.0585'])
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert data['fp_rate'] == pytest.approx(0.1135, abs=1e-4)
    assert data['fn_rate'] == pytest.approx(0.00115, abs=1e-5)
    assert len(data['outcome_table']) == 16
    assert 'simulated' not in data


def test_analyze_noise_simulated(runner):
    result = runner.invoke(
        cli, ['--no-timestamp', 'analyze-noise', '--preset', 'cifar10n-aggre',
              '--simulate', '20000', '--seed', '1']
    )
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert data['simulated']['n_pairs'] == 20000
    assert 'generated_at' not in data


def test_analyze_noise_invalid_rate(runner):
    """Test that an out-of-range error rate exits with the config code."""
    result = runner.invoke(cli, ['analyze-noise', '--classes', '10', '--error-rate', '1.5'])
    assert result.exit_code == 2
    assert '[ERROR]' in result.output


def test_analyze_noise_csv_carries_rates(runner):
    result = runner.invoke(cli, ['analyze-noise', '--classes', '100', '--error-rate', '0.0585',
                                 '--format', 'csv'])
    assert result.exit_code == 0
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert len(frame) == 16
    assert frame['fp_rate'].nunique() == 1
    assert frame['fp_rate'].iloc[0] == pytest.approx(0.1135, abs=1e-4)
    assert frame['fn_rate'].iloc[0] == pytest.approx(0.00115, abs=1e-5)


def test_analyze_noise_needs_a_setting(runner):
    result = runner.invoke(cli, ['analyze-noise'])
    assert result.exit_code == 2


def test_analyze_noise_grid(runner, tmp_path):
    out = tmp_path / 'grid.csv'
    result = runner.invoke(cli, ['analyze-noise', '--grid', '--classes', '10', '--out', str(out)])
    assert result.exit_code == 0
    frame = pd.read_csv(out)
    assert frame['classes'].unique().tolist() == [10]
    assert len(frame) == 5


def test_generate_then_similarity(runner, dataset_file, tmp_path):
    """Test the similarity command on a generated dataset."""
    out = tmp_path / 'overlap'
    result = runner.invoke(cli, ['similarity', '--embeddings', str(dataset_file), '--bins', '20',
                                 '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert 'JSD true_pos~true_neg' in result.output
    report = json.loads((out / 'jsd.json').read_text())
    assert report['pairs'] == 60 * 59 // 2
    assert set(report['jsd']) == {'true_pos~true_neg', 'true_pos~false_pos', 'true_neg~false_pos'}
    assert len(pd.read_csv(out / 'histograms.csv')) == 4 * 20


def test_similarity_without_timestamp_is_reproducible(runner, dataset_file, tmp_path):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        result = runner.invoke(cli, ['--no-timestamp', 'similarity', '--embeddings', str(dataset_file),
                                     '--mode', 'per_class', '--out', str(out)])
        assert result.exit_code == 0, result.output
        outputs.append((out / 'jsd.json').read_bytes())
    assert outputs[0] == outputs[1]


def test_similarity_missing_file(runner, tmp_path):
    """Test that a missing embedding file exits with the I/O code."""
    result = runner.invoke(cli, ['similarity', '--embeddings', str(tmp_path / 'nope.bin')])
    assert result.exit_code == 3


def test_generate_data_from_config(runner, config_file, tmp_path):
    out = tmp_path / 'data.csv'
    result = runner.invoke(cli, ['generate-data', '--config', str(config_file), '--out', str(out)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert len(frame) == 30
    assert {'assigned', 'latent'} <= set(frame.columns)


def test_simulate(runner, config_file, tmp_path):
    """Test a two-loss comparison over three seeds."""
    out = tmp_path / 'results'
    result = runner.invoke(cli, ['--no-timestamp', 'simulate', '--config', str(config_file),
                                 '--out', str(out)])
    assert result.exit_code == 0, result.output
    runs = pd.read_csv(out / 'runs.csv')
    assert len(runs) == 2 * 3
    assert set(runs['loss']) == {'supcon_in', 'dscl_full'}
    report = json.loads((out / 'report.json').read_text())
    assert len(report['runs']) == 6
    assert 'wall_time' not in report['runs'][0]
    assert report['config']['n_seeds'] == 3


@pytest.mark.parametrize('suffix', ['bin', 'csv'])
def test_generate_data_is_byte_identical(runner, tmp_path, suffix):
    outputs = []
    for name in ('first', 'second'):
        path = tmp_path / f'{name}.{suffix}'
        result = runner.invoke(
            cli,
            ['--no-timestamp', 'generate-data', '--classes', '3', '--dim', '4',
             '--samples-per-class', '10', '--error-rate', '0.2', '--seed', '5', '--out', str(path)],
        )
        assert result.exit_code == 0, result.output
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_simulate_without_timestamp_is_reproducible(runner, config_file, tmp_path):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        result = runner.invoke(cli, ['--no-timestamp', 'simulate', '--config', str(config_file),
                                     '--out', str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(((out / 'runs.csv').read_bytes(), (out / 'report.json').read_bytes()))
    assert outputs[0] == outputs[1]


def test_simulate_missing_config(runner, tmp_path):
    result = runner.invoke(cli, ['simulate', '--config', str(tmp_path / 'absent.json')])
    assert result.exit_code == 3
    assert '[ERROR]' in result.output


def test_simulate_rejects_too_few_seeds(runner, config_file, tmp_path):
    result = runner.invoke(cli, ['simulate', '--config', str(config_file), '--n-seeds', '2',
                                 '--out', str(tmp_path)])
    assert result.exit_code == 2


def test_gradcheck(runner, tmp_path):
    """Test a reduced gradient check for two variants."""
    out = tmp_path / 'grad.json'
    result = runner.invoke(cli, ['gradcheck', '--variant', 'supcon_in', '--variant', 'dscl_full',
                                 '--seeds', '1', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert '[SUCCESS]' in result.output
    data = json.loads(out.read_text())
    assert {r['variant'] for r in data['results']} == {'supcon_in', 'dscl_full'}
    assert all(r['passed'] for r in data['results'])


def test_gradcheck_failure_exit_code(runner):
    """Test that an impossible tolerance fails the check."""
    result = runner.invoke(cli, ['gradcheck', '--variant', 'supcon_in', '--seeds', '1',
                                 '--tolerance', '0'])
    assert result.exit_code == 1


def test_schema(runner):
    result = runner.invoke(cli, ['schema'])
    assert result.exit_code == 0
    assert json.loads(result.stdout)['title'] == 'ExperimentConfig'


def test_sweep(runner, config_file, tmp_path):
    result = runner.invoke(cli, ['--no-timestamp', 'sweep', '--kind', 'ablation',
                                 '--config', str(config_file), '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    runs = pd.read_csv(tmp_path / 'ablation' / 'runs.csv')
    assert len(runs) == 4 * 3
    report = json.loads((tmp_path / 'ablation' / 'report.json').read_text())
    assert report['config']['sweep_kind'] == 'ablation'
