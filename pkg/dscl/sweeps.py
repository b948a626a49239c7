"""The ``sweep`` command: ablation, class-prior and batch-size studies."""

from pathlib import Path

import click

from .config import load_config, to_dict
from .experiments import ablation, batch_size_sweep, tau_plus_sweep
from .utils import reports_errors, write_comparison

SWEEP_KINDS = ('ablation', 'tau-plus', 'batch-size')


def run_sweep(kind, config):
    """Run one sweep over ``config``; the first configured loss is the base."""
    base = config.comparison_losses[0]
    if kind == 'ablation':
        return ablation(config.dataset, base, config.train, config.encoder, config.n_seeds)
    if kind == 'tau-plus':
        return tau_plus_sweep(
            config.dataset, base, config.train, config.encoder, config.n_seeds, config.sweep.tau_plus_values
        )
    return batch_size_sweep(
        config.dataset,
        config.comparison_losses,
        config.train,
        config.encoder,
        config.n_seeds,
        config.sweep.batch_sizes,
    )


@click.command()
@click.option('--kind', type=click.Choice(SWEEP_KINDS), required=True)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), required=True)
@click.option('--out', type=click.Path(file_okay=False), help='Output directory (default: config output.directory)')
@reports_errors
def sweep(kind, config_path, out):
    """Run a loss ablation, a tau-plus sweep or a batch-size sweep."""
    config = load_config(config_path)
    result = run_sweep(kind, config)
    out_dir = Path(out or config.output.directory) / kind
    timestamp = click.get_current_context().find_root().obj.get('timestamp', True)
    record = dict(to_dict(config), sweep_kind=kind)
    written = write_comparison(out_dir, result, record, config.output.formats, timestamp)
    click.echo(result.summary.to_string(index=False))
    for path in written:
        click.echo(f"  - {path}")
    click.secho(f"[SUCCESS] {kind} sweep complete", fg='green')
