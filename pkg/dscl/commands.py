"""CLI commands for the dscl toolkit."""

import json
import logging
import sys
from pathlib import Path

import click
import pandas as pd

from .config import json_schema, load_config, to_dict
from .data_synth import NoiseMechanism, SyntheticDatasetSpec, make_dataset
from .gradcheck import DEFAULT_STEP, DEFAULT_TOLERANCE, gradcheck_grid
from .losses import LossConfig, PositiveSign, Variant
from .noise_analysis import (
    PRESETS,
    false_negative_rate,
    false_positive_rate,
    outcome_table,
    rate_grid,
    resolve_spec,
    simulate_pair_outcomes,
)
from .numerics import SeededRng
from .similarity import DEFAULT_BINS, OverlapMode, overlap_report
from .sweeps import sweep
from .trainer import run_comparison
from .utils import (
    ensure_dir,
    load_embeddings,
    reports_errors,
    save_embeddings,
    stamp,
    write_comparison,
    write_csv,
    write_json,
)

GRID_CLASSES = (2, 10, 100, 1000)
GRID_ERROR_RATES = (0.0, 0.01, 0.0585, 0.2, 0.4)


@click.group()
@click.option('-v', '--verbose', count=True, help='-v for progress, -vv for debug detail')
@click.option('--no-timestamp', is_flag=True, help='Leave the timestamp out of output files')
@click.pass_context
def cli(ctx, verbose, no_timestamp):
    """Debiased supervised contrastive learning under label noise."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', force=True)
    ctx.ensure_object(dict)
    ctx.obj['timestamp'] = not no_timestamp


def _timestamp():
    return click.get_current_context().find_root().obj.get('timestamp', True)


@cli.command('analyze-noise')
@click.option('--classes', type=int, help='Number of classes C')
@click.option('--error-rate', type=float, help='Per-sample mislabelling probability')
@click.option('--preset', type=click.Choice(sorted(PRESETS)), help='Named (C, error rate) regime')
@click.option('--simulate', 'n_pairs', type=int, default=0, help='Also simulate this many pairs')
@click.option('--seed', type=int, default=0, show_default=True, help='Simulation seed')
@click.option('--grid', is_flag=True, help='Tabulate rates over a grid of C and error rates')
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']), default='json', show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), help='Write to this file instead of stdout')
@reports_errors
def analyze_noise(classes, error_rate, preset, n_pairs, seed, grid, fmt, out):
    """False-positive / false-negative pair rates under symmetric label noise."""
    if grid:
        frame = rate_grid(
            (classes,) if classes else GRID_CLASSES,
            (error_rate,) if error_rate is not None else GRID_ERROR_RATES,
        )
        _emit_frame(frame, out)
        return

    spec = resolve_spec(preset, classes, error_rate)
    table = outcome_table(spec)
    if fmt == 'csv':
        # the pair rates repeat on every outcome row
        frame = pd.DataFrame(table.to_records()).assign(
            fp_rate=false_positive_rate(spec), fn_rate=false_negative_rate(spec)
        )
        _emit_frame(frame, out)
        return

    result = {
        'classes': spec.num_classes,
        'error_rate': spec.error_rate,
        'fp_rate': false_positive_rate(spec),
        'fn_rate': false_negative_rate(spec),
        'p_same_assigned': table.marginal(same_assigned=True),
        'outcome_table': table.to_records(),
    }
    if n_pairs:
        result['simulated'] = simulate_pair_outcomes(spec, n_pairs, SeededRng(seed)).to_dict()
    result = stamp(result, _timestamp())
    if out:
        write_json(out, result)
        click.secho(f"[SUCCESS] Wrote {out}", fg='green', err=True)
    else:
        click.echo(json.dumps(result, indent=2))


def _emit_frame(frame, out):
    if out:
        write_csv(out, frame)
        click.secho(f"[SUCCESS] Wrote {out}", fg='green', err=True)
    else:
        click.echo(frame.to_csv(index=False), nl=False)


@cli.command('generate-data')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help='Experiment config; its dataset section is used')
@click.option('--classes', type=int, default=10, show_default=True)
@click.option('--dim', type=int, default=16, show_default=True)
@click.option('--samples-per-class', type=int, default=200, show_default=True)
@click.option('--kappa', type=float, default=10.0, show_default=True, help='vMF concentration')
@click.option('--error-rate', type=float, default=0.0, show_default=True)
@click.option('--mechanism', type=click.Choice([m.value for m in NoiseMechanism]),
              default=NoiseMechanism.SYMMETRIC.value, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True,
              help='Centroid, sample and noise seed (flags only)')
@click.option('--out', type=click.Path(dir_okay=False), required=True,
              help='Embedding file (.csv for CSV, anything else for binary)')
@reports_errors
def generate_data(config_path, classes, dim, samples_per_class, kappa, error_rate, mechanism, seed, out):
    """Generate a noisy-label vMF dataset and write it with both label columns."""
    if config_path:
        spec = load_config(config_path).dataset
    else:
        spec = SyntheticDatasetSpec(
            num_classes=classes,
            dim=dim,
            samples_per_class=samples_per_class,
            concentration=kappa,
            centroid_seed=seed,
            sample_seed=seed,
            noise_seed=seed,
            error_rate=error_rate,
            noise_mechanism=mechanism,
        )
    dataset = make_dataset(spec)
    save_embeddings(out, dataset.batch)
    flipped = int((dataset.batch.assigned != dataset.batch.latent).sum())
    click.secho(
        f"[SUCCESS] Wrote {dataset.batch.n} samples ({flipped} mislabelled) to {out}", fg='green'
    )


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), required=True)
@click.option('--out', type=click.Path(file_okay=False), help='Output directory (default: config output.directory)')
@click.option('--n-seeds', type=int, help='Override the config seed count')
@reports_errors
def simulate(config_path, out, n_seeds):
    """Train every configured loss over several seeds and compare probe accuracy."""
    config = load_config(config_path)
    out_dir = Path(out or config.output.directory)
    result = run_comparison(
        config.dataset,
        config.comparison_losses,
        config.train,
        config.encoder,
        n_seeds or config.n_seeds,
    )
    written = write_comparison(
        out_dir, result, to_dict(config), config.output.formats, _timestamp()
    )
    click.echo(result.summary.to_string(index=False))
    for path in written:
        click.echo(f"  - {path}")
    click.secho("[SUCCESS] Comparison complete", fg='green')


@cli.command()
@click.option('--embeddings', type=click.Path(dir_okay=False), required=True)
@click.option('--bins', type=int, default=DEFAULT_BINS, show_default=True)
@click.option('--temperature', type=float, default=1.0, show_default=True)
@click.option('--mode', type=click.Choice([m.value for m in OverlapMode]),
              default=OverlapMode.POOLED.value, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), default='.', show_default=True)
@reports_errors
def similarity(embeddings, bins, temperature, mode, out):
    """Pair-similarity histograms by category and their Jensen-Shannon divergences."""
    batch = load_embeddings(embeddings).as_batch(temperature, normalize=True)
    report = overlap_report(batch, bins, mode)
    out_dir = ensure_dir(out)
    write_csv(out_dir / 'histograms.csv', report.histograms.to_frame())
    write_json(out_dir / 'jsd.json', stamp(report.to_dict(), _timestamp()))
    for key, value in report.divergences.items():
        shown = 'absent' if value is None else f"{value:.4f}"
        click.echo(f"  JSD {key}: {shown}")
    click.secho(f"[SUCCESS] Wrote histograms.csv and jsd.json to {out_dir}", fg='green')


@cli.command()
@click.option('--variant', 'variants', multiple=True, type=click.Choice([v.value for v in Variant]),
              help='Variant(s) to check (default: all)')
@click.option('--seeds', type=int, default=10, show_default=True, help='Seeds per grid cell')
@click.option('--step', type=float, default=DEFAULT_STEP, show_default=True)
@click.option('--tolerance', type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option('--temperature', type=float, default=0.5, show_default=True)
@click.option('--beta', type=float, default=0.5, show_default=True)
@click.option('--tau-plus', type=float, default=0.5, show_default=True)
@click.option('--positive-sign', type=click.Choice([s.value for s in PositiveSign]),
              default=PositiveSign.UPWEIGHT_SIMILAR.value, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), help='Write per-case results as JSON')
@reports_errors
def gradcheck(variants, seeds, step, tolerance, temperature, beta, tau_plus, positive_sign, out):
    """Compare analytic gradients of every loss with central finite differences."""
    base = LossConfig(
        temperature=temperature, beta=beta, tau_plus=tau_plus, positive_beta_sign=positive_sign
    )
    results = gradcheck_grid(
        base,
        variants=variants or tuple(Variant),
        seeds=range(seeds),
        step=step,
        tolerance=tolerance,
    )
    failed = [r for r in results if not r.passed]
    by_variant = {}
    for r in results:
        by_variant[r.variant] = max(by_variant.get(r.variant, 0.0), r.max_relative_error)
    for variant, error in by_variant.items():
        colour = 'green' if error < tolerance else 'red'
        click.secho(f"  {variant:<24} max relative error {error:.2e}", fg=colour)
    if out:
        write_json(out, stamp({'tolerance': tolerance, 'results': [r.to_dict() for r in results]},
                              _timestamp()))
    if failed:
        click.secho(f"[ERROR] {len(failed)} of {len(results)} cases exceed {tolerance:g}",
                    fg='red', err=True)
        sys.exit(1)
    click.secho(f"[SUCCESS] {len(results)} cases within {tolerance:g}", fg='green')


@cli.command()
def schema():
    """Print the JSON Schema of experiment config files."""
    click.echo(json.dumps(json_schema(), indent=2))


cli.add_command(sweep, name='sweep')
