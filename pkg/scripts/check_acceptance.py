#!/usr/bin/env python3
"""
Run the acceptance checks end to end and write a JSON + markdown report.

Usage: python scripts/check_acceptance.py [--full]

--full adds the training-based checks (noise robustness, tau-plus
sensitivity, similarity overlap), which take several minutes.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dscl.data_synth import NoiseMechanism, SyntheticDatasetSpec, make_dataset
from dscl.encoder import EncoderKind, EncoderSpec, OptimizerConfig
from dscl.experiments import DEFAULT_TAU_PLUS_VALUES, tau_plus_sweep
from dscl.gradcheck import gradcheck_grid, random_batch
from dscl.losses import (
    LossConfig,
    Variant,
    Weighting,
    debiased_positive_mean,
    dscl_loss,
    supcon_in,
    supcon_in_reformulated,
)
from dscl.noise_analysis import (
    PRESETS,
    false_negative_rate,
    false_positive_rate,
    simulate_pair_outcomes,
)
from dscl.numerics import EmbeddingBatch, SeededRng
from dscl.similarity import PairCategory, overlap_report, comparison_key
from dscl.trainer import TrainConfig, run_comparison


def check_noise_rates():
    """FP/FN closed forms against the reported ranges and a 10^7-pair simulation."""
    details = {}
    ok = True
    ranges = {"cifar100": ((0.108, 0.119), (0.0010, 0.0013)), "imagenet": ((0.108, 0.118), None)}
    for name, (fp_range, fn_range) in ranges.items():
        spec = PRESETS[name]
        fp, fn = false_positive_rate(spec), false_negative_rate(spec)
        sim = simulate_pair_outcomes(spec, 10_000_000, SeededRng(1))
        fp_ok = fp_range[0] <= fp <= fp_range[1] and abs(sim.fp_rate - fp) <= 4 * sim.fp_se
        fn_ok = (fn_range is None or fn_range[0] <= fn <= fn_range[1]) and abs(sim.fn_rate - fn) <= 4 * sim.fn_se
        ok = ok and fp_ok and fn_ok
        details[name] = {"fp_rate": fp, "fn_rate": fn, "simulated": sim.to_dict()}
    return ok, details


def check_gradients():
    results = gradcheck_grid()
    worst = max(r.max_relative_error for r in results)
    return all(r.passed for r in results), {"cases": len(results), "max_relative_error": worst}


def check_reductions():
    """Debiased loss at beta=0, tau+=1 equals reformulated SupCon; SupCon-in differs by mean log K."""
    base = LossConfig(temperature=0.5)
    reduced = base.replace(
        variant=Variant.DSCL_FULL, beta=0.0, tau_plus=1.0, weighting=Weighting.BATCH_COUNTS
    )
    worst_reduction = worst_shift = 0.0
    for seed in range(100):
        batch = random_batch(8, 4, SeededRng(seed), base.temperature)
        reform = supcon_in_reformulated(batch, base).value
        worst_reduction = max(worst_reduction, abs(dscl_loss(batch, reduced).value - reform))
        counts = np.array([np.sum(batch.assigned == a) - 1 for a in batch.assigned])
        shift = supcon_in(batch, base).value - reform
        worst_shift = max(worst_shift, abs(shift - np.mean(np.log(counts))))
    ok = worst_reduction < 1e-9 and worst_shift < 1e-10
    return ok, {"max_reduction_gap": worst_reduction, "max_log_k_gap": worst_shift}


def check_importance_sampling():
    """Estimator equals the explicit expectation; its spread shrinks like 1/sqrt(M)."""
    # tau_plus = 0 leaves the raw positive estimate as the plain importance mean
    cfg = LossConfig(temperature=1.0, beta=0.5, tau_plus=0.0)
    rng = SeededRng(7)
    gen = rng.generator
    anchor = np.eye(3)[0]
    worst = 0.0
    for _ in range(50):
        m = int(gen.integers(1, 17))
        positives = EmbeddingBatch.from_raw(gen.standard_normal((m, 3)))
        negatives = EmbeddingBatch.from_raw(gen.standard_normal((4, 3)))
        sims = positives.vectors @ anchor
        q = np.exp(cfg.positive_beta_sign.sigma * cfg.beta * sims)
        q /= q.sum()
        expected = float(np.sum(q * np.exp(sims)))
        got = debiased_positive_mean(anchor, positives, negatives, cfg).raw
        worst = max(worst, abs(got - expected))

    # pool members sit in the anchor's plane at the drawn cosines
    pool = gen.uniform(-0.5, 0.5, size=4096)
    negatives = EmbeddingBatch(np.array([[0.0, 1.0, 0.0]]))
    sizes = (2, 8, 32)
    spreads = []
    for size in sizes:
        estimates = []
        for _ in range(4000):
            c = gen.choice(pool, size=size)
            positives = EmbeddingBatch(np.column_stack([c, np.sqrt(1.0 - c ** 2), np.zeros(size)]))
            estimates.append(debiased_positive_mean(anchor, positives, negatives, cfg).raw)
        spreads.append(np.std(estimates))
    slope = float(np.polyfit(np.log(sizes), np.log(spreads), 1)[0])
    ok = worst < 1e-12 and -0.6 <= slope <= -0.4
    return ok, {"max_abs_error": worst, "se_slope": slope}


def _desk_setup(error_rate):
    dataset = SyntheticDatasetSpec(
        num_classes=10, dim=16, samples_per_class=200, concentration=10.0,
        centroid_seed=11, sample_seed=12, noise_seed=13, error_rate=error_rate,
        noise_mechanism=NoiseMechanism.CONFUSABLE,
    )
    encoder = EncoderSpec(16, 16, init_seed=21, kind=EncoderKind.MLP2, hidden_dim=32)
    train = TrainConfig(epochs=20, batch_size=64, shuffle_seed=31, optimizer=OptimizerConfig())
    return dataset, encoder, train


def _medians(result):
    return dict(zip(result.summary["loss"], result.summary["median_latent"]))


def check_robustness():
    base = LossConfig(temperature=0.5, beta=0.5, tau_plus=0.03)
    losses = [
        base.replace(variant=Variant.SUPCON_IN, name="supcon"),
        base.replace(variant=Variant.DSCL_NEG_ONLY, name="dscl_neg"),
        base.replace(variant=Variant.DSCL_FULL, name="dscl_full"),
    ]
    medians = {}
    for label, error_rate in (("noisy", 0.10), ("clean", 0.0)):
        dataset, encoder, train = _desk_setup(error_rate)
        medians[label] = _medians(run_comparison(dataset, losses, train, encoder, 7))
    noisy, clean = medians["noisy"], medians["clean"]
    ok = (
        noisy["dscl_full"] >= noisy["supcon"]
        and noisy["dscl_full"] >= noisy["dscl_neg"]
        and abs(clean["dscl_full"] - clean["supcon"]) < 0.02
    )
    return ok, {"noisy": noisy, "clean": clean}


def check_tau_plus():
    dataset, encoder, train = _desk_setup(0.10)
    base = LossConfig(temperature=0.5, beta=0.5)
    medians = _medians(tau_plus_sweep(dataset, base, train, encoder, 7, DEFAULT_TAU_PLUS_VALUES))
    baseline = medians.pop("no_correction")
    spread = max(medians.values()) - min(medians.values())
    ok = spread < 0.06 and all(v > baseline for v in medians.values())
    return ok, {"medians": medians, "baseline": baseline, "spread": spread}


def check_overlap():
    key_fp = comparison_key(PairCategory.TRUE_POS, PairCategory.FALSE_POS)
    key_tn = comparison_key(PairCategory.TRUE_POS, PairCategory.TRUE_NEG)
    wins = 0
    for seed in range(10):
        dataset, _, _ = _desk_setup(0.10)
        batch = make_dataset(dataset.with_seed_offset(seed)).batch
        table = overlap_report(batch).divergences
        if table[key_fp] is not None and table[key_fp] < table[key_tn]:
            wins += 1
    return wins >= 9, {"seeds_with_ordering": wins}


def generate_report(results):
    """Generate a markdown summary of the checks."""
    report = "## Acceptance Report\n\n"
    for name, result in results.items():
        status = "PASS" if result["passed"] else "FAIL"
        report += f"### {name}: {status}\n"
        report += f"**Runtime:** {result['seconds']:.1f}s\n\n"
        report += "```json\n" + json.dumps(result["details"], indent=2, default=str) + "\n```\n\n"
    failed = [n for n, r in results.items() if not r["passed"]]
    report += "---\n### Summary\n"
    report += f"- **Checks Run:** {len(results)}\n"
    report += f"- **Failures:** {len(failed)}\n"
    return report


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--full", action="store_true", help="include training-based checks")
    args = parser.parse_args()

    checks = {
        "noise_rates": check_noise_rates,
        "gradients": check_gradients,
        "reductions": check_reductions,
        "importance_sampling": check_importance_sampling,
    }
    if args.full:
        checks.update(
            {
                "noise_robustness": check_robustness,
                "tau_plus_sensitivity": check_tau_plus,
                "similarity_overlap": check_overlap,
            }
        )

    results = {}
    for name, check in checks.items():
        print(f"Running {name}...")
        started = time.perf_counter()
        passed, details = check()
        results[name] = {
            "passed": bool(passed),
            "seconds": time.perf_counter() - started,
            "details": details,
        }
        print(f"  {'PASS' if passed else 'FAIL'} ({results[name]['seconds']:.1f}s)")

    with open("acceptance_results.json", "w") as f:
        json.dump(results, f, indent=2, default=str)
    with open("acceptance_report.md", "w") as f:
        f.write(generate_report(results))

    print("\n" + "=" * 60)
    print("Acceptance Checks Complete")
    print("=" * 60)

    if not all(r["passed"] for r in results.values()):
        print("\nFAILED: see acceptance_report.md")
        sys.exit(1)

    print("\nAll checks passed!")
    sys.exit(0)


if __name__ == "__main__":
    main()
