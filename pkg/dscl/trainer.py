"""Encoder training with a contrastive loss, linear-probe evaluation and seed comparisons."""

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax

from .data_synth import make_dataset
from .encoder import Encoder, OptimizerConfig
from .errors import ConfigError, DegenerateBatch, NonFiniteLoss, SingleClassSplit
from .losses import LossConfig, evaluate, valid_anchors
from .numerics import EmbeddingBatch, LabeledBatch, SeededRng

logger = logging.getLogger(__name__)

PROBE_LR = 0.1
PROBE_MAX_ITER = 2000
PROBE_TOL = 1e-6

# streams of shuffle_seed
_SHUFFLE_STREAM, _EVAL_STREAM, _PROBE_STREAM = 0, 1, 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    shuffle_seed: int
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    eval_every: int = 1
    eval_size: int = 256
    max_resample: int = 100
    probe_fraction: float = 0.5

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 4:
            raise ConfigError(f"batch_size must be >= 4, got {self.batch_size}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.eval_size < 4:
            raise ConfigError(f"eval_size must be >= 4, got {self.eval_size}")
        if self.max_resample < 0:
            raise ConfigError("max_resample must be >= 0")
        if not 0.0 < self.probe_fraction < 1.0:
            raise ConfigError(f"probe_fraction must lie in (0, 1), got {self.probe_fraction}")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class RunReport:
    loss_history: List[float]
    train_loss_history: List[float]
    probe_accuracy: float
    probe_accuracy_clean_latent: Optional[float]
    clamp_hit_rate: float
    wall_time: float = 0.0

    def to_dict(self, include_timing=True):
        record = asdict(self)
        if not include_timing:
            record.pop("wall_time")
        return record


def loss_and_gradients(encoder, inputs, assigned, loss_cfg, anchors=None):
    """Loss of the encoded batch and its gradient with respect to every parameter."""
    z, cache = encoder.forward(inputs)
    batch = LabeledBatch(EmbeddingBatch(z, loss_cfg.temperature), assigned)
    output = evaluate(batch, loss_cfg, anchors)
    return output, encoder.backward(cache, output.gradient)


def _usable(labels, loss_cfg):
    if np.unique(labels).size < 2:
        return None
    anchors = valid_anchors(labels, loss_cfg.variant.needs_negatives)
    return anchors if anchors.size else None


def _batches(data, cfg, gen):
    """Shuffled batches of one epoch; unusable batches are redrawn at random."""
    order = gen.permutation(data.n)
    for start in range(0, data.n, cfg.batch_size):
        index = order[start:start + cfg.batch_size]
        if index.size < 4:
            continue
        anchors = _usable(data.assigned[index], cfg.loss)
        tries = 0
        while anchors is None:
            if tries >= cfg.max_resample:
                raise DegenerateBatch(
                    f"no batch with two classes and a valid anchor after {tries} draws"
                )
            index = gen.choice(data.n, size=min(cfg.batch_size, data.n), replace=False)
            anchors = _usable(data.assigned[index], cfg.loss)
            tries += 1
        yield index, anchors


def _eval_partition(data, cfg):
    gen = SeededRng(cfg.shuffle_seed, _EVAL_STREAM).generator
    index = np.sort(gen.permutation(data.n)[:min(cfg.eval_size, data.n)])
    anchors = _usable(data.assigned[index], cfg.loss)
    if anchors is None:
        raise DegenerateBatch("evaluation partition has no valid anchor")
    return index, anchors


def _check_finite(output, epoch, step):
    if math.isfinite(output.value) and np.all(np.isfinite(output.gradient)):
        return
    diag = output.diagnostics
    raise NonFiniteLoss(
        f"non-finite loss at epoch {epoch}, step {step}",
        {
            "epoch": epoch,
            "step": step,
            "value": output.value,
            "clamp_hits": diag.clamp_hits,
            "anchors": int(diag.anchors.size),
        },
    )


def train(data, enc, cfg):
    """Fit a fresh encoder on ``data`` (raw inputs with assigned labels).

    Returns the trained encoder and its :class:`RunReport`. Probe accuracies
    are measured on the embeddings of all of ``data``.
    """
    started = time.perf_counter()
    if data.vectors.shape[1] != enc.input_dim:
        raise ConfigError(f"data has dim {data.vectors.shape[1]}, encoder expects {enc.input_dim}")
    if data.n < 4:
        raise ConfigError(f"need at least 4 samples to train, got {data.n}")
    encoder = Encoder(enc)
    optimizer = cfg.optimizer.build()
    gen = SeededRng(cfg.shuffle_seed, _SHUFFLE_STREAM).generator
    eval_index, eval_anchors = _eval_partition(data, cfg)

    loss_history, train_history = [], []
    clamp_hits = debiased_terms = 0
    for epoch in range(1, cfg.epochs + 1):
        epoch_losses = []
        for step, (index, anchors) in enumerate(_batches(data, cfg, gen)):
            output, grads = loss_and_gradients(
                encoder, data.vectors[index], data.assigned[index], cfg.loss, anchors
            )
            _check_finite(output, epoch, step)
            optimizer.step(encoder.params, grads)
            epoch_losses.append(output.value)
            clamp_hits += output.diagnostics.clamp_hits
            debiased_terms += output.diagnostics.debiased_terms
        if epoch % cfg.eval_every == 0:
            z, _ = encoder.forward(data.vectors[eval_index])
            batch = LabeledBatch(EmbeddingBatch(z, cfg.loss.temperature), data.assigned[eval_index])
            eval_output = evaluate(batch, cfg.loss, eval_anchors)
            _check_finite(eval_output, epoch, -1)
            loss_history.append(eval_output.value)
            train_history.append(math.fsum(epoch_losses) / len(epoch_losses))
            logger.info(
                "%s epoch %d: eval loss %.5f, train loss %.5f",
                cfg.loss.display_name, epoch, loss_history[-1], train_history[-1],
            )

    embeddings = encoder.embed(data.vectors, cfg.loss.temperature)
    # both probes use the same split
    probe = linear_probe(
        embeddings, data.assigned, cfg.probe_fraction, SeededRng(cfg.shuffle_seed, _PROBE_STREAM)
    )
    probe_latent = None
    if data.has_latent:
        probe_latent = linear_probe(
            embeddings, data.latent, cfg.probe_fraction, SeededRng(cfg.shuffle_seed, _PROBE_STREAM)
        )
    report = RunReport(
        loss_history=loss_history,
        train_loss_history=train_history,
        probe_accuracy=probe,
        probe_accuracy_clean_latent=probe_latent,
        clamp_hit_rate=clamp_hits / debiased_terms if debiased_terms else 0.0,
        wall_time=time.perf_counter() - started,
    )
    return encoder, report


@dataclass
class LinearProbe:
    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray
    iterations: int
    loss: float

    def predict(self, x):
        return self.classes[np.argmax(x @ self.weights + self.bias, axis=1)]


def _probe_loss(x, targets, weights, bias):
    logits = x @ weights + bias
    return float(np.mean(logsumexp(logits, axis=1) - logits[np.arange(x.shape[0]), targets]))


def fit_linear_probe(x, labels, lr=PROBE_LR, max_iter=PROBE_MAX_ITER, tol=PROBE_TOL):
    """Multinomial logistic regression by full-batch gradient descent."""
    x = np.asarray(x, dtype=np.float64)
    classes, targets = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise SingleClassSplit(f"probe training split has only class(es) {classes.tolist()}")
    n, k = x.shape[0], classes.size
    onehot = np.eye(k)[targets]
    weights = np.zeros((x.shape[1], k))
    bias = np.zeros(k)
    loss = _probe_loss(x, targets, weights, bias)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        residual = (softmax(x @ weights + bias, axis=1) - onehot) / n
        weights -= lr * (x.T @ residual)
        bias -= lr * residual.sum(axis=0)
        new_loss = _probe_loss(x, targets, weights, bias)
        if abs(loss - new_loss) < tol:
            loss = new_loss
            break
        loss = new_loss
    logger.debug("probe converged after %d iterations, loss %.6f", iterations, loss)
    return LinearProbe(weights, bias, classes, iterations, loss)


def split_indices(n, train_fraction, rng):
    if n < 2:
        raise ConfigError("need at least two samples to split")
    order = rng.generator.permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return order[:n_train], order[n_train:]


def linear_probe(embeddings, labels, train_fraction=0.5, seed=0):
    """Held-out top-1 accuracy of a linear classifier on frozen embeddings.

    ``seed`` is an integer or a :class:`SeededRng`; test labels never seen in
    training count as errors.
    """
    rng = seed if isinstance(seed, SeededRng) else SeededRng(seed)
    vectors = embeddings.vectors if isinstance(embeddings, EmbeddingBatch) else np.asarray(embeddings)
    labels = np.asarray(labels).reshape(-1)
    train_idx, test_idx = split_indices(labels.size, train_fraction, rng)
    probe = fit_linear_probe(vectors[train_idx], labels[train_idx])
    return float(np.mean(probe.predict(vectors[test_idx]) == labels[test_idx]))


@dataclass
class ComparisonResult:
    runs: pd.DataFrame
    summary: pd.DataFrame
    reports: list = field(default_factory=list)


def _unique_names(losses):
    names, seen = [], {}
    for cfg in losses:
        name = cfg.display_name
        seen[name] = seen.get(name, 0) + 1
        names.append(name if seen[name] == 1 else f"{name}#{seen[name]}")
    return names


def summarize(runs, by=("loss",)):
    """Median and interquartile range of probe accuracy per group."""
    grouped = runs.groupby(list(by), sort=False)
    summary = grouped.agg(
        runs=("seed", "size"),
        median_latent=("probe_accuracy_latent", "median"),
        q25_latent=("probe_accuracy_latent", lambda s: s.quantile(0.25)),
        q75_latent=("probe_accuracy_latent", lambda s: s.quantile(0.75)),
        median_assigned=("probe_accuracy", "median"),
        median_clamp_hit_rate=("clamp_hit_rate", "median"),
    ).reset_index()
    summary["iqr_latent"] = summary["q75_latent"] - summary["q25_latent"]
    return summary


def run_comparison(dataset, losses, train_cfg, enc, n_seeds):
    """Train every loss on ``n_seeds`` seed offsets of the same setup.

    Seed index ``k`` shifts every dataset, init and shuffle seed by ``k``.
    """
    if n_seeds < 3:
        raise ConfigError(f"n_seeds must be >= 3, got {n_seeds}")
    losses = list(losses)
    if not losses:
        raise ConfigError("no losses to compare")
    names = _unique_names(losses)
    rows, reports = [], []
    for k in range(n_seeds):
        data = make_dataset(dataset.with_seed_offset(k)).batch
        for name, loss_cfg in zip(names, losses):
            cfg = train_cfg.replace(loss=loss_cfg, shuffle_seed=train_cfg.shuffle_seed + k)
            _, report = train(data, enc.with_seed_offset(k), cfg)
            reports.append({"loss": name, "seed": k, "report": report})
            rows.append(
                {
                    "loss": name,
                    "variant": loss_cfg.variant.value,
                    "seed": k,
                    "probe_accuracy": report.probe_accuracy,
                    "probe_accuracy_latent": report.probe_accuracy_clean_latent,
                    "clamp_hit_rate": report.clamp_hit_rate,
                    "final_loss": report.loss_history[-1] if report.loss_history else None,
                }
            )
            logger.info(
                "seed %d %s: latent probe accuracy %s", k, name, report.probe_accuracy_clean_latent
            )
    runs = pd.DataFrame(rows)
    return ComparisonResult(runs, summarize(runs), reports)
