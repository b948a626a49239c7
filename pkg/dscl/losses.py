"""Contrastive objectives with analytic gradients.

Every loss is a mean over anchors of a per-anchor term that depends only on
the anchor's row of the similarity matrix, split into positives (same
assigned label, self excluded) and negatives (different assigned label).
Kernels return the term and its derivative with respect to those
similarities; :func:`evaluate` scatters the derivatives into an ``n x n``
matrix and maps it back to the embedding rows.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyInput,
    EmptyNegatives,
    EmptyPositives,
    NoNegatives,
    NoPositives,
)
from .numerics import EmbeddingBatch, project_tangent, sim_matrix

logger = logging.getLogger(__name__)

_TINY = float(np.finfo(np.float64).tiny)


class Variant(str, Enum):
    INFO_NCE = "info_nce"
    SUPCON_IN = "supcon_in"
    SUPCON_OUT = "supcon_out"
    SUPCON_IN_REFORMULATED = "supcon_in_reformulated"
    DSCL_POS_ONLY = "dscl_pos_only"
    DSCL_NEG_ONLY = "dscl_neg_only"
    DSCL_FULL = "dscl_full"

    @property
    def is_debiased(self):
        return self in DEBIASED_VARIANTS

    @property
    def needs_negatives(self):
        return self in DEBIASED_VARIANTS or self is Variant.INFO_NCE


DEBIASED_VARIANTS = (Variant.DSCL_POS_ONLY, Variant.DSCL_NEG_ONLY, Variant.DSCL_FULL)


class PositiveSign(str, Enum):
    """Sign of the concentration exponent used to reweight positives."""

    HARD_POSITIVE = "hard_positive"          # e^{-beta s}: easy positives count less
    UPWEIGHT_SIMILAR = "upweight_similar"    # e^{+beta s}, as in the estimator formulas

    @property
    def sigma(self):
        return -1.0 if self is PositiveSign.HARD_POSITIVE else 1.0


class Weighting(str, Enum):
    """How the Q and W weights enter the per-anchor ratio."""

    CONSTANT = "constant"
    BATCH_COUNTS = "batch_counts"            # Q*M and W*N, M/N = positive/negative counts


@dataclass(frozen=True)
class LossConfig:
    """Loss variant selector plus every debiasing hyperparameter."""

    variant: Variant = Variant.SUPCON_IN
    temperature: float = 0.5
    beta: float = 0.5
    tau_plus: float = 0.03
    tau_minus: Optional[float] = None
    q_weight: float = 1.0
    w_weight: float = 1.0
    weighting: Weighting = Weighting.BATCH_COUNTS
    clamp_floor: Optional[float] = None
    positive_beta_sign: PositiveSign = PositiveSign.UPWEIGHT_SIMILAR
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        object.__setattr__(self, "positive_beta_sign", PositiveSign(self.positive_beta_sign))
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.tau_plus <= 1.0:
            raise ConfigError(f"tau_plus must lie in [0, 1], got {self.tau_plus}")
        if self.tau_minus is not None and not 0.0 <= self.tau_minus <= 1.0:
            raise ConfigError(f"tau_minus must lie in [0, 1], got {self.tau_minus}")
        if self.tau_plus == 0.0 and self.tau_minus_value == 0.0:
            raise ConfigError("tau_plus and tau_minus cannot both be zero")
        if not (self.q_weight > 0 and self.w_weight > 0):
            raise ConfigError("q_weight and w_weight must be positive")
        if self.clamp_floor is not None and not self.clamp_floor > 0:
            raise ConfigError(f"clamp_floor must be positive, got {self.clamp_floor}")

    @property
    def tau_minus_value(self):
        return 1.0 - self.tau_plus if self.tau_minus is None else self.tau_minus

    @property
    def clamp_value(self):
        if self.clamp_floor is not None:
            return self.clamp_floor
        return max(math.exp(-1.0 / self.temperature) * 1e-3, _TINY)

    @property
    def display_name(self):
        return self.name or self.variant.value

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class LossDiagnostics:
    """Per-anchor estimator values (NaN for rows that were not anchors)."""

    anchors: np.ndarray
    positive_estimates: np.ndarray
    negative_estimates: np.ndarray
    positive_clamp_hits: int = 0
    negative_clamp_hits: int = 0
    debiased_terms: int = 0
    min_clamp_margin: float = float("inf")

    @property
    def clamp_hits(self):
        return self.positive_clamp_hits + self.negative_clamp_hits

    @property
    def clamp_hit_rate(self):
        return self.clamp_hits / self.debiased_terms if self.debiased_terms else 0.0


@dataclass
class LossOutput:
    """Scalar loss with its Euclidean gradient with respect to the rows.

    ``projected_gradient`` is the same gradient with each row's radial
    component removed, i.e. the gradient on the unit sphere.
    """

    value: float
    gradient: np.ndarray
    projected_gradient: np.ndarray = field(repr=False)
    diagnostics: LossDiagnostics = field(repr=False)


@dataclass
class DebiasedMean:
    """A clamped debiased estimate; ``raw`` is the value before clamping."""

    value: float
    raw: float
    clamped: bool

    def __float__(self):
        return float(self.value)


@dataclass
class _Term:
    value: float
    d_pos: np.ndarray
    d_neg: np.ndarray
    positive_estimate: float = float("nan")
    negative_estimate: float = float("nan")
    positive_clamped: bool = False
    negative_clamped: bool = False
    debiased_terms: int = 0
    clamp_margin: float = float("inf")


def _importance_mean(sims, exponent, shift=0.0):
    """Self-normalized estimate of E_q[e^s] with q proportional to e^{exponent*s}.

    Equals (1/M) sum e^{(exponent+1) s} / Zhat with Zhat = (1/M) sum e^{exponent s}.
    The value is reported in units of e^{shift}. Returns the value and its
    derivative with respect to ``sims``.
    """
    weights = softmax(exponent * sims)
    expd = np.exp(sims - shift)
    value = float(np.dot(weights, expd))
    grad = weights * ((1.0 + exponent) * expd - exponent * value)
    return value, grad


def _log_plain_mean(sims):
    """log of mean(e^s) and its gradient, softmax(s)."""
    return float(logsumexp(sims) - math.log(sims.size)), softmax(sims)


def _info_nce_term(s_pos, s_neg, cfg=None):
    # one InfoNCE term per positive, each against all negatives
    k = s_pos.size
    log_neg = logsumexp(s_neg)
    log_denoms = np.logaddexp(s_pos, log_neg)
    value = float(np.mean(log_denoms - s_pos))
    d_pos = (np.exp(s_pos - log_denoms) - 1.0) / k
    d_neg = np.exp(s_neg[:, None] - log_denoms[None, :]).sum(axis=1) / k
    return _Term(value, d_pos, d_neg)


def _supcon_ratio_term(s_pos, s_neg, shift):
    log_pos = logsumexp(s_pos)
    log_all = logsumexp(np.concatenate([s_pos, s_neg]))
    value = float(log_all - log_pos + shift)
    d_pos = np.exp(s_pos - log_all) - np.exp(s_pos - log_pos)
    d_neg = np.exp(s_neg - log_all)
    return _Term(value, d_pos, d_neg)


def _supcon_in_term(s_pos, s_neg, cfg=None):
    return _supcon_ratio_term(s_pos, s_neg, math.log(s_pos.size))


def _supcon_reformulated_term(s_pos, s_neg, cfg=None):
    return _supcon_ratio_term(s_pos, s_neg, 0.0)


def _supcon_out_term(s_pos, s_neg, cfg=None):
    log_all = logsumexp(np.concatenate([s_pos, s_neg]))
    value = float(log_all - np.mean(s_pos))
    d_pos = np.exp(s_pos - log_all) - 1.0 / s_pos.size
    d_neg = np.exp(s_neg - log_all)
    return _Term(value, d_pos, d_neg)


@dataclass
class _Side:
    """One debiased estimate as a log value with gradients of that log.

    ``raw`` is the unclamped estimate in units of e^{shift}. ``margin`` is the
    distance of the raw value from the clamp floor, relative to the size of
    the two terms whose difference forms it.
    """

    log_value: float
    raw: float
    clamped: bool
    d_pos: np.ndarray
    d_neg: np.ndarray
    margin: float


def _clamped_side(raw, scale, d_pos, d_neg, shift, cfg):
    log_floor = math.log(cfg.clamp_value)
    with np.errstate(over="ignore"):
        floor = float(np.exp(log_floor - shift))
    margin = abs(raw - floor) / scale if scale > 0 else 0.0
    if raw <= 0.0 or math.log(raw) + shift <= log_floor:
        return _Side(log_floor, raw, True, np.zeros_like(d_pos), np.zeros_like(d_neg), margin)
    return _Side(math.log(raw) + shift, raw, False, d_pos / raw, d_neg / raw, margin)


def _debiased_positive(s_pos, s_neg, cfg, shift=0.0):
    """g+ = max(floor, (E_q[e^s+] - tau+ E_q-[e^s-]) / tau-) and its log-gradients.

    tau+ is the share of the positive set assumed to be mislabelled; with
    tau- == 0 the uncorrected importance-weighted mean is used.
    """
    tau_minus = cfg.tau_minus_value
    ep, dep = _importance_mean(s_pos, cfg.positive_beta_sign.sigma * cfg.beta, shift)
    if tau_minus == 0.0:
        return _clamped_side(ep, ep, dep, np.zeros_like(s_neg), shift, cfg)
    en, den = _importance_mean(s_neg, cfg.beta, shift)
    raw = (ep - cfg.tau_plus * en) / tau_minus
    scale = (ep + cfg.tau_plus * en) / tau_minus
    return _clamped_side(
        raw, scale, dep / tau_minus, -cfg.tau_plus * den / tau_minus, shift, cfg
    )


def _debiased_negative(s_pos, s_neg, cfg, shift=0.0):
    """g- = max(floor, (E_q[e^s-] - tau+ E_q+[e^s+]) / tau-) and its log-gradients.

    With tau_minus == 0 the labelling is declared clean and the uncorrected
    importance-weighted mean is used.
    """
    tau_minus = cfg.tau_minus_value
    en, den = _importance_mean(s_neg, cfg.beta, shift)
    if tau_minus == 0.0:
        return _clamped_side(en, en, np.zeros_like(s_pos), den, shift, cfg)
    eb, deb = _importance_mean(s_pos, cfg.beta, shift)
    raw = (en - cfg.tau_plus * eb) / tau_minus
    scale = (en + cfg.tau_plus * eb) / tau_minus
    return _clamped_side(
        raw, scale, -cfg.tau_plus * deb / tau_minus, den / tau_minus, shift, cfg
    )


def _dscl_term(s_pos, s_neg, cfg):
    # every sum is taken relative to the row maximum; the ratio is shift-free
    variant = cfg.variant
    term = _Term(0.0, None, None)
    shift = float(max(s_pos.max(), s_neg.max()))

    if variant in (Variant.DSCL_POS_ONLY, Variant.DSCL_FULL):
        side = _debiased_positive(s_pos, s_neg, cfg, shift)
        log_pos, dpos_pos, dpos_neg = side.log_value, side.d_pos, side.d_neg
        term.positive_clamped = side.clamped
        term.clamp_margin = min(term.clamp_margin, side.margin)
        term.debiased_terms += 1
    else:
        log_pos, dpos_pos = _log_plain_mean(s_pos)
        dpos_neg = np.zeros_like(s_neg)

    if variant in (Variant.DSCL_NEG_ONLY, Variant.DSCL_FULL):
        side = _debiased_negative(s_pos, s_neg, cfg, shift)
        log_neg, dneg_pos, dneg_neg = side.log_value, side.d_pos, side.d_neg
        term.negative_clamped = side.clamped
        term.clamp_margin = min(term.clamp_margin, side.margin)
        term.debiased_terms += 1
    else:
        log_neg, dneg_neg = _log_plain_mean(s_neg)
        dneg_pos = np.zeros_like(s_pos)

    q, w = cfg.q_weight, cfg.w_weight
    if cfg.weighting is Weighting.BATCH_COUNTS:
        q, w = q * s_pos.size, w * s_neg.size

    # log(1 + W g- / (Q g+)) = softplus(r)
    r = math.log(w) + log_neg - math.log(q) - log_pos
    share = float(expit(r))
    term.value = float(np.logaddexp(0.0, r))
    term.d_pos = share * (dneg_pos - dpos_pos)
    term.d_neg = share * (dneg_neg - dpos_neg)
    with np.errstate(over="ignore"):
        term.positive_estimate = float(np.exp(log_pos))
        term.negative_estimate = float(np.exp(log_neg))
    return term


_KERNELS = {
    Variant.INFO_NCE: _info_nce_term,
    Variant.SUPCON_IN: _supcon_in_term,
    Variant.SUPCON_OUT: _supcon_out_term,
    Variant.SUPCON_IN_REFORMULATED: _supcon_reformulated_term,
    Variant.DSCL_POS_ONLY: _dscl_term,
    Variant.DSCL_NEG_ONLY: _dscl_term,
    Variant.DSCL_FULL: _dscl_term,
}


def valid_anchors(labels, need_negatives=True):
    """Indices of rows with at least one positive (and one negative if asked)."""
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    positives = same.sum(axis=1) - 1
    negatives = labels.size - positives - 1
    ok = positives > 0
    if need_negatives:
        ok &= negatives > 0
    return np.flatnonzero(ok)


def _assemble(sims, vectors, temperature, pairs, kernel, cfg):
    """Run ``kernel`` for each ``(anchor, positives, negatives)`` and build the output."""
    n = vectors.shape[0]
    grad_sims = np.zeros((n, n))
    values = []
    anchors = []
    pos_est = np.full(n, np.nan)
    neg_est = np.full(n, np.nan)
    pos_hits = neg_hits = terms = 0
    margin = float("inf")

    for anchor, pos, neg in pairs:
        term = kernel(sims[anchor, pos], sims[anchor, neg], cfg)
        grad_sims[anchor, pos] += term.d_pos
        grad_sims[anchor, neg] += term.d_neg
        values.append(term.value)
        anchors.append(anchor)
        pos_est[anchor] = term.positive_estimate
        neg_est[anchor] = term.negative_estimate
        pos_hits += int(term.positive_clamped)
        neg_hits += int(term.negative_clamped)
        terms += term.debiased_terms
        margin = min(margin, term.clamp_margin)

    count = len(values)
    grad_sims /= count
    gradient = (grad_sims + grad_sims.T) @ vectors / temperature
    diagnostics = LossDiagnostics(
        anchors=np.asarray(anchors, dtype=np.int64),
        positive_estimates=pos_est,
        negative_estimates=neg_est,
        positive_clamp_hits=pos_hits,
        negative_clamp_hits=neg_hits,
        debiased_terms=terms,
        min_clamp_margin=margin,
    )
    return LossOutput(
        value=math.fsum(values) / count,
        gradient=gradient,
        projected_gradient=project_tangent(gradient, vectors),
        diagnostics=diagnostics,
    )


def _batch_pairs(labels, anchors, need_negatives):
    index = np.arange(labels.size)
    for anchor in anchors:
        same = labels == labels[anchor]
        pos = np.flatnonzero(same & (index != anchor))
        neg = np.flatnonzero(~same)
        if pos.size == 0:
            raise NoPositives(int(anchor))
        if need_negatives and neg.size == 0:
            raise NoNegatives(int(anchor))
        yield int(anchor), pos, neg


def evaluate(batch, cfg, anchors=None):
    """Loss value, gradient and diagnostics of ``cfg.variant`` on ``batch``.

    ``anchors`` restricts which rows contribute anchor terms; every row still
    takes part as a positive or negative of the others.
    """
    if batch.temperature != cfg.temperature:
        batch = batch.with_temperature(cfg.temperature)
    labels = batch.assigned
    if anchors is None:
        anchors = range(batch.n)
    anchors = list(anchors)
    if not anchors:
        raise EmptyInput("no anchors to evaluate")
    sims = sim_matrix(batch.embeddings, batch.embeddings)
    pairs = _batch_pairs(labels, anchors, cfg.variant.needs_negatives)
    output = _assemble(sims, batch.vectors, cfg.temperature, pairs, _KERNELS[cfg.variant], cfg)
    logger.debug(
        "%s: loss=%.6f anchors=%d clamp_hits=%d",
        cfg.display_name, output.value, len(anchors), output.diagnostics.clamp_hits,
    )
    return output


def info_nce(anchor, positive, negatives, temperature):
    """InfoNCE for one anchor, one positive and N negatives.

    The gradient rows are ordered ``[anchor, positive, negatives...]``.
    """
    anchor = np.asarray(anchor, dtype=np.float64).reshape(1, -1)
    positive = np.asarray(positive, dtype=np.float64).reshape(1, -1)
    if anchor.shape[1] != positive.shape[1] or anchor.shape[1] != negatives.dim:
        raise DimensionMismatch("anchor, positive and negatives must share a dimension")
    if negatives.n < 1:
        raise EmptyNegatives("info_nce needs at least one negative")
    stacked = EmbeddingBatch(np.vstack([anchor, positive, negatives.vectors]), temperature)
    sims = sim_matrix(stacked, stacked)
    pairs = [(0, np.array([1]), np.arange(2, stacked.n))]
    return _assemble(sims, stacked.vectors, temperature, pairs, _info_nce_term, None)


def _with_variant(cfg, variant):
    return cfg if cfg.variant is variant else cfg.replace(variant=variant)


def supcon_in(batch, cfg, anchors=None):
    return evaluate(batch, _with_variant(cfg, Variant.SUPCON_IN), anchors)


def supcon_out(batch, cfg, anchors=None):
    return evaluate(batch, _with_variant(cfg, Variant.SUPCON_OUT), anchors)


def supcon_in_reformulated(batch, cfg, anchors=None):
    """SupCon-in without the constant ``log K`` inside the logarithm."""
    return evaluate(batch, _with_variant(cfg, Variant.SUPCON_IN_REFORMULATED), anchors)


def dscl_loss(batch, cfg, anchors=None):
    """Debiased supervised contrastive loss; ``cfg.variant`` picks the ablation."""
    if not cfg.variant.is_debiased:
        raise ConfigError(f"dscl_loss needs a debiased variant, got {cfg.variant.value}")
    return evaluate(batch, cfg, anchors)


def loss_gradient(batch, cfg, anchors=None):
    """Tangent-space gradient of the configured loss (unit-norm constraint)."""
    return evaluate(batch, cfg, anchors).projected_gradient


def _anchor_sims(anchor, others, cfg):
    # the config temperature governs, as in evaluate()
    anchor = np.asarray(anchor, dtype=np.float64).reshape(-1)
    if anchor.size != others.dim:
        raise DimensionMismatch(f"anchor dimension {anchor.size} vs {others.dim}")
    return others.vectors @ anchor / cfg.temperature


def partition_estimate_pos(anchor, positives, cfg):
    """Zhat(x) = (1/M) sum e^{sigma beta s+}."""
    if positives is None or positives.n < 1:
        raise EmptyPositives("partition estimate needs at least one positive")
    sims = _anchor_sims(anchor, positives, cfg)
    return float(np.mean(np.exp(cfg.positive_beta_sign.sigma * cfg.beta * sims)))


def partition_estimate_neg(anchor, negatives, cfg):
    """Zhat-(x) = (1/N) sum e^{beta s-}."""
    if negatives is None or negatives.n < 1:
        raise EmptyNegatives("partition estimate needs at least one negative")
    sims = _anchor_sims(anchor, negatives, cfg)
    return float(np.mean(np.exp(cfg.beta * sims)))


def _split_sims(anchor, positives, negatives, cfg):
    if positives is None or positives.n < 1:
        raise EmptyPositives("debiased mean needs at least one positive")
    if negatives is None or negatives.n < 1:
        raise EmptyNegatives("debiased mean needs at least one negative")
    return _anchor_sims(anchor, positives, cfg), _anchor_sims(anchor, negatives, cfg)


def _public_mean(side, cfg):
    # sides built without a shift carry raw in absolute units
    return DebiasedMean(cfg.clamp_value if side.clamped else side.raw, side.raw, side.clamped)


def debiased_positive_mean(anchor, positives, negatives, cfg):
    s_pos, s_neg = _split_sims(anchor, positives, negatives, cfg)
    side = _debiased_positive(s_pos, s_neg, cfg)
    return _public_mean(side, cfg)


def debiased_negative_mean(anchor, positives, negatives, cfg):
    s_pos, s_neg = _split_sims(anchor, positives, negatives, cfg)
    side = _debiased_negative(s_pos, s_neg, cfg)
    return _public_mean(side, cfg)
