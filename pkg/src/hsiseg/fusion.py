"""Fusing the spectral and RGB branches.

Two routes: pointwise multiplication (consensus, an AND-like intersection)
and a small learnable fusion. The learnable model is a pixelwise logistic
regression over [rgb, scf, rgb*scf] trained by full-batch gradient descent
on an equally weighted soft-Dice + cross-entropy loss with unlabeled pixels
masked out of every term. It is intentionally tiny: deterministic, fast, and
checkable against finite differences.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .rasters import SimilarityMap

log = logging.getLogger(__name__)

PROB_EPS = 1e-7
DICE_SMOOTH = 1.0


def intersect(map_rgb: SimilarityMap, map_scf: SimilarityMap) -> SimilarityMap:
    """Pointwise product of two maps; high only where both branches agree."""
    if map_rgb.data.shape != map_scf.data.shape:
        raise ValidationError(
            f"dimension mismatch: {map_rgb.data.shape} vs {map_scf.data.shape}"
        )
    return SimilarityMap(map_rgb.data.astype(np.float64) * map_scf.data.astype(np.float64))


def dice_ce_loss(
    pred: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray,
    eps: float = PROB_EPS,
    dice_smooth: float = DICE_SMOOTH,
) -> tuple[float, np.ndarray]:
    """Equally weighted soft-Dice + cross-entropy loss and its gradient.

    Masked elements (mask == 0) contribute nothing to either term and get a
    zero gradient. Predictions are clamped to [eps, 1-eps]; the gradient is
    zero wherever the clamp is active.

    Returns (loss, d loss / d pred) with the gradient elementwise.
    """
    p_raw = np.asarray(pred, dtype=np.float64).ravel()
    g = np.asarray(target, dtype=np.float64).ravel()
    m = np.asarray(mask, dtype=np.float64).ravel()
    if not (p_raw.size == g.size == m.size):
        raise ValidationError("pred, target, and mask must have equal length")

    m_sum = m.sum()
    if m_sum == 0:
        raise ValidationError("no labeled pixels")

    p = np.clip(p_raw, eps, 1.0 - eps)
    interior = (p_raw > eps) & (p_raw < 1.0 - eps)

    overlap = float((m * p * g).sum())
    p_sum = float((m * p).sum())
    g_sum = float((m * g).sum())
    numer = 2.0 * overlap + dice_smooth
    denom = p_sum + g_sum + dice_smooth
    dice_term = 1.0 - numer / denom

    ce_each = -(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))
    ce_term = float((m * ce_each).sum()) / m_sum

    loss = 0.5 * dice_term + 0.5 * ce_term

    d_dice = -m * (2.0 * g * denom - numer) / denom**2
    d_ce = -m * (g / p - (1.0 - g) / (1.0 - p)) / m_sum
    grad = (0.5 * d_dice + 0.5 * d_ce) * interior
    return loss, grad


@dataclass(frozen=True)
class TrainingBatch:
    """Per-pixel rows of [rgb, scf, rgb*scf] features with targets and a validity mask."""

    features: np.ndarray  # (n, 3)
    target: np.ndarray    # (n,) in {0, 1}
    mask: np.ndarray      # (n,) in {0, 1}

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        g = np.asarray(self.target, dtype=np.float64).ravel()
        m = np.asarray(self.mask, dtype=np.float64).ravel()
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError("features must have shape (n, 3)")
        if f.shape[0] != g.size or g.size != m.size:
            raise ValidationError("features, target, and mask must agree in length")
        if not np.isin(g, (0.0, 1.0)).all():
            raise ValidationError("targets must be 0 or 1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "target", g)
        object.__setattr__(self, "mask", m)

    @staticmethod
    def from_maps(
        map_rgb: SimilarityMap,
        map_scf: SimilarityMap,
        target: np.ndarray,
        valid: np.ndarray,
    ) -> "TrainingBatch":
        if map_rgb.data.shape != map_scf.data.shape or map_rgb.data.shape != target.shape:
            raise ValidationError("maps and target must share dimensions")
        return TrainingBatch(
            features=_feature_rows(map_rgb.data, map_scf.data),
            target=np.asarray(target, dtype=bool).ravel().astype(np.float64),
            mask=np.asarray(valid, dtype=bool).ravel().astype(np.float64),
        )


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.1
    seed: int = 0


@dataclass
class FusionModel:
    """Weights [w_rgb, w_scf, w_prod, bias] plus training metadata."""

    weights: np.ndarray
    epochs: int = 0
    final_loss: float = float("nan")
    seed: int = 0
    degenerate: bool = False
    loss_history: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.size != 4 or not np.all(np.isfinite(w)):
            raise ValidationError("fusion model needs 4 finite weights")
        self.weights = w

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": [float(w) for w in self.weights],
                "epochs": self.epochs,
                "final_loss": self.final_loss,
                "seed": self.seed,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "FusionModel":
        doc = json.loads(text)
        return FusionModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            epochs=int(doc["epochs"]),
            final_loss=float(doc["final_loss"]),
            seed=int(doc["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @staticmethod
    def load(path: str | Path) -> "FusionModel":
        return FusionModel.from_json(Path(path).read_text())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _feature_rows(rgb_values: np.ndarray, scf_values: np.ndarray) -> np.ndarray:
    a = np.asarray(rgb_values, dtype=np.float64).ravel()
    b = np.asarray(scf_values, dtype=np.float64).ravel()
    return np.column_stack([a, b, a * b])


def _scores(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # single code path for training and inference: identical rounding
    return _sigmoid(features @ weights[:3] + weights[3])


def train_logistic_fusion(
    batches: Sequence[TrainingBatch], config: TrainConfig | None = None
) -> FusionModel:
    """Full-batch gradient descent on the Dice + cross-entropy loss.

    Deterministic for a fixed seed and input order. Single-class data is not
    an error: the model trains anyway and comes back flagged as degenerate.
    """
    cfg = config or TrainConfig()
    if not batches:
        raise ValidationError("no training batches")
    x = np.concatenate([b.features for b in batches], axis=0)
    g = np.concatenate([b.target for b in batches])
    m = np.concatenate([b.mask for b in batches])
    if m.sum() == 0:
        raise ValidationError("no labeled pixels")

    labeled_targets = g[m > 0]
    degenerate = np.unique(labeled_targets).size < 2
    if degenerate:
        log.warning("train_logistic_fusion: single-class training data")

    rng = np.random.default_rng(cfg.seed)
    weights = rng.normal(0.0, 0.01, size=4)

    history = np.empty(cfg.epochs)
    loss = float("nan")
    for epoch in range(cfg.epochs):
        p = _scores(x, weights)
        loss, dl_dp = dice_ce_loss(p, g, m)
        history[epoch] = loss
        dl_dz = dl_dp * p * (1.0 - p)
        weights = weights - cfg.learning_rate * np.append(x.T @ dl_dz, dl_dz.sum())

    return FusionModel(
        weights=weights,
        epochs=cfg.epochs,
        final_loss=float(loss),
        seed=cfg.seed,
        degenerate=degenerate,
        loss_history=history,
    )


def apply_fusion(
    model: FusionModel, map_rgb: SimilarityMap, map_scf: SimilarityMap
) -> SimilarityMap:
    """sigmoid(w . [rgb, scf, rgb*scf] + bias) applied per pixel."""
    if map_rgb.data.shape != map_scf.data.shape:
        raise ValidationError(
            f"dimension mismatch: {map_rgb.data.shape} vs {map_scf.data.shape}"
        )
    p = _scores(_feature_rows(map_rgb.data, map_scf.data), model.weights)
    return SimilarityMap(p.reshape(map_rgb.data.shape))
