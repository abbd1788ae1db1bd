"""Confident pseudo-labeling and the recurrent training driver.

The driver alternates two moves for T rounds after an initial stage:
select target rows whose max class probability strictly exceeds the round's
threshold (their argmax becomes the pseudo label), merge them with the
source set into an updated labeled domain, and retrain the head on
cross-entropy plus the MMD loss against the full target outputs. Thresholds
follow a non-decreasing schedule so later rounds only keep more reliable
labels; each round re-selects from scratch, so the updated domain never
exceeds the two domains' combined size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classifier as clf
from . import mmd
from .classifier import ClassifierHead, Head, TrainConfig
from .errors import DimensionMismatchError, ValidationError
from .feature_store import FeatureSet


@dataclass(frozen=True)
class RecurrentConfig:
    """Recurrence settings: round count, threshold schedule, stage optimizer."""

    iterations: int = 3
    p_schedule: tuple[float, ...] = (0.5, 0.8, 0.9)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        schedule = tuple(float(p) for p in self.p_schedule)
        object.__setattr__(self, "p_schedule", schedule)
        if len(schedule) != self.iterations:
            raise ValidationError(
                f"p_schedule has {len(schedule)} entries for {self.iterations} iterations"
            )
        for p in schedule:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"threshold {p} outside [0, 1]")
        for a, b in zip(schedule, schedule[1:]):
            if b < a:
                raise ValidationError(
                    f"p_schedule must be non-decreasing, got {a} then {b}"
                )


@dataclass(frozen=True)
class ConfidentSet:
    """Target rows whose max predicted probability beat the round threshold."""

    target_indices: np.ndarray  # (k,) int64, unique, ascending
    pseudo_labels: np.ndarray  # (k,) int64
    threshold: float
    iteration: int

    def __post_init__(self):
        idx = np.asarray(self.target_indices, dtype=np.int64)
        lab = np.asarray(self.pseudo_labels, dtype=np.int64)
        if idx.shape != lab.shape or idx.ndim != 1:
            raise DimensionMismatchError("indices and pseudo labels must align")
        if idx.size and len(np.unique(idx)) != idx.size:
            raise ValidationError("confident-set indices must be unique")
        object.__setattr__(self, "target_indices", idx)
        object.__setattr__(self, "pseudo_labels", lab)

    def __len__(self) -> int:
        return int(self.target_indices.size)


@dataclass(frozen=True)
class UpdatedDomain:
    """Source rows stacked over confident target rows, with provenance flags."""

    features: np.ndarray  # (n_u, d) float32
    labels: np.ndarray  # (n_u,) int64
    pseudo_mask: np.ndarray  # (n_u,) bool, True where the label is a pseudo label

    @property
    def n(self) -> int:
        return self.features.shape[0]


def confident_pseudo_labels(
    head: Head, target: FeatureSet, p: float, iteration: int
) -> ConfidentSet:
    """Select target rows with max softmax probability strictly above ``p``.

    Labels are the argmax class, ties resolved to the smallest class index.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"threshold {p} outside [0, 1]")
    probs = clf.forward(head, target.features64())
    confidence = probs.max(axis=1)
    idx = np.nonzero(confidence > p)[0].astype(np.int64)
    labels = probs[idx].argmax(axis=1).astype(np.int64)
    return ConfidentSet(
        target_indices=idx, pseudo_labels=labels, threshold=p, iteration=iteration
    )


def build_updated_domain(
    source: FeatureSet, target: FeatureSet, cs: ConfidentSet
) -> UpdatedDomain:
    """Stack the source set over the confident target rows with their pseudo labels."""
    if source.labels is None:
        raise ValidationError("updated domain needs a labeled source set")
    if source.d != target.d:
        raise DimensionMismatchError(f"source d={source.d}, target d={target.d}")
    if len(cs) and (
        cs.target_indices.min() < 0 or cs.target_indices.max() >= target.n
    ):
        raise ValidationError("confident-set index out of range for the target set")
    if len(cs) and cs.pseudo_labels.max() >= source.num_classes:
        raise ValidationError(
            f"pseudo label >= num_classes ({source.num_classes})"
        )
    features = np.vstack([source.data, target.data[cs.target_indices]])
    labels = np.concatenate([source.labels, cs.pseudo_labels])
    pseudo_mask = np.zeros(len(labels), dtype=bool)
    pseudo_mask[source.n :] = True
    return UpdatedDomain(features=features, labels=labels, pseudo_mask=pseudo_mask)


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class StageRecord:
    """Metrics for one training stage (t = 0 is the pre-recurrence stage)."""

    t: int
    threshold: Optional[float]
    n_confident: int
    n_updated: int
    loss_source: float
    loss_mmd: float
    dist_marginal: float
    dist_conditional: Optional[float]
    accuracy: Optional[float]

    def to_dict(self) -> dict:
        out = {
            "t": self.t,
            "threshold": self.threshold,
            "n_confident": self.n_confident,
            "n_updated": self.n_updated,
            "loss_source": self.loss_source,
            "loss_mmd": self.loss_mmd,
            "dist_marginal": self.dist_marginal,
            "dist_conditional": self.dist_conditional,
        }
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        return out


@dataclass(frozen=True)
class RunReport:
    """Per-stage record of one recurrent training run."""

    stages: tuple[StageRecord, ...]
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "stages": [s.to_dict() for s in self.stages],
            "config": self.config,
            "seed": self.seed,
        }

    def distance_record(self) -> mmd.DistanceRecord:
        return mmd.DistanceRecord(
            marginal=self.stages[-1].dist_marginal,
            conditional=tuple(s.dist_conditional for s in self.stages[1:]),
            mmd2_values=tuple(s.loss_mmd for s in self.stages),
        )


def _epoch_rng(seed: int, stage: int, epoch: int, stream: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, stage, epoch, stream]))
    )


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.where(norms > 0, norms, 1.0)


def _stage_bank(head: Head, X_l: np.ndarray, X_t: np.ndarray) -> mmd.KernelBank:
    # bandwidths track the output scale of the current head, fixed per stage
    pooled = np.vstack([clf.forward(head, X_l), clf.forward(head, X_t)])
    return mmd.median_heuristic(pooled)


def _train_stage(
    head: Head,
    X_l: np.ndarray,
    y_l: np.ndarray,
    X_t: np.ndarray,
    tc: TrainConfig,
    stage: int,
) -> tuple[Head, Optional[mmd.KernelBank]]:
    use_mmd = tc.mmd_weight > 0
    bank = _stage_bank(head, X_l, X_t) if use_mmd else None
    n_l, n_t = X_l.shape[0], X_t.shape[0]
    for epoch in range(tc.epochs):
        order = _epoch_rng(tc.seed, stage, epoch, 0).permutation(n_l)
        if use_mmd:
            t_order = _epoch_rng(tc.seed, stage, epoch, 1).permutation(n_t)
            cursor = 0
        for start in range(0, n_l, tc.batch_size):
            rows = order[start : start + tc.batch_size]
            Xb, yb = X_l[rows], y_l[rows]
            grads = clf.grad_source_loss(head, Xb, yb)
            if use_mmd:
                t_rows = t_order[(cursor + np.arange(len(rows))) % n_t]
                cursor += len(rows)
                Xtb = X_t[t_rows]
                P_l = clf.forward(head, Xb)
                P_t = clf.forward(head, Xtb)
                g_l = mmd.grad_mmd2_wrt_A(P_l, P_t, bank)
                g_t = mmd.grad_mmd2_wrt_A(P_t, P_l, bank)
                grads = clf.add_grads(
                    grads, clf.backprop_output_grad(head, Xb, g_l), tc.mmd_weight
                )
                grads = clf.add_grads(
                    grads, clf.backprop_output_grad(head, Xtb, g_t), tc.mmd_weight
                )
            head = clf.sgd_step(head, grads, tc.learning_rate)
    return head, bank


def _make_head(d: int, num_classes: int, tc: TrainConfig) -> Head:
    if tc.hidden_width is None:
        return clf.init_head(d, num_classes, tc.seed)
    return clf.init_mlp_head(d, tc.hidden_width, num_classes, tc.seed)


def _accuracy_or_none(head: Head, X: np.ndarray, labels) -> Optional[float]:
    if labels is None:
        return None
    pred = clf.forward(head, X).argmax(axis=1)
    return float(np.mean(pred == labels))


def _config_dict(rc: RecurrentConfig) -> dict:
    tc = rc.train
    return {
        "T": rc.iterations,
        "p_schedule": list(rc.p_schedule),
        "train": {
            "lr": tc.learning_rate,
            "batch": tc.batch_size,
            "epochs": tc.epochs,
            "seed": tc.seed,
            "mmd_weight": tc.mmd_weight,
            "l2_normalize_inputs": tc.l2_normalize_inputs,
            "hidden_width": tc.hidden_width,
        },
    }


def recurrent_fit(
    source: FeatureSet, target: FeatureSet, rc: RecurrentConfig
) -> tuple[Head, RunReport]:
    """Train with recurrent confident pseudo-labeling.

    Stage 0 trains on the source set alone (cross-entropy plus MMD against
    the target outputs). Each following round re-selects confident target
    rows from the full target with the current head at that round's
    threshold, rebuilds the updated domain, and retrains from the current
    parameters. Deterministic per (source, target, rc).
    """
    if source.labels is None:
        raise ValidationError("recurrent_fit needs a labeled source set")
    if source.d != target.d:
        raise DimensionMismatchError(f"source d={source.d}, target d={target.d}")
    tc = rc.train
    X_s = source.features64()
    X_t = target.features64()
    if tc.l2_normalize_inputs:
        X_s = _normalize_rows(X_s)
        X_t = _normalize_rows(X_t)
    num_classes = source.num_classes
    head = _make_head(source.d, num_classes, tc)

    stages: list[StageRecord] = []

    def record(stage_t, threshold, cs, dist_co, X_l, y_l, n_updated, bank):
        P_l = clf.forward(head, X_l)
        P_s = P_l if stage_t == 0 else clf.forward(head, X_s)
        P_t = clf.forward(head, X_t)
        metric_bank = bank if bank is not None else _stage_bank(head, X_l, X_t)
        stages.append(
            StageRecord(
                t=stage_t,
                threshold=threshold,
                n_confident=0 if cs is None else len(cs),
                n_updated=n_updated,
                loss_source=clf.cross_entropy(P_l, y_l),
                loss_mmd=mmd.mmd2(P_l, P_t, metric_bank),
                dist_marginal=mmd.marginal_distance(P_s, P_t),
                dist_conditional=dist_co,
                accuracy=_accuracy_or_none(head, X_t, target.labels),
            )
        )

    # stage 0: source only
    head, bank = _train_stage(head, X_s, source.labels, X_t, tc, stage=0)
    record(0, None, None, None, X_s, source.labels, source.n, bank)

    # recurrent rounds
    for t, p_t in enumerate(rc.p_schedule, start=1):
        cs = confident_pseudo_labels(head, target, p_t, t)
        if len(cs):
            dist_co = mmd.conditional_distance(
                source, target, cs.target_indices, cs.pseudo_labels
            )
        else:
            dist_co = None
        updated = build_updated_domain(source, target, cs)
        X_u = updated.features.astype(np.float64)
        if tc.l2_normalize_inputs:
            X_u = _normalize_rows(X_u)
        head, bank = _train_stage(head, X_u, updated.labels, X_t, tc, stage=t)
        record(t, p_t, cs, dist_co, X_u, updated.labels, updated.n, bank)

    report = RunReport(stages=tuple(stages), config=_config_dict(rc), seed=tc.seed)
    return head, report


def source_only_baseline(
    source: FeatureSet, target: FeatureSet, tc: TrainConfig
) -> tuple[Head, Optional[float]]:
    """Cross-entropy-only training on the source set; no MMD, no pseudo labels."""
    rc = RecurrentConfig(iterations=0, p_schedule=(), train=tc.without_mmd())
    head, report = recurrent_fit(source, target, rc)
    return head, report.stages[-1].accuracy
