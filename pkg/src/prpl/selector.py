"""Unsupervised selection of the best pre-trained feature extractor.

The primary metric is the L2 distance between the domain mean feature
vectors: cheap, label-free, and smaller when an extractor represents both
domains more consistently. MMD and mean-cosine variants exist for
comparison. The extractor whose source/target distance is smallest wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import mmd
from .errors import (
    DegenerateMeanError,
    DimensionMismatchError,
    PrplError,
    ValidationError,
)
from .feature_store import DatasetManifest, FeatureSet, load_feature_set

METRIC_KINDS = ("mean_l2", "mmd", "mean_cosine")


@dataclass(frozen=True)
class SelectionMetric:
    kind: str = "mean_l2"
    mmd_multipliers: tuple[float, ...] = mmd.DEFAULT_MULTIPLIERS

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValidationError(
                f"metric kind must be one of {METRIC_KINDS}, got {self.kind!r}"
            )


@dataclass(frozen=True)
class SelectionReport:
    """Per-extractor distances and the argmin winner."""

    metric: str
    distances: dict[str, float]
    chosen: str

    def __post_init__(self):
        if not self.distances:
            raise ValidationError("selection report needs at least one extractor")
        for k, v in self.distances.items():
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"distance for {k!r} must be finite and >= 0")
        best = min(sorted(self.distances), key=lambda k: self.distances[k])
        if self.chosen != best:
            raise ValidationError(
                f"chosen={self.chosen!r} is not the argmin ({best!r})"
            )

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "distances": dict(self.distances),
            "chosen": self.chosen,
        }


def _check_pair(source: FeatureSet, target: FeatureSet) -> None:
    if source.d != target.d:
        raise DimensionMismatchError(
            f"feature dims differ: source d={source.d}, target d={target.d}"
        )
    if source.extractor_id != target.extractor_id:
        raise ValidationError(
            f"extractor mismatch: {source.extractor_id!r} vs {target.extractor_id!r}"
        )


def pre_distance(source: FeatureSet, target: FeatureSet) -> float:
    """L2 distance between the two domains' mean feature vectors (f64)."""
    _check_pair(source, target)
    mu_s = source.features64().mean(axis=0)
    mu_t = target.features64().mean(axis=0)
    return float(np.linalg.norm(mu_s - mu_t))


def mean_cosine_distance(source: FeatureSet, target: FeatureSet) -> float:
    """1 - cosine similarity of the mean vectors; in [0, 2]."""
    _check_pair(source, target)
    mu_s = source.features64().mean(axis=0)
    mu_t = target.features64().mean(axis=0)
    ns, nt = np.linalg.norm(mu_s), np.linalg.norm(mu_t)
    if ns == 0.0 or nt == 0.0:
        raise DegenerateMeanError("a domain mean vector is zero")
    return float(1.0 - np.dot(mu_s, mu_t) / (ns * nt))


def _mmd_distance(
    source: FeatureSet, target: FeatureSet, multipliers: Sequence[float]
) -> float:
    _check_pair(source, target)
    Xs, Xt = source.features64(), target.features64()
    bank = mmd.median_heuristic(np.vstack([Xs, Xt]), multipliers)
    return max(mmd.mmd2(Xs, Xt, bank), 0.0)


def evaluate_metric(
    source: FeatureSet, target: FeatureSet, metric: SelectionMetric
) -> float:
    if metric.kind == "mean_l2":
        return pre_distance(source, target)
    if metric.kind == "mean_cosine":
        return mean_cosine_distance(source, target)
    return _mmd_distance(source, target, metric.mmd_multipliers)


def select_best(
    manifest: DatasetManifest,
    source_domain: str,
    target_domain: str,
    metric: Optional[SelectionMetric] = None,
) -> SelectionReport:
    """Evaluate the metric per extractor and pick the argmin.

    Ties break toward the lexicographically smaller extractor id so the
    report is deterministic. Load failures are re-raised with the extractor
    named.
    """
    metric = metric or SelectionMetric()
    distances: dict[str, float] = {}
    for extractor in manifest.extractors():
        src_entry = manifest.find(extractor, source_domain)
        tgt_entry = manifest.find(extractor, target_domain)
        if src_entry is None or tgt_entry is None:
            continue
        try:
            source = load_feature_set(src_entry.path)
            target = load_feature_set(tgt_entry.path)
            distances[extractor] = evaluate_metric(source, target, metric)
        except OSError as exc:
            raise PrplError(f"extractor {extractor!r}: {exc}") from exc
        except PrplError as exc:
            raise type(exc)(f"extractor {extractor!r}: {exc}") from exc
    if not distances:
        raise ValidationError(
            f"manifest has no extractor with both domains "
            f"{source_domain!r} and {target_domain!r}"
        )
    chosen = min(sorted(distances), key=lambda k: distances[k])
    return SelectionReport(metric=metric.kind, distances=distances, chosen=chosen)
