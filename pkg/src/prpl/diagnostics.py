"""Divergence estimation, label-free hyperparameter tuning, and evaluation.

The domain divergence proxy is the marginal output distance plus the mean
of the per-round conditional feature distances. It needs no target labels,
which is what makes it usable for tuning: accuracy-based tuning would read
labels the target domain does not have.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import classifier as clf
from .classifier import Head, TrainConfig
from .errors import IncompleteReportError, PrplError, ValidationError
from .feature_store import FeatureSet
from .pseudo import RecurrentConfig, RunReport, recurrent_fit


@dataclass(frozen=True)
class DivergenceReport:
    """Divergence estimate for one finished run."""

    dist_marginal: float
    dist_conditional_mean: float
    d_h: float
    iterations: int
    p_schedule: tuple[float, ...]
    source_risk: Optional[float] = None
    target_risk: Optional[float] = None

    def __post_init__(self):
        if self.d_h != self.dist_marginal + self.dist_conditional_mean:
            raise ValidationError("d_h must equal marginal + conditional mean")
        if not np.isfinite(self.d_h) or self.dist_marginal < 0:
            raise ValidationError("divergence terms must be finite and >= 0")

    def to_dict(self) -> dict:
        return {
            "dist_marginal": self.dist_marginal,
            "dist_conditional_mean": self.dist_conditional_mean,
            "d_H": self.d_h,
            "T": self.iterations,
            "p_schedule": list(self.p_schedule),
            "source_risk": self.source_risk,
            "target_risk": self.target_risk,
        }


def estimate_divergence(report: RunReport) -> DivergenceReport:
    """Marginal distance of the final stage plus the mean conditional distance.

    Requires every recurrent stage to carry a conditional distance (a stage
    whose confident set was empty cannot contribute one).
    """
    recurrent = report.stages[1:]
    if not recurrent:
        raise IncompleteReportError("report has no recurrent stage")
    missing = [s.t for s in recurrent if s.dist_conditional is None]
    if missing:
        raise IncompleteReportError(
            f"stages {missing} lack a conditional distance"
        )
    marginal = report.stages[-1].dist_marginal
    co_mean = float(np.mean([s.dist_conditional for s in recurrent]))
    final_acc = report.stages[-1].accuracy
    return DivergenceReport(
        dist_marginal=marginal,
        dist_conditional_mean=co_mean,
        d_h=marginal + co_mean,
        iterations=len(recurrent),
        p_schedule=tuple(s.threshold for s in recurrent),
        target_risk=None if final_acc is None else 1.0 - final_acc,
    )


def divergence_trajectory(report: RunReport) -> list[float]:
    """Per-stage divergence estimates d_H(t) for t = 0..T.

    Stage t >= 1 uses its own marginal distance plus the mean of the
    conditional distances observed so far. Stage 0 never selected anything
    itself, so its estimate borrows the round-1 conditional distance: that
    selection was made by the stage-0 head, making it the honest conditional
    term for the pre-recurrence model.
    """
    recurrent = report.stages[1:]
    if not recurrent or any(s.dist_conditional is None for s in recurrent):
        raise IncompleteReportError("trajectory needs conditional distances for all rounds")
    out = [report.stages[0].dist_marginal + recurrent[0].dist_conditional]
    for i, stage in enumerate(recurrent, start=1):
        co = float(np.mean([s.dist_conditional for s in recurrent[:i]]))
        out.append(stage.dist_marginal + co)
    return out


def evaluate_accuracy(head: Head, fs: FeatureSet) -> float:
    """Fraction of rows whose argmax prediction matches the label."""
    if fs.labels is None:
        raise ValidationError("evaluate_accuracy needs a labeled feature set")
    pred = clf.forward(head, fs.features64()).argmax(axis=1)
    return float(np.mean(pred == fs.labels))


# -- grid tuning ------------------------------------------------------------


@dataclass(frozen=True)
class TuneGrid:
    """Candidate iteration counts and threshold schedules.

    A cell is every (T, schedule) pair whose lengths match; grids that leave
    a T or a schedule unused are rejected as likely mistakes.
    """

    iteration_values: tuple[int, ...]
    p_schedules: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.iteration_values or not self.p_schedules:
            raise ValidationError("tune grid must list T values and p schedules")
        for T in self.iteration_values:
            if T < 1:
                raise ValidationError("tuning T values must be >= 1")
        for s in self.p_schedules:
            for p in s:
                if not 0.0 <= p <= 1.0:
                    raise ValidationError(f"threshold {p} outside [0, 1]")
            if any(b < a for a, b in zip(s, s[1:])):
                raise ValidationError(f"schedule {list(s)} must be non-decreasing")
        cells = self.cells()
        used_T = {T for T, _ in cells}
        used_s = {s for _, s in cells}
        if set(self.iteration_values) - used_T:
            raise ValidationError("a T value matches no schedule length")
        if set(self.p_schedules) - used_s:
            raise ValidationError("a schedule length matches no T value")

    def cells(self) -> list[tuple[int, tuple[float, ...]]]:
        return [
            (T, s)
            for T in self.iteration_values
            for s in self.p_schedules
            if len(s) == T
        ]


@dataclass(frozen=True)
class TuningTable:
    cells: tuple[dict, ...]
    chosen: RecurrentConfig

    def to_dict(self) -> dict:
        return {
            "cells": [dict(c) for c in self.cells],
            "chosen": {
                "T": self.chosen.iterations,
                "p_schedule": list(self.chosen.p_schedule),
            },
        }


def _worker_count() -> int:
    raw = os.environ.get("PRPL_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValidationError(f"PRPL_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValidationError("PRPL_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def tune(
    source: FeatureSet,
    target: FeatureSet,
    grid: TuneGrid,
    tc: TrainConfig,
) -> TuningTable:
    """Run every grid cell and pick the configuration with the smallest d_H.

    The target is passed through as an unlabeled view, so no cell can touch
    target labels. Cells run in parallel (capped by PRPL_THREADS) but are
    collected in grid order; ties go to the earliest cell.
    """
    unlabeled_target = target.without_labels()
    cells = grid.cells()

    def run_cell(cell):
        T, schedule = cell
        rc = RecurrentConfig(iterations=T, p_schedule=schedule, train=tc)
        _, report = recurrent_fit(source, unlabeled_target, rc)
        return estimate_divergence(report)

    results: list[DivergenceReport] = []
    with ThreadPoolExecutor(max_workers=min(_worker_count(), len(cells))) as pool:
        futures = [pool.submit(run_cell, cell) for cell in cells]
        for cell, fut in zip(cells, futures):
            try:
                results.append(fut.result())
            except PrplError as exc:
                raise type(exc)(
                    f"cell T={cell[0]}, p_schedule={list(cell[1])}: {exc}"
                ) from exc

    rows = []
    for (T, schedule), div in zip(cells, results):
        rows.append(
            {
                "T": T,
                "p_schedule": list(schedule),
                "d_H": div.d_h,
                "dist_marginal": div.dist_marginal,
                "dist_conditional_mean": div.dist_conditional_mean,
            }
        )
    best_idx = min(range(len(rows)), key=lambda i: (rows[i]["d_H"], i))
    T, schedule = cells[best_idx]
    chosen = RecurrentConfig(iterations=T, p_schedule=schedule, train=tc)
    return TuningTable(cells=tuple(rows), chosen=chosen)
