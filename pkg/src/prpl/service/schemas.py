"""Pydantic request/response models for the service and the run-config file.

The run-config document is validated strictly (unknown keys rejected)
before any compute happens; the same models back `prpl train/tune`.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..classifier import TrainConfig
from ..errors import ValidationError
from ..pseudo import RecurrentConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ManifestSection(StrictModel):
    source: str
    target: str


class SelectionSection(StrictModel):
    metric: str = "mean_l2"


class TrainSection(StrictModel):
    lr: float = 0.001
    batch: int = 64
    epochs: int = 9
    seed: int = 0
    mmd_weight: float = 1.0
    l2_normalize_inputs: bool = False
    hidden_width: Optional[int] = None

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            batch_size=self.batch,
            epochs=self.epochs,
            seed=self.seed,
            mmd_weight=self.mmd_weight,
            l2_normalize_inputs=self.l2_normalize_inputs,
            hidden_width=self.hidden_width,
        )


class RecurrentSection(StrictModel):
    T: int = 3
    p_schedule: list[float] = Field(default_factory=lambda: [0.5, 0.8, 0.9])

    @field_validator("p_schedule")
    @classmethod
    def _monotone(cls, v: list[float]) -> list[float]:
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError(f"p_schedule must be non-decreasing, got {v}")
        return v


class OutputSection(StrictModel):
    report: str
    head: Optional[str] = None


class GridSection(StrictModel):
    T: list[int]
    p_schedules: list[list[float]]


class RunConfigFile(StrictModel):
    """Schema of the JSON document accepted by `prpl train`."""

    manifest: ManifestSection
    train: TrainSection = Field(default_factory=TrainSection)
    recurrent: RecurrentSection = Field(default_factory=RecurrentSection)
    selection: Optional[SelectionSection] = None
    output: OutputSection

    def to_recurrent_config(self) -> RecurrentConfig:
        return RecurrentConfig(
            iterations=self.recurrent.T,
            p_schedule=tuple(self.recurrent.p_schedule),
            train=self.train.to_train_config(),
        )


class TuneConfigFile(StrictModel):
    """Schema of the JSON document accepted by `prpl tune`."""

    manifest: ManifestSection
    train: TrainSection = Field(default_factory=TrainSection)
    grid: GridSection
    output: Optional[OutputSection] = None


def parse_run_config(doc: dict) -> RunConfigFile:
    try:
        return RunConfigFile.model_validate(doc)
    except Exception as exc:
        raise ValidationError(f"invalid run config: {exc}") from exc


def parse_tune_config(doc: dict) -> TuneConfigFile:
    try:
        return TuneConfigFile.model_validate(doc)
    except Exception as exc:
        raise ValidationError(f"invalid tune config: {exc}") from exc


# -- request/response bodies ---------------------------------------------------


class SelectRequest(StrictModel):
    manifest_path: str
    source_domain: str
    target_domain: str
    metric: str = "mean_l2"


class SelectionReportBody(StrictModel):
    metric: str
    distances: dict[str, float]
    chosen: str


class TrainRequest(StrictModel):
    config: RunConfigFile


class StageBody(StrictModel):
    t: int
    threshold: Optional[float]
    n_confident: int
    n_updated: int
    loss_source: float
    loss_mmd: float
    dist_marginal: float
    dist_conditional: Optional[float]
    accuracy: Optional[float] = None


class RunReportBody(StrictModel):
    stages: list[StageBody]
    config: dict
    seed: int


class TuneRequest(StrictModel):
    config: TuneConfigFile


class TuneCellBody(StrictModel):
    T: int
    p_schedule: list[float]
    d_H: float
    dist_marginal: float
    dist_conditional_mean: float


class ChosenBody(StrictModel):
    T: int
    p_schedule: list[float]


class TuningTableBody(StrictModel):
    cells: list[TuneCellBody]
    chosen: ChosenBody


class SynthRequest(StrictModel):
    num_classes: int
    d: int
    n_per_class_source: int
    n_per_class_target: int
    class_mean_separation: float
    domain_shift: float
    noise_sigma: float
    seed: int = 0
    out_prefix: str


class SynthResponse(StrictModel):
    source: str
    target: str


class EvalRequest(StrictModel):
    head_path: str
    features_path: str


class EvalResponse(StrictModel):
    accuracy: float


class ErrorDetail(StrictModel):
    kind: str
    message: str


class ErrorBody(StrictModel):
    error: ErrorDetail
