"""Feature-space domain adaptation toolkit.

Pick the pre-trained feature extractor whose source/target mean distance is
smallest, train a softmax head with cross-entropy plus multi-kernel MMD,
then recurrently fold confidently pseudo-labeled target rows back into the
labeled pool under a non-decreasing threshold schedule.
"""

from .classifier import ClassifierHead, TrainConfig, init_head
from .feature_store import (
    DatasetManifest,
    FeatureSet,
    SynthSpec,
    load_feature_set,
    save_feature_set,
    synth_gaussian_domains,
)
from .mmd import KernelBank, kappa, median_heuristic, mmd2
from .pseudo import (
    ConfidentSet,
    RecurrentConfig,
    RunReport,
    build_updated_domain,
    confident_pseudo_labels,
    recurrent_fit,
    source_only_baseline,
)
from .selector import SelectionMetric, SelectionReport, pre_distance, select_best

__all__ = [
    "ClassifierHead",
    "ConfidentSet",
    "DatasetManifest",
    "FeatureSet",
    "KernelBank",
    "RecurrentConfig",
    "RunReport",
    "SelectionMetric",
    "SelectionReport",
    "SynthSpec",
    "TrainConfig",
    "build_updated_domain",
    "confident_pseudo_labels",
    "init_head",
    "kappa",
    "load_feature_set",
    "median_heuristic",
    "mmd2",
    "pre_distance",
    "recurrent_fit",
    "save_feature_set",
    "select_best",
    "source_only_baseline",
    "synth_gaussian_domains",
]

__version__ = "0.1.0"
