import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prpl.feature_store import FeatureSet, SynthSpec, synth_gaussian_domains


def random_feature_set(rng: np.random.Generator, labeled=True, n=None, d=None) -> FeatureSet:
    n = n or int(rng.integers(1, 12))
    d = d or int(rng.integers(1, 9))
    num_classes = int(rng.integers(2, 6))
    labels = rng.integers(0, num_classes, size=n) if labeled else None
    return FeatureSet(
        extractor_id=f"ex{rng.integers(0, 100)}",
        domain_id="dom",
        data=rng.standard_normal((n, d)).astype(np.float32),
        labels=labels,
        num_classes=num_classes if labeled else 0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def shifted_task():
    """Small shifted-Gaussian adaptation task shared across tests."""
    spec = SynthSpec(
        num_classes=3,
        d=16,
        n_per_class_source=50,
        n_per_class_target=50,
        class_mean_separation=60.0,
        domain_shift=20.0,
        noise_sigma=20.0,
    )
    return synth_gaussian_domains(spec, 7)
