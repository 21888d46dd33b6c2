import numpy as np
import pytest
import torch

from travrank.synth import SynthConfig, build_synth_dataset

torch.set_num_threads(1)  # tiny models; avoids thread-pool overhead in CI


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """20 synthetic scenes with oracle annotations, shared across tests."""
    out = tmp_path_factory.mktemp("small_world")
    manifest, annotations = build_synth_dataset(out, 20, seed=101, config=SynthConfig())
    return {"dir": out, "manifest": manifest, "annotations": annotations}


@pytest.fixture()
def rng():
    return np.random.default_rng(4242)
