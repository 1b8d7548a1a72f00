import numpy as np
import pytest

from seqclick.config import DataConfig, ModelConfig
from seqclick.data import SceneDataset, build_sequences
from seqclick.model import SegModel


def tiny_model_config(**overrides) -> ModelConfig:
    """Small but structurally complete model for fast tests."""
    defaults = dict(
        image_size=64,
        patch=8,
        dim=32,
        depth=2,
        spt_depth=1,
        heads=2,
        mlp_ratio=2.0,
        max_seq_len=6,
        msh_hidden=2,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> SceneDataset:
    root = tmp_path_factory.mktemp("ds")
    cfg = DataConfig(out_dir=str(root / "bench"), train_per_category=8, eval_per_category=3, seed=0)
    return SceneDataset(build_sequences(cfg))


@pytest.fixture(scope="session")
def tiny_model() -> SegModel:
    return SegModel(tiny_model_config(), seed=0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
