import numpy as np
import pytest

from revparams.frontend import FrameParams
from revparams.grid import ClassGrid, ClassVocabulary
from revparams.mlp import FeatureNormalizer, MlpModel


def make_model(d=5, h=3, c=2, seed=0, normalizer=None, vocabulary=None, grid=None):
    """Random small model with an identity normalizer (for unit tests)."""
    rng = np.random.default_rng(seed)
    if vocabulary is None:
        vocabulary = ClassVocabulary(tuple((0, j) for j in range(c)))
    return MlpModel(
        w1=rng.standard_normal((h, d)),
        b1=rng.standard_normal(h),
        w2=rng.standard_normal((c, h)),
        b2=rng.standard_normal(c),
        normalizer=normalizer or FeatureNormalizer(np.zeros(d), np.ones(d)),
        vocabulary=vocabulary,
        grid=grid or ClassGrid(),
        frame_params=FrameParams(),
        seed=seed,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
