"""Shared fixtures: the default filterbank and models are built once per
session since design and weight initialization dominate test runtime."""

import pytest

from srave import pqmf
from srave.model import Model, ModelConfig


@pytest.fixture(scope="session")
def default_bank():
    return pqmf.design_bank(16, 100.0, 512)


@pytest.fixture(scope="session")
def default_model():
    return Model.build(ModelConfig(), seed=1)
