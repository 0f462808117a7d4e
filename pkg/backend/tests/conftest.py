"""Fixtures compartidas: consola silenciosa, generadores sembrados y specs pequeñas."""
import numpy as np
import pytest

from console import set_quiet
from datasets import sample_forward_matrix
from numerics import make_rng
from operators import Family, FinalLayer, OperatorSpec


@pytest.fixture(autouse=True)
def quiet_console():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(1234)


@pytest.fixture
def contractive_spec() -> OperatorSpec:
    return OperatorSpec(family=Family.CONTRACTIVE, state_dim=4, input_dim=3, output_dim=4)


@pytest.fixture
def mon_spec() -> OperatorSpec:
    return OperatorSpec(family=Family.MON, state_dim=4, input_dim=3, output_dim=4)


@pytest.fixture
def lgd_spec() -> OperatorSpec:
    forward = sample_forward_matrix(8, 4, make_rng(99))
    return OperatorSpec(family=Family.LGD, state_dim=4, input_dim=8, output_dim=4, forward_matrix=forward)


@pytest.fixture
def linear_spec() -> OperatorSpec:
    return OperatorSpec(
        family=Family.CONTRACTIVE, state_dim=4, input_dim=3, output_dim=3, final_layer=FinalLayer.LINEAR
    )
