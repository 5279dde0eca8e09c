import numpy as np
import pytest

from fairpm.encoding import build_schema, encode_batch, encode_targets_batch
from fairpm.eventlog import extract_prefixes
from fairpm.mlp import TrainConfig, train
from fairpm.synthesis import generate_cs


@pytest.fixture(scope="session")
def cs_small():
    """A small screening log shared by read-only tests."""
    return generate_cs(300, seed=11)


@pytest.fixture(scope="session")
def cs_prefixes(cs_small):
    return extract_prefixes(cs_small.log, 3)


@pytest.fixture(scope="session")
def cs_schema(cs_prefixes):
    return build_schema(cs_prefixes, sensitive_attrs=("age", "gender"))


@pytest.fixture(scope="session")
def cs_encoded(cs_prefixes, cs_schema):
    X = encode_batch(cs_prefixes, cs_schema)
    Y = encode_targets_batch([p.target_activity for p in cs_prefixes], cs_schema)
    return X, Y


@pytest.fixture(scope="session")
def cs_model(cs_encoded, cs_schema):
    """A small teacher over the shared log, trained long enough to pick up
    the demographic decision rules."""
    X, Y = cs_encoded
    return train((X, Y), TrainConfig(epochs=8), seed=5, schema=cs_schema)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
