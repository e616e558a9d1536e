"""Shared fixtures: one deterministic key pair per backend for the session."""

import pytest

from skefl.crypto import FixedPointCodec, keygen

SESSION_SEED = 20240817


@pytest.fixture(scope="session")
def paillier_keys():
    return keygen(128, SESSION_SEED, "paillier")


@pytest.fixture(scope="session")
def mock_keys():
    return keygen(64, SESSION_SEED, "mock")


@pytest.fixture(scope="session")
def paillier_codec(paillier_keys):
    return FixedPointCodec(10**4, paillier_keys.public.ring_size, v_max=10.0)


@pytest.fixture(scope="session")
def mock_codec(mock_keys):
    return FixedPointCodec(10**6, mock_keys.public.ring_size)
