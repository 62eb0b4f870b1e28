"""Shared fixtures and hypothesis profiles."""

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qgc_mac.channels import builtin_example1
from qgc_mac.regions import lemma4_assignment

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("dev", max_examples=40, deadline=None)
settings.register_profile(
    "debug", max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def example1():
    return builtin_example1()


@pytest.fixture
def lemma4():
    return lemma4_assignment()
