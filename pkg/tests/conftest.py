from fractions import Fraction

import pytest

from symnet.bundled import example_network, toy_autonomous_pair, toy_pair, toy_single
from symnet.pipeline import analyze_network, component_gain_analysis


@pytest.fixture(scope="session")
def example_net():
    return example_network()


@pytest.fixture(scope="session")
def example_analysis(example_net):
    return analyze_network(example_net)


@pytest.fixture(scope="session")
def example_gains(example_analysis):
    return component_gain_analysis(example_analysis)


@pytest.fixture(scope="session")
def toy_single_net():
    return toy_single()


@pytest.fixture(scope="session")
def toy_pair_net():
    return toy_pair()


@pytest.fixture(scope="session")
def toy_autonomous_net():
    return toy_autonomous_pair()


def fr(text: str) -> Fraction:
    """Exact decimal literal for expected values in tests."""
    from symnet.numbers import to_fraction

    return to_fraction(text)
