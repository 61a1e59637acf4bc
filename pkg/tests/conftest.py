import numpy as np
import pytest

from jsccdisp import Channel, Distribution, SourceSpec

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])


def bsc(p: float) -> Channel:
    return Channel(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def bernoulli(p: float) -> Distribution:
    return Distribution(np.array([1.0 - p, p]))


def hamming_source(p: float) -> SourceSpec:
    return SourceSpec(bernoulli(p), HAMMING)


@pytest.fixture
def bsc011() -> Channel:
    return bsc(0.11)


@pytest.fixture
def fair_hamming() -> SourceSpec:
    return hamming_source(0.5)
