"""Shared fixtures for the spin_control test suite."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from spin_control.data import SpinNetwork
from spin_control.network import load_fixture, network_from_dict

type Ket = Callable[..., np.ndarray]


@pytest.fixture
def fig1() -> SpinNetwork:
    """Chain 2-3-4-5 forking at 5 into 6 and 7, pendant spin 1."""
    return load_fixture("fig1")


@pytest.fixture
def fig2() -> SpinNetwork:
    """Spin 2 branching to 3 and 4, 4-5, fork 5-6 and 5-7, pendant spin 1."""
    return load_fixture("fig2")


@pytest.fixture
def example1() -> list:
    """Raw so(3) generators without a CSO."""
    return load_fixture("example1")


@pytest.fixture
def triangle() -> SpinNetwork:
    return load_fixture("triangle")


@pytest.fixture
def triangle_tail() -> SpinNetwork:
    return load_fixture("triangle_tail")


@pytest.fixture
def pendant_pair() -> SpinNetwork:
    return network_from_dict({"n": 2, "drift_edges": [], "control_edges": [[1, 2, 1.0]]})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def ket() -> Ket:
    """Return a builder for normalized single-excitation vectors, e.g. ket(7, {6: 1, 7: -1})."""

    def build(n: int, amplitudes: dict[int, complex] | int) -> np.ndarray:
        if isinstance(amplitudes, int):
            amplitudes = {amplitudes: 1.0}
        vector = np.zeros(n, dtype=complex)
        for spin, value in amplitudes.items():
            vector[spin - 1] = value
        return vector / np.linalg.norm(vector)

    return build
