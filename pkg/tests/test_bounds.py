"""Tests for spectra, fidelity bounds, phase constraints and dark-state classification."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm, null_space

from spin_control.bounds import (
    classify_dark,
    max_fidelity,
    max_subspace_fidelity,
    partition_phase_operator,
    permutation_blocker,
    phase_reachability,
    spectral,
)
from spin_control.data import DarkKind, SpinNetwork
from spin_control.errors import NotDarkError, SpinNetworkValidationError, TargetError
from spin_control.network import network_from_dict
from spin_control.operators import restrict
from spin_control.symmetries import network_decomposition

from .conftest import Ket


@pytest.mark.parametrize(
    ("name", "amplitudes", "expected"),
    [
        ("fig1", {6: 1}, 0.5),
        ("fig1", {7: 1}, 0.5),
        ("fig1", {5: 1}, 1.0),
        ("fig2", {3: 1}, 0.6),
        ("fig2", {6: 1, 7: 1}, 0.8),
    ],
)
def test_golden_fidelities(request, ket: Ket, name: str, amplitudes: dict, expected: float) -> None:
    net = request.getfixturevalue(name)
    bound = max_fidelity(net, ket(net.n, amplitudes))
    assert bound.value == pytest.approx(expected, abs=1e-9)


def test_fig1_dark_component(fig1: SpinNetwork, ket: Ket) -> None:
    bound = max_fidelity(fig1, ket(7, 6))
    assert len(bound.dark_components) == 1
    component = bound.dark_components[0]
    assert component.weight == pytest.approx(0.5, abs=1e-9)
    expected = ket(7, {6: 1, 7: -1})
    assert abs(np.vdot(expected, component.vector)) == pytest.approx(1.0, abs=1e-9)
    assert bound.phase_attainable


def test_fig2_spectrum(fig2: SpinNetwork) -> None:
    spec = spectral(fig2)
    nonzero = sorted(v for v in spec.eigenvalues if abs(v) > 1e-9)
    large = math.sqrt((5 + math.sqrt(5)) / 2)
    small = math.sqrt((5 - math.sqrt(5)) / 2)
    np.testing.assert_allclose(nonzero, [-large, -small, small, large], atol=1e-9)
    assert spec.has_aso
    assert len(spec.paired_with) == 4
    assert spec.bipartition.part_b == {2, 5}


def test_fig2_dark_zero_space(fig2: SpinNetwork, ket: Ket) -> None:
    drift = restrict(fig2, "drift", 1).entries.real[1:, 1:]
    zero = null_space(drift)
    keep = null_space(zero[0:1, :])
    space = zero @ keep
    first = ket(7, {6: 1, 7: -1})[1:]
    second = ket(7, {3: 2, 4: -2, 6: 1, 7: 1})[1:]
    expected = np.outer(first, first.conj()) + np.outer(second, second.conj())
    assert np.linalg.norm(space @ space.conj().T - expected) < 1e-9


def test_fig1_spectrum_is_symmetric(fig1: SpinNetwork) -> None:
    spec = spectral(fig1)
    levels = np.sort(spec.eigenvalues[1:])
    assert len(levels) == 5
    np.testing.assert_allclose(levels, -levels[::-1], atol=1e-9)
    assert spec.overlaps[0] == 0.0
    assert np.all(spec.overlaps[1:] >= 0.0)
    assert np.sum(spec.overlaps**2) == pytest.approx(1.0, abs=1e-9)


def test_pendant_pair_spectrum(pendant_pair: SpinNetwork) -> None:
    spec = spectral(pendant_pair)
    np.testing.assert_allclose(spec.eigenvalues, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(spec.overlaps, [0.0, 1.0], atol=1e-12)


def test_spectral_requires_pendant_form() -> None:
    net = network_from_dict({"n": 3, "drift_edges": [[1, 3, 1]], "control_edges": [[1, 2, 1]]})
    with pytest.raises(SpinNetworkValidationError) as info:
        spectral(net)
    assert info.value.reason == "not_pendant"


def test_target_checks(fig1: SpinNetwork, ket: Ket) -> None:
    with pytest.raises(TargetError):
        max_fidelity(fig1, 2 * ket(7, 5))
    with pytest.raises(TargetError):
        max_fidelity(fig1, ket(7, {1: 1, 5: 1}))
    with pytest.raises(TargetError):
        max_fidelity(fig1, np.ones(3) / np.sqrt(3))


def test_subspace_bound_matches_pendant_bound(fig1: SpinNetwork, ket: Ket) -> None:
    _, decomposition = network_decomposition(fig1)
    value = max_subspace_fidelity(decomposition, ket(7, 1), ket(7, 6))
    assert value == pytest.approx(max_fidelity(fig1, ket(7, 6)).value, abs=1e-9)


def test_phase_reachability(fig1: SpinNetwork, ket: Ket) -> None:
    assert phase_reachability(fig1, ket(7, 5))[0]
    assert phase_reachability(fig1, ket(7, {3: 1, 4: 1})) == (False, None)
    reachable, phase = phase_reachability(fig1, ket(7, {3: 1, 4: 1j}))
    assert reachable
    assert phase is not None


def test_phase_reachability_without_aso(triangle: SpinNetwork, ket: Ket) -> None:
    assert phase_reachability(triangle, ket(4, {3: 1, 4: 1j})) == (True, 0.0)


def test_bound_reports_unreachable_phases(fig1: SpinNetwork, ket: Ket) -> None:
    bound = max_fidelity(fig1, ket(7, {3: 1, 4: 1}))
    assert bound.value == pytest.approx(1.0, abs=1e-9)
    assert not bound.phase_attainable
    assert bound.global_phase is None


def test_partition_phase_operator(fig2: SpinNetwork) -> None:
    gauge = np.diag(partition_phase_operator(fig2))
    np.testing.assert_allclose(gauge, [1, 1j, 1, 1, 1j, 1, 1])


def test_classify_dark_states(fig1: SpinNetwork, fig2: SpinNetwork, ket: Ket) -> None:
    swap_dark = classify_dark(fig2, ket(7, {6: 1, 7: -1}))
    assert swap_dark.kind is DarkKind.TRULY_DARK
    assert swap_dark.blocker == (1, 2, 3, 4, 5, 7, 6)
    weak = classify_dark(fig2, ket(7, {3: 2, 4: -2, 6: 1, 7: 1}))
    assert weak.kind is DarkKind.CATALYTICALLY_ACCESSIBLE
    assert weak.accessible_weight > 0.0
    assert classify_dark(fig1, ket(7, {6: 1, 7: -1})).kind is DarkKind.TRULY_DARK


def test_classify_dark_rejects_bright_vectors(fig2: SpinNetwork, ket: Ket) -> None:
    with pytest.raises(NotDarkError):
        classify_dark(fig2, ket(7, 3))
    with pytest.raises(NotDarkError):
        classify_dark(fig2, np.zeros(7))


def test_permutation_blocker(fig2: SpinNetwork, ket: Ket) -> None:
    loss, blocker = permutation_blocker(fig2, ket(7, 6))
    assert loss == pytest.approx(0.5, abs=1e-12)
    assert blocker == (1, 2, 3, 4, 5, 7, 6)
    loss, blocker = permutation_blocker(fig2, ket(7, 3))
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert blocker is None


def _random_target(rng: np.random.Generator, n: int) -> np.ndarray:
    vector = rng.normal(size=n) + 1j * rng.normal(size=n)
    vector[0] = 0.0
    return vector / np.linalg.norm(vector)


@pytest.mark.parametrize("name", ["fig1", "fig2", "triangle_tail"])
def test_bound_is_the_bright_weight(request, rng: np.random.Generator, name: str) -> None:
    net = request.getfixturevalue(name)
    spec = spectral(net)
    for _ in range(20):
        target = _random_target(rng, net.n)
        beta = spec.eigenvectors.conj().T @ target
        expected = sum(abs(beta[n]) ** 2 for n in spec.bright)
        assert max_fidelity(net, target, spec).value == pytest.approx(expected, abs=1e-9)


def test_darkening_levels_never_raises_the_bound(fig2: SpinNetwork, rng: np.random.Generator) -> None:
    spec = spectral(fig2)
    for _ in range(20):
        target = _random_target(rng, fig2.n)
        overlaps = spec.overlaps.copy()
        overlaps[rng.choice(spec.bright, size=2, replace=False)] = 0.0
        darker = replace(spec, overlaps=overlaps)
        assert max_fidelity(fig2, target, darker).value <= max_fidelity(fig2, target, spec).value + 1e-12


@pytest.mark.parametrize("name", ["fig1", "fig2"])
def test_partition_gauge_makes_the_generators_real(request, name: str) -> None:
    net = request.getfixturevalue(name)
    gauge = partition_phase_operator(net)
    for which in ("drift", "control"):
        generator = 1j * restrict(net, which, 1).entries
        rotated = gauge.conj().T @ generator @ gauge
        assert np.max(np.abs(rotated.imag)) < 1e-12
    # States reached from |1> follow the same pattern: real on part A, imaginary on part B.
    total = restrict(net, "drift", 1).entries + 0.7 * restrict(net, "control", 1).entries
    reached = expm(-1.3j * total) @ np.eye(net.n)[:, 0]
    rotated = gauge.conj().T @ reached
    assert np.max(np.abs(rotated.imag)) < 1e-9


def test_pendant_pair_is_fully_accessible(pendant_pair: SpinNetwork, ket: Ket) -> None:
    bound = max_fidelity(pendant_pair, ket(2, 2))
    assert bound.value == pytest.approx(1.0, abs=1e-12)
    assert bound.phase_attainable
    assert bound.dark_components == ()


def test_detached_drift_component_is_dark(ket: Ket) -> None:
    net = network_from_dict(
        {"n": 4, "drift_edges": [[3, 4, 1.0]], "control_edges": [[1, 2, 1.0]]}
    )
    assert max_fidelity(net, ket(4, 2)).value == pytest.approx(1.0, abs=1e-12)
    assert max_fidelity(net, ket(4, 3)).value == pytest.approx(0.0, abs=1e-12)
    spec = spectral(net)
    np.testing.assert_allclose(spec.overlaps, [0.0, 1.0], atol=1e-12)
