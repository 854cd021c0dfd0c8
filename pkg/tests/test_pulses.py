"""Tests for transfer synthesis, catalytic planning, refinement and export."""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from spin_control.bounds import max_fidelity, spectral
from spin_control.const import RWA_CAP
from spin_control.data import MARKERS, PulseKind, PulseSchedule, PulseSegment, SpinNetwork
from spin_control.errors import InfeasibleTaskError, SpinNetworkValidationError, SynthesisError
from spin_control.network import network_from_dict
from spin_control.propagation import simulate
from spin_control.pulses import (
    drive_amplitude,
    export_trajectory,
    plan_catalysis,
    refine_schedule,
    sector_state,
    synthesize_transfer,
    transition_gap,
)

from .conftest import Ket


def _run(net: SpinNetwork, schedule: PulseSchedule, target: np.ndarray):
    initial = sector_state(net.n, schedule.sectors)
    goal = sector_state(net.n, schedule.sectors, target)
    return simulate(net, schedule, initial, target=goal)


def test_transition_gap_and_amplitude() -> None:
    assert transition_gap([1.0, -1.0, 2.5]) == pytest.approx(1.0)
    assert transition_gap([0.0]) == 1.0
    assert transition_gap([]) == 1.0
    assert drive_amplitude(0.02, 0.5) == pytest.approx(0.01)
    assert drive_amplitude(0.2, 1.0) == pytest.approx(RWA_CAP)
    with pytest.raises(SpinNetworkValidationError) as info:
        drive_amplitude(0.0, 1.0)
    assert info.value.field == "--quality"


def test_single_level_transfer_is_one_pulse(pendant_pair: SpinNetwork, ket: Ket) -> None:
    spec = spectral(pendant_pair)
    schedule = synthesize_transfer(spec, ket(2, 2))
    assert len(schedule.segments) == 1
    segment = schedule.segments[0]
    assert segment.kind is PulseKind.RABI
    assert segment.carriers == (0.0,)
    assert 2 * segment.amplitude * segment.duration == pytest.approx(math.pi / 2, rel=1e-9)
    assert _run(pendant_pair, schedule, ket(2, 2)).fidelity > 0.999


@pytest.mark.slow
def test_fig1_transfer_to_spin_five(fig1: SpinNetwork, ket: Ket) -> None:
    target = ket(7, 5)
    schedule = synthesize_transfer(spectral(fig1), target, 0.02)
    driven = [s for s in schedule.segments if s.kind is PulseKind.RABI]
    assert 0 < len(driven) <= 6
    assert all(s.amplitude <= schedule.rwa_cap * (1 + 1e-9) for s in driven)
    result = _run(fig1, schedule, target)
    assert result.fidelity >= 0.98
    assert schedule.predicted_fidelity == pytest.approx(result.fidelity, abs=0.02)


@pytest.mark.slow
def test_fig2_transfer_saturates_the_bound(fig2: SpinNetwork, ket: Ket) -> None:
    target = ket(7, 3)
    bound = max_fidelity(fig2, target)
    schedule = synthesize_transfer(spectral(fig2), target, 0.02)
    result = _run(fig2, schedule, target)
    assert 0.58 <= result.fidelity <= bound.value + 1e-6


def test_synthesis_rejects_unreachable_targets(fig1: SpinNetwork, fig2: SpinNetwork, ket: Ket) -> None:
    with pytest.raises(SynthesisError) as info:
        synthesize_transfer(spectral(fig1), ket(7, {3: 1, 4: 1}))
    assert info.value.reason == "phase_unreachable"
    with pytest.raises(SynthesisError) as info:
        synthesize_transfer(spectral(fig2), ket(7, {6: 1, 7: -1}))
    assert info.value.reason == "no_bright_weight"


@pytest.mark.slow
def test_random_schedules_respect_the_bound(fig1: SpinNetwork, fig2: SpinNetwork, ket: Ket) -> None:
    rng = np.random.default_rng(7)
    cases = [(fig1, ket(7, 6)), (fig1, ket(7, {3: 1, 4: 1})), (fig2, ket(7, 3)), (fig2, ket(7, 6))]
    for trial in range(100):
        net, target = cases[trial % len(cases)]
        bound = max_fidelity(net, target)
        segments = tuple(
            PulseSegment(
                PulseKind.RABI,
                duration=float(rng.uniform(0.5, 4.0)),
                carriers=(float(rng.uniform(0.0, 2.5)),),
                amplitude=float(rng.uniform(0.0, 0.4)),
                phases=(float(rng.uniform(-math.pi, math.pi)),),
            )
            for _ in range(int(rng.integers(1, 4)))
        )
        result = _run(net, PulseSchedule(segments), target)
        assert result.fidelity <= bound.value + 1e-6


@pytest.mark.slow
def test_catalysis_beats_the_single_sector_bound(fig2: SpinNetwork, ket: Ket) -> None:
    target = ket(7, 3)
    schedule = plan_catalysis(fig2, target, 0.02)
    assert schedule.sectors == (0, 1, 2, 3)
    kinds = [s.kind for s in schedule.segments]
    assert kinds.count(PulseKind.INJECT) == 1
    assert kinds.count(PulseKind.EXTRACT) == 1
    assert kinds.index(PulseKind.INJECT) < kinds.index(PulseKind.EXTRACT)
    result = _run(fig2, schedule, target)
    assert result.fidelity >= 0.9
    assert result.fidelity > max_fidelity(fig2, target).value


def test_catalysis_names_the_blocking_permutation(fig2: SpinNetwork, ket: Ket) -> None:
    with pytest.raises(InfeasibleTaskError) as info:
        plan_catalysis(fig2, ket(7, {6: 1, 7: -1}))
    assert info.value.blocker == (1, 2, 3, 4, 5, 7, 6)
    assert info.value.reason == "infeasible"


def test_catalysis_without_dark_weight_is_a_plain_transfer(fig1: SpinNetwork, ket: Ket) -> None:
    schedule = plan_catalysis(fig1, ket(7, 5), calibrate=False)
    assert schedule.sectors == (1,)
    assert not any(s.kind in MARKERS for s in schedule.segments)


def test_refinement_never_loses_fidelity(pendant_pair: SpinNetwork, ket: Ket) -> None:
    spec = spectral(pendant_pair)
    schedule = synthesize_transfer(spec, ket(2, 2), calibrate=False)
    segment = schedule.segments[0]
    detuned = PulseSchedule(
        (PulseSegment(
            PulseKind.RABI,
            duration=segment.duration * 0.9,
            carriers=segment.carriers,
            amplitude=segment.amplitude,
            phases=segment.phases,
        ),),
    )
    initial = sector_state(2, (1,))
    goal = sector_state(2, (1,), ket(2, 2))
    before = simulate(pendant_pair, detuned, initial, target=goal).fidelity
    refined, result = refine_schedule(pendant_pair, detuned, initial, goal, seed=3, budget=20)
    assert result.fidelity >= before
    assert refined.predicted_fidelity == result.fidelity
    again, _ = refine_schedule(pendant_pair, detuned, initial, goal, seed=3, budget=20)
    assert again == refined


def test_trajectory_export(pendant_pair: SpinNetwork, ket: Ket, tmp_path) -> None:
    schedule = synthesize_transfer(spectral(pendant_pair), ket(2, 2), calibrate=False)
    result = _run(pendant_pair, schedule, ket(2, 2))
    path = tmp_path / "trajectory.csv"
    export_trajectory(result, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["time", "1", "2"]
    assert frame["time"].iloc[0] == 0.0
    assert frame["1"].iloc[0] == pytest.approx(1.0)
    assert len(frame) == len(result.times)


# Signed chords make the spectrum symmetric without any sign operator.
CHORDED = {
    "n": 6,
    "drift_edges": [[2, 3, 1], [3, 4, 1], [4, 5, 1], [5, 6, 1], [2, 4, 0.5], [4, 6, -0.5]],
    "control_edges": [[1, 2, 1]],
}


@pytest.mark.slow
def test_unbalanced_pair_needs_a_raman_segment() -> None:
    net = network_from_dict(CHORDED)
    spec = spectral(net)
    assert not spec.has_aso
    levels = np.sort(spec.eigenvalues[spec.bright])
    np.testing.assert_allclose(levels, -levels[::-1], atol=1e-9)
    top = int(np.argmax(spec.eigenvalues))
    target = spec.eigenvectors[:, top]
    assert max_fidelity(net, target, spec).value == pytest.approx(1.0, abs=1e-9)

    with pytest.raises(SynthesisError) as info:
        synthesize_transfer(spec, target, 0.02)
    assert info.value.reason == "raman_required"

    schedule = synthesize_transfer(spec, target, 0.02, allow_raman=True)
    assert any(s.kind is PulseKind.RAMAN for s in schedule.segments)
    assert _run(net, schedule, target).fidelity >= 0.9
