"""Tests for survival records, spectrum estimation and sign resolution."""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from spin_control.bounds import spectral
from spin_control.data import Estimate, IdentificationResult, SpinNetwork
from spin_control.errors import NoResolvablePeaksError, NyquistError, SpinNetworkValidationError
from spin_control.network import network_from_dict
from spin_control.sysid import estimate_spectrum, export_record, resolve_signs, survival_record


def _bright_levels(net: SpinNetwork, floor: float = 0.05) -> list[tuple[float, float]]:
    spec = spectral(net)
    return [
        (float(spec.eigenvalues[n]), float(spec.overlaps[n]))
        for n in spec.bright
        if spec.overlaps[n] > floor
    ]


def test_record_starts_at_one(fig1: SpinNetwork) -> None:
    record = survival_record(fig1, 0.01, 50.0, 0.1)
    assert record.probabilities[0] == pytest.approx(1.0, abs=1e-12)
    assert record.times.size == 501
    assert np.all((record.probabilities >= 0.0) & (record.probabilities <= 1.0))


def test_pendant_pair_record_is_a_rabi_cosine(pendant_pair: SpinNetwork) -> None:
    record = survival_record(pendant_pair, 0.05, 2000.0, 0.5)
    np.testing.assert_allclose(record.probabilities, np.cos(0.05 * record.times) ** 2, atol=1e-12)
    result = estimate_spectrum(record)
    assert result.zero_level
    assert len(result.estimates) == 1
    estimate = result.estimates[0]
    assert estimate.lambda_hat == 0.0
    assert estimate.alpha_hat == pytest.approx(1.0, rel=0.01)


def test_zero_drive_has_no_peaks(fig1: SpinNetwork) -> None:
    record = survival_record(fig1, 0.0, 100.0, 0.1)
    with pytest.raises(NoResolvablePeaksError):
        estimate_spectrum(record)


def test_record_validation(fig1: SpinNetwork) -> None:
    with pytest.raises(NyquistError):
        survival_record(fig1, 0.01, 100.0, 2.0)
    with pytest.raises(SpinNetworkValidationError) as info:
        survival_record(fig1, -0.1, 100.0, 0.1)
    assert info.value.field == "--epsilon"
    with pytest.raises(SpinNetworkValidationError) as info:
        survival_record(fig1, 0.01, 100.0, 0.1, shots=100)
    assert info.value.field == "--seed"


def test_shot_noise_is_seeded(fig1: SpinNetwork) -> None:
    first = survival_record(fig1, 0.01, 50.0, 0.1, shots=200, seed=5)
    second = survival_record(fig1, 0.01, 50.0, 0.1, shots=200, seed=5)
    np.testing.assert_array_equal(first.probabilities, second.probabilities)
    assert np.all(np.isclose(first.probabilities * 200, np.round(first.probabilities * 200)))


def test_energy_offset_is_invisible(fig2: SpinNetwork) -> None:
    plain = survival_record(fig2, 0.01, 200.0, 0.1)
    shifted = survival_record(fig2, 0.01, 200.0, 0.1, offset=0.3)
    np.testing.assert_allclose(plain.probabilities, shifted.probabilities, atol=1e-9)


@pytest.mark.slow
def test_fig1_levels_are_recovered_as_pairs(fig1: SpinNetwork) -> None:
    record = survival_record(fig1, 0.01, 5000.0, 0.1)
    result = resolve_signs(fig1, estimate_spectrum(record))
    assert result.aso_symmetric is True
    for energy, alpha in _bright_levels(fig1):
        matches = [e for e in result.estimates if abs(e.lambda_hat - energy) < 5e-3]
        assert matches, f"level {energy:.6g} not recovered"
        assert matches[0].alpha_hat == pytest.approx(alpha, rel=0.1)


@pytest.mark.slow
def test_triangle_tail_signs_match_the_spectrum(triangle_tail: SpinNetwork) -> None:
    record = survival_record(triangle_tail, 0.01, 5000.0, 0.1)
    result = resolve_signs(triangle_tail, estimate_spectrum(record))
    assert result.aso_symmetric is False
    signed = [e for e in result.estimates if e.lambda_hat != 0.0]
    assert signed
    assert all(e.sign_resolved for e in signed)
    for energy, _ in _bright_levels(triangle_tail):
        if abs(energy) < 1e-9:
            continue
        assert any(abs(e.lambda_hat - energy) < 5e-3 for e in signed), f"sign of {energy:.6g}"


def test_zero_level_alone_is_not_paired(pendant_pair: SpinNetwork) -> None:
    result = IdentificationResult(
        estimates=(Estimate(lambda_hat=0.0, alpha_hat=1.0, overlap=math.sqrt(0.5), sign_resolved=True),),
        resolution=0.01,
        epsilon=0.05,
        zero_level=True,
    )
    resolved = resolve_signs(pendant_pair, result)
    assert resolved.aso_symmetric is False
    assert resolved.estimates == result.estimates


def test_record_export(pendant_pair: SpinNetwork, tmp_path) -> None:
    record = survival_record(pendant_pair, 0.05, 10.0, 0.5)
    path = tmp_path / "record.csv"
    export_record(record, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["time", "p"]
    assert len(frame) == 21
    assert frame["p"].iloc[0] == pytest.approx(1.0)


def test_bipartite_levels_are_paired_without_scans(fig1: SpinNetwork) -> None:
    spec = spectral(fig1)
    estimates = []
    for index in spec.bright:
        energy, alpha = float(spec.eigenvalues[index]), float(spec.overlaps[index])
        if abs(energy) < 1e-9:
            estimates.append(Estimate(lambda_hat=0.0, alpha_hat=alpha, overlap=math.sqrt(0.5)))
        elif energy > 0.0:
            estimates.append(
                Estimate(lambda_hat=energy, alpha_hat=math.sqrt(2.0) * alpha, overlap=0.01)
            )
    result = IdentificationResult(
        estimates=tuple(estimates), resolution=1e-3, epsilon=0.01, zero_level=True
    )
    resolved = resolve_signs(fig1, result)
    assert resolved.aso_symmetric is True
    for energy, alpha in _bright_levels(fig1):
        matches = [e for e in resolved.estimates if abs(e.lambda_hat - energy) < 1e-9]
        assert len(matches) == 1
        assert matches[0].alpha_hat == pytest.approx(alpha, rel=1e-9)
        assert not matches[0].sign_resolved


def _errors(net: SpinNetwork, epsilon: float) -> tuple[float, float]:
    record = survival_record(net, epsilon, 4000.0, 0.5)
    result = estimate_spectrum(record)
    assert not result.zero_level
    assert len(result.estimates) == 1
    estimate = result.estimates[0]
    return abs(estimate.lambda_hat - 1.0), abs(estimate.alpha_hat - 1.0)


def test_recovery_error_shrinks_with_the_drive() -> None:
    # Exact levels sqrt(1 + eps^2) with alpha 1 / sqrt(1 + eps^2): errors scale as eps^2.
    net = network_from_dict({"n": 3, "drift_edges": [[2, 3, 1.0]], "control_edges": [[1, 2, 1.0]]})
    large = _errors(net, 0.015)
    small = _errors(net, 0.0075)
    for coarse, fine in zip(large, small, strict=True):
        assert coarse < 1e-3
        assert fine < 0.5 * coarse
    resolved = resolve_signs(net, estimate_spectrum(survival_record(net, 0.0075, 4000.0, 0.5)))
    assert resolved.aso_symmetric is True
    assert [round(e.lambda_hat, 3) for e in resolved.estimates] == [-1.0, 1.0]
    for estimate in resolved.estimates:
        assert estimate.alpha_hat == pytest.approx(1 / math.sqrt(2.0), abs=1e-3)
