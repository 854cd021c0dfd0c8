"""Black-box identification of the accessible spectrum from survival records."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.linalg import eigh
from scipy.signal import find_peaks

from .bounds import drive_component
from .const import (
    LOGGER,
    PEAK_MEDIAN_FACTOR,
    PENDANT_VERTEX,
    PERTURBATIVE_FRACTION,
    RWA_CAP,
    SIGN_SCAN_PHASES,
    UNIDENTIFIABLE_ALPHA,
)
from .data import Estimate, IdentificationResult, PulseKind, PulseSchedule, PulseSegment, SurvivalRecord
from .errors import (
    NoResolvablePeaksError,
    NyquistError,
    OverlappingPeaksError,
    SignResolutionError,
    SpinNetworkValidationError,
)
from .network import bipartition
from .operators import restrict, sector_basis
from .propagation import simulate
from .pulses import transition_gap

if TYPE_CHECKING:
    from pathlib import Path

    from .data import SpinNetwork

KAISER_BETA = 20.0
ZERO_PAD = 8
MAX_LINES = 64
LINE_DYNAMIC_RANGE = 1e-9
ZERO_LINE_AMPLITUDE = 0.1
SLOPE_FLOOR = 0.1
RETURN_FLOOR = 0.5


def weak_drive_hamiltonian(net: SpinNetwork, epsilon: float, offset: float = 0.0) -> np.ndarray:
    """Return A + offset * 1 + epsilon * C on the single-excitation sector."""
    drift = restrict(net, "drift", 1).entries
    control = restrict(net, "control", 1).entries
    return drift + offset * np.eye(net.n) + epsilon * control


def survival_record(
    net: SpinNetwork,
    epsilon: float,
    T: float,  # noqa: N803
    dt: float,
    *,
    shots: int | None = None,
    seed: int | None = None,
    offset: float = 0.0,
) -> SurvivalRecord:
    """
    Sample p(t) = |<1| exp(-i (A + eps C) t) |1>|^2 on t = 0, dt, ..., T.

    The record is exact unless `shots` is given, in which case each sample is
    a binomial estimate from that many shots drawn with `seed`. `offset`
    shifts every single-excitation energy, which no survival record can see.
    """
    if epsilon < 0.0 or not math.isfinite(epsilon):
        msg = f"drive amplitude must be a non-negative number, got {epsilon}"
        raise SpinNetworkValidationError(msg, field="--epsilon")
    if not (T > 0.0 and dt > 0.0):
        msg = f"duration and step must be positive, got T={T}, dt={dt}"
        raise SpinNetworkValidationError(msg, field="--dt")
    if shots is not None and seed is None:
        msg = "shot noise needs a seed"
        raise SpinNetworkValidationError(msg, field="--seed")
    energies, vectors = eigh(weak_drive_hamiltonian(net, epsilon, offset))
    spread = float(energies[-1] - energies[0])
    if spread > 0.0 and dt > math.pi / spread:
        msg = f"dt={dt} exceeds the Nyquist step {math.pi / spread:.6g} for this network"
        raise NyquistError(msg)
    levels = np.unique(np.round(eigh(restrict(net, "drift", 1).entries, eigvals_only=True), 9))
    spacing = float(np.min(np.diff(levels))) if levels.size > 1 else math.inf
    if epsilon > PERTURBATIVE_FRACTION * spacing:
        LOGGER.warning(
            "Drive amplitude %.3g is outside the perturbative regime (spacing %.3g)",
            epsilon,
            spacing,
        )
    times = dt * np.arange(round(T / dt) + 1)
    weights = np.abs(vectors[PENDANT_VERTEX - 1, :]) ** 2
    amplitude = np.exp(-1j * np.outer(times, energies)) @ weights
    probabilities = np.clip(np.abs(amplitude) ** 2, 0.0, 1.0)
    if shots is not None:
        rng = np.random.default_rng(seed)
        probabilities = rng.binomial(shots, probabilities) / shots
    LOGGER.debug("Recorded %d samples with epsilon %.4g", times.size, epsilon)
    return SurvivalRecord(
        epsilon=epsilon, times=times, probabilities=probabilities, duration=T, dt=dt, shots=shots
    )


def _lines(record: SurvivalRecord) -> tuple[np.ndarray, np.ndarray]:
    """Return (angular frequency, cosine amplitude) of the resolved spectral lines."""
    signal = record.probabilities - np.mean(record.probabilities)
    window = np.kaiser(signal.size, KAISER_BETA)
    size = ZERO_PAD * signal.size
    spectrum = np.abs(np.fft.rfft(signal * window, n=size))
    top = float(np.max(spectrum))
    if top == 0.0:
        msg = "the survival probability is constant, |1> does not couple to the network"
        raise NoResolvablePeaksError(msg)
    height = max(PEAK_MEDIAN_FACTOR * float(np.median(spectrum)), LINE_DYNAMIC_RANGE * top)
    peaks, _ = find_peaks(spectrum, height=height)
    peaks = peaks[np.argsort(spectrum[peaks])[::-1][:MAX_LINES]]
    step = 2.0 * math.pi / (size * record.dt)
    gain = float(np.sum(window))
    freqs, amplitudes = [], []
    for k in peaks:
        if k + 1 >= spectrum.size:
            continue
        y0, y1, y2 = np.log(np.maximum(spectrum[k - 1 : k + 2], np.finfo(float).tiny))
        curvature = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / curvature if curvature < 0.0 else 0.0
        freqs.append((k + shift) * step)
        amplitudes.append(2.0 * math.exp(y1 - 0.25 * (y0 - y2) * shift) / gain)
    order = np.argsort(freqs)
    return np.asarray(freqs)[order], np.asarray(amplitudes)[order]


def _group_doublets(
    freqs: np.ndarray, amplitudes: np.ndarray, splitting: float, resolution: float
) -> list[tuple[float, float]]:
    """Merge lines split by the zero-level doublet into (centre, summed amplitude)."""
    merged = splitting < 2.0 * math.sqrt(1.0 + (KAISER_BETA / math.pi) ** 2) * resolution
    used: set[int] = set()
    levels = []
    for i, f in enumerate(freqs):
        if i in used:
            continue
        used.add(i)
        if not merged:
            partner = next(
                (
                    j
                    for j in range(i + 1, len(freqs))
                    if j not in used and abs(freqs[j] - f - splitting) < resolution
                ),
                None,
            )
            if partner is not None:
                used.add(partner)
                levels.append((0.5 * (f + freqs[partner]), amplitudes[i] + amplitudes[partner]))
                continue
        levels.append((float(f), float(amplitudes[i])))
    return levels


def _collisions(values: list[float], tolerance: float) -> tuple[float, ...]:
    """Return levels that coincide with a sum or difference of two others."""
    hits = []
    for c, target in enumerate(values):
        for a in range(len(values)):
            for b in range(a + 1, len(values)):
                if c in (a, b):
                    continue
                for combination in (values[a] + values[b], abs(values[a] - values[b])):
                    if abs(combination - target) < tolerance:
                        hits.append(target)
    return tuple(sorted(set(hits)))


def estimate_spectrum(record: SurvivalRecord) -> IdentificationResult:
    """
    Recover |lambda_n| and alpha_n from the Fourier lines of a survival record.

    Lines are anchored on the perturbed |1> level: a level lambda_n shows up
    at |lambda_n| with amplitude 2 |<1|eta_n>|^2, and a bright zero level
    splits |1> into a doublet at +/- eps alpha_0 whose beat dominates the
    record and whose partner lines come in pairs split by 2 eps alpha_0.
    """
    if record.epsilon == 0.0 or float(np.ptp(record.probabilities)) < 1e-12:  # noqa: PLR2004
        msg = "the survival probability is constant, |1> does not couple to the network"
        raise NoResolvablePeaksError(msg)
    epsilon = record.epsilon
    resolution = 2.0 * math.pi / record.duration
    freqs, amplitudes = _lines(record)

    estimates: list[Estimate] = []
    splitting = 0.0
    if amplitudes.size and amplitudes.max() > ZERO_LINE_AMPLITUDE:
        strongest = int(np.argmax(amplitudes))
        splitting = float(freqs[strongest])
        estimates.append(
            Estimate(
                lambda_hat=0.0,
                alpha_hat=splitting / (2.0 * epsilon),
                overlap=math.sqrt(0.5),
                sign_resolved=True,
            )
        )
        freqs = np.delete(freqs, strongest)
        amplitudes = np.delete(amplitudes, strongest)
        LOGGER.debug("Zero level split by %.6g", splitting)

    levels = _group_doublets(freqs, amplitudes, splitting, resolution) if splitting else list(
        zip(freqs.tolist(), amplitudes.tolist(), strict=True)
    )
    for frequency, amplitude in levels:
        overlap = math.sqrt(max(amplitude, 0.0) / 2.0)
        alpha = frequency * overlap / epsilon
        if alpha < UNIDENTIFIABLE_ALPHA:
            continue
        estimates.append(Estimate(lambda_hat=frequency, alpha_hat=alpha, overlap=overlap))
    if not estimates:
        msg = f"no spectral line above alpha={UNIDENTIFIABLE_ALPHA}, record too short or too weak"
        raise NoResolvablePeaksError(msg)

    values = sorted(e.lambda_hat for e in estimates)
    if any(b - a < resolution for a, b in zip(values, values[1:], strict=False)):
        msg = f"spectral lines closer than the resolution {resolution:.3g}"
        raise OverlappingPeaksError(msg)
    total = sum(e.alpha_hat**2 for e in estimates)
    if total > 1.1:  # noqa: PLR2004
        LOGGER.warning("Recovered overlaps sum to %.3g, above one", total)
    estimates.sort(key=lambda e: e.lambda_hat)
    return IdentificationResult(
        estimates=tuple(estimates),
        resolution=resolution,
        epsilon=epsilon,
        zero_level=bool(splitting),
        collisions=_collisions(values, resolution),
    )


def _phase_scan(
    net: SpinNetwork, estimate: Estimate, amplitude: float, dwell: float
) -> tuple[float, float, float]:
    """
    Run the phase-scan experiment for one level.

    Returns (p at phi=0, slope, returned population of |1>).

    The input (|0> + e^{i phi}|1>)/sqrt(2) has its excitation moved onto the
    level, left for `dwell`, and moved back by the same waveform restarted
    after the dwell; p is the population of (|0> + |1>)/sqrt(2).
    """
    carrier = estimate.lambda_hat
    duration = 0.5 * math.pi / (amplitude * estimate.alpha_hat)
    there = PulseSegment(
        PulseKind.RABI, duration=duration, carriers=(carrier,), amplitude=amplitude, phases=(0.0,)
    )
    back = replace(there, phases=(float(np.angle(np.exp(-1j * carrier * dwell))),))
    segments = [there, back]
    if dwell > 0.0:
        segments.insert(1, PulseSegment(PulseKind.FREE, duration=dwell))
    schedule = PulseSchedule(tuple(segments), sectors=(0, 1))
    basis = sector_basis(net.n, [0, 1])
    vacuum, one = basis.index(()), basis.index((PENDANT_VERTEX,))
    initial = np.zeros(basis.size, dtype=complex)
    initial[[vacuum, one]] = math.sqrt(0.5)
    final = simulate(net, schedule, initial).final_state
    kept = final[vacuum]
    moved = final[one]
    returned = float(2.0 * abs(moved) ** 2)
    phases = np.asarray(SIGN_SCAN_PHASES)
    scan = np.abs(kept + np.exp(1j * phases) * moved) ** 2 / 2.0
    slope = float(np.polyfit(phases, scan, 1)[0])
    centre = float(np.abs(kept + moved) ** 2 / 2.0)
    return centre, slope, returned


def resolve_signs(net: SpinNetwork, result: IdentificationResult) -> IdentificationResult:
    """
    Attach signs to unsigned levels with phase-scan experiments.

    A bipartite drive component carries an ASO, so every line is a +/- pair
    that a real control drives together and no experiment can split; such
    results are reported as pairs straight away. Otherwise, for each level a
    scan without dwell checks that the excitation returns, then a scan with
    |lambda| t = pi/2 gives p(phi) = (1 - s sin phi) / 2, whose slope at
    phi = 0 is -s/2. A scan that loses its contrast also marks a pair.
    """
    nonzero = [e for e in result.estimates if e.lambda_hat > 0.0]
    if not nonzero:
        return replace(result, aso_symmetric=False)
    if bipartition(net, drive_component(net), include_control=True) is not None:
        LOGGER.debug("Drive component is bipartite, skipping phase scans")
        return _paired(result)
    amplitude = RWA_CAP * transition_gap([e.lambda_hat for e in result.estimates])
    signed: list[Estimate] = [e for e in result.estimates if e.lambda_hat == 0.0]
    for estimate in nonzero:
        _, _, returned = _phase_scan(net, estimate, amplitude, 0.0)
        if returned < RETURN_FLOOR:
            msg = f"excitation did not return from level {estimate.lambda_hat:.6g} (population {returned:.3g})"
            raise SignResolutionError(msg)
        dwell = 0.5 * math.pi / estimate.lambda_hat
        centre, slope, _ = _phase_scan(net, estimate, amplitude, dwell)
        LOGGER.debug("Level %.6g: scan centre %.4g, slope %.4g", estimate.lambda_hat, centre, slope)
        if abs(slope) < SLOPE_FLOOR:
            if abs(centre - 0.25) < SLOPE_FLOOR:
                return _paired(result)
            msg = f"phase-scan slope {slope:.3g} for level {estimate.lambda_hat:.6g} is below the noise floor"
            raise SignResolutionError(msg)
        sign = -math.copysign(1.0, slope)
        signed.append(replace(estimate, lambda_hat=sign * estimate.lambda_hat, sign_resolved=True))
    signed.sort(key=lambda e: e.lambda_hat)
    return replace(result, estimates=tuple(signed), aso_symmetric=False)


def _paired(result: IdentificationResult) -> IdentificationResult:
    """Split every non-zero line into a +/- pair sharing its weight."""
    estimates = []
    for estimate in result.estimates:
        if estimate.lambda_hat == 0.0:
            estimates.append(estimate)
            continue
        for sign in (-1.0, 1.0):
            estimates.append(
                Estimate(
                    lambda_hat=sign * estimate.lambda_hat,
                    alpha_hat=estimate.alpha_hat / math.sqrt(2.0),
                    overlap=estimate.overlap / math.sqrt(2.0),
                )
            )
    estimates.sort(key=lambda e: e.lambda_hat)
    LOGGER.info("Phase scans show +/- pairing, signs are unresolvable by symmetry")
    return replace(
        result,
        estimates=tuple(estimates),
        aso_symmetric=True,
        collisions=tuple(sorted({abs(e.lambda_hat) for e in estimates if e.lambda_hat})),
    )


def export_record(record: SurvivalRecord, path: str | Path) -> None:
    """Write the record as a (time, p) CSV."""
    frame = pd.DataFrame({"time": record.times, "p": record.probabilities})
    frame.to_csv(path, index=False, float_format="%.12g")
