"""Time evolution under a pulse schedule, exact and in the rotating frame."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import eigh, expm

from .const import (
    HERMITIAN_ATOL,
    LOGGER,
    NORM_ATOL,
    NORMALIZATION_DRIFT,
    PENDANT_VERTEX,
    STEP_SCALE,
    TRAJECTORY_SAMPLES,
)
from .data import MARKERS, PulseKind, PulseSchedule, PulseSegment, SectorBasis, SimulationResult
from .errors import NormalizationDriftError, SectorMismatchError
from .operators import direct_sum_sector, sector_basis

if TYPE_CHECKING:
    from .data import FidelityBound, SpinNetwork

# Frequencies closer than this are treated as one resonance.
RESONANCE_ATOL = 1e-7


def lift(basis: SectorBasis, k: int, vector: np.ndarray) -> np.ndarray:
    """Place a single-sector vector into the concatenated basis."""
    if k not in basis.ks:
        msg = f"sector {k} is not part of {list(basis.ks)}"
        raise SectorMismatchError(msg)
    position = basis.ks.index(k)
    block = basis.offsets()[position]
    vector = np.asarray(vector, dtype=complex)
    if vector.shape != (block.stop - block.start,):
        msg = f"vector of length {vector.shape} does not fit sector {k}"
        raise SectorMismatchError(msg)
    out = np.zeros(basis.size, dtype=complex)
    out[block] = vector
    return out


def sector_part(basis: SectorBasis, k: int, state: np.ndarray) -> np.ndarray:
    """Return the amplitudes of one sector."""
    return np.asarray(state)[basis.offsets()[basis.ks.index(k)]]


def flip_pendant(basis: SectorBasis, state: np.ndarray) -> np.ndarray:
    """
    Apply X on spin 1: |S> -> |S xor {1}>.

    Amplitude whose image falls outside the basis must vanish.
    """
    out = np.zeros_like(state)
    for index, occupied in enumerate(basis.states):
        amplitude = state[index]
        image = tuple(sorted(set(occupied) ^ {PENDANT_VERTEX}))
        if image in basis.states:
            out[basis.index(image)] = amplitude
        elif abs(amplitude) > NORM_ATOL:
            msg = f"flipping spin 1 moves weight out of sectors {list(basis.ks)}"
            raise SectorMismatchError(msg)
    return out


def state_fidelity(
    final: np.ndarray, target: np.ndarray, basis: SectorBasis
) -> tuple[float, bool, float | None]:
    """
    Return (fidelity, sector_phase_optimized, relative_phase).

    A target spread over several sectors is scored after choosing the best
    relative phase between sectors, i.e. (sum_k |<t_k|psi_k>|)^2.
    """
    overlaps = []
    for block in basis.offsets():
        if np.linalg.norm(target[block]) > NORM_ATOL:
            overlaps.append(np.vdot(target[block], final[block]))
    if len(overlaps) <= 1:
        value = abs(np.vdot(target, final)) ** 2
        return float(min(value, 1.0)), False, None
    value = sum(abs(o) for o in overlaps) ** 2
    relative = float(np.angle(overlaps[1] * np.conj(overlaps[0])))
    return float(min(value, 1.0)), True, relative


@dataclass
class _Block:
    """Cached eigendata of one sector for split-step propagation."""

    energies: np.ndarray
    drift_vectors: np.ndarray
    couplings: np.ndarray
    mixing: np.ndarray
    drift_norm: float
    control_norm: float

    @classmethod
    def build(cls, drift: np.ndarray, control: np.ndarray) -> _Block:
        energies, drift_vectors = eigh(drift)
        levels, control_vectors = eigh(control)
        keep = np.abs(levels) > HERMITIAN_ATOL
        mixing = control_vectors[:, keep].conj().T @ drift_vectors
        return cls(
            energies=energies,
            drift_vectors=drift_vectors,
            couplings=levels[keep],
            mixing=mixing,
            drift_norm=float(np.max(np.abs(energies), initial=0.0)),
            control_norm=float(np.max(np.abs(levels), initial=0.0)),
        )

    def free(self, state: np.ndarray, duration: float) -> np.ndarray:
        coords = self.drift_vectors.conj().T @ state
        return self.drift_vectors @ (np.exp(-1j * self.energies * duration) * coords)

    def driven(
        self, state: np.ndarray, drive: np.ndarray, step: float, stride: int
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Strang-split steps exp(-iDh/2) exp(-i f C h) exp(-iDh/2) at midpoint drives."""
        half = np.exp(-0.5j * self.energies * step)
        undo = np.conj(half)
        full = half * half
        coords = half * (self.drift_vectors.conj().T @ state)
        samples: list[np.ndarray] = []
        last = len(drive) - 1
        mixing, mixing_h = self.mixing, self.mixing.conj().T
        for index, value in enumerate(drive):
            if mixing.shape[0]:
                rotated = mixing @ coords
                coords = coords + mixing_h @ ((np.exp(-1j * value * step * self.couplings) - 1.0) * rotated)
            if index == last:
                coords = half * coords
            else:
                coords = full * coords
                if (index + 1) % stride == 0:
                    samples.append(self.drift_vectors @ (undo * coords))
        return self.drift_vectors @ coords, samples


class Propagator:
    """Split-step propagation of a state over the sectors of a schedule."""

    def __init__(self, net: SpinNetwork, sectors: tuple[int, ...]) -> None:
        """Build drift and control blocks for every sector."""
        drift, control = direct_sum_sector(net, list(sectors))
        self.basis: SectorBasis = drift.basis
        self.slices = self.basis.offsets()
        self.blocks = [
            _Block.build(drift.entries[s, s], control.entries[s, s]) for s in self.slices
        ]

    def max_step(self, segment: PulseSegment) -> float:
        """Return the step cap STEP_SCALE / ||H|| for a segment."""
        peak = segment.amplitude * 2.0 * len(segment.carriers)
        norm = max(b.drift_norm + peak * b.control_norm for b in self.blocks)
        return STEP_SCALE / max(norm, STEP_SCALE)

    def run(
        self, schedule: PulseSchedule, initial: np.ndarray, dt: float | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (final state, sample times, sampled states)."""
        state = np.asarray(initial, dtype=complex).copy()
        spacing = max(schedule.total_duration / TRAJECTORY_SAMPLES, 1e-12)
        times, states = [0.0], [state.copy()]
        clock = 0.0
        for number, segment in enumerate(schedule.segments):
            if segment.kind in MARKERS:
                state = flip_pendant(self.basis, state)
                times.append(clock)
                states.append(state.copy())
                LOGGER.debug("Segment %d: %s at t=%.6g", number, segment.kind, clock)
                continue
            if segment.kind is PulseKind.FREE:
                count = max(1, int(segment.duration / spacing))
                marks = segment.duration * (np.arange(count) + 1) / count
                start = state
                for mark in marks:
                    state = self._free(start, mark)
                    times.append(clock + float(mark))
                    states.append(state.copy())
            else:
                state, sample_times, sampled = self._driven(segment, state, clock, spacing, dt)
                times.extend(sample_times)
                states.extend(sampled)
                times.append(clock + segment.duration)
                states.append(state.copy())
            clock += segment.duration
            drift = abs(float(np.vdot(state, state).real) - 1.0)
            if drift > NORMALIZATION_DRIFT:
                msg = f"norm drifted by {drift:.3g} in segment {number}, reduce dt"
                raise NormalizationDriftError(msg)
            LOGGER.debug("Segment %d (%s) done at t=%.6g", number, segment.kind, clock)
        return state, np.array(times), np.array(states)

    def _free(self, state: np.ndarray, duration: float) -> np.ndarray:
        out = np.zeros_like(state)
        for block, piece in zip(self.blocks, self.slices, strict=True):
            if np.linalg.norm(state[piece]) > 0.0:
                out[piece] = block.free(state[piece], duration)
        return out

    def _driven(
        self,
        segment: PulseSegment,
        state: np.ndarray,
        clock: float,
        spacing: float,
        dt: float | None,
    ) -> tuple[np.ndarray, list[float], list[np.ndarray]]:
        cap = self.max_step(segment)
        step = cap if dt is None else min(dt, cap)
        count = max(1, math.ceil(segment.duration / step))
        step = segment.duration / count
        stride = max(1, round(spacing / step))
        drive = np.asarray(segment.drive(clock + (np.arange(count) + 0.5) * step), dtype=float)
        out = np.zeros_like(state)
        per_block: list[tuple[slice, list[np.ndarray]]] = []
        for block, piece in zip(self.blocks, self.slices, strict=True):
            if np.linalg.norm(state[piece]) == 0.0:
                continue
            out[piece], samples = block.driven(state[piece], drive, step, stride)
            per_block.append((piece, samples))
        sample_count = (count - 1) // stride
        sampled = []
        for position in range(sample_count):
            snapshot = np.zeros_like(state)
            for piece, samples in per_block:
                snapshot[piece] = samples[position]
            sampled.append(snapshot)
        sample_times = [clock + (p + 1) * stride * step for p in range(sample_count)]
        return out, sample_times, sampled


def simulate(
    net: SpinNetwork,
    schedule: PulseSchedule,
    initial: np.ndarray,
    dt: float | None = None,
    *,
    target: np.ndarray | None = None,
    bound: FidelityBound | None = None,
) -> SimulationResult:
    """
    Propagate i d/dt psi = (H0 + f(t) HC) psi through a schedule.

    `initial` and `target` are vectors over the concatenated sectors of the
    schedule. Driven segments use split-step exponentials at midpoint drive
    values with steps no larger than STEP_SCALE / ||H||; free segments and
    catalyst markers are applied exactly.
    """
    basis = sector_basis(net.n, list(schedule.sectors))
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (basis.size,):
        msg = f"initial state has {initial.shape[0]} amplitudes, sectors {list(schedule.sectors)} need {basis.size}"
        raise SectorMismatchError(msg)
    if abs(float(np.linalg.norm(initial)) - 1.0) > NORM_ATOL:
        msg = "initial state is not normalized"
        raise SectorMismatchError(msg, reason="invalid_target")
    propagator = Propagator(net, tuple(schedule.sectors))
    LOGGER.info(
        "Simulating %d segments over t=%.6g in sectors %s",
        len(schedule.segments),
        schedule.total_duration,
        list(schedule.sectors),
    )
    final, times, states = propagator.run(schedule, initial, dt)
    fidelity, optimized, relative = (float("nan"), False, None)
    if target is not None:
        target = np.asarray(target, dtype=complex)
        if target.shape != (basis.size,):
            msg = f"target has {target.shape[0]} amplitudes, expected {basis.size}"
            raise SectorMismatchError(msg)
        fidelity, optimized, relative = state_fidelity(final, target, basis)
        if bound is not None and fidelity > bound.value + 1e-6:
            LOGGER.warning("Fidelity %.9f exceeds bound %.9f", fidelity, bound.value)
    return SimulationResult(
        final_state=final,
        fidelity=fidelity,
        times=times,
        populations=np.abs(states) ** 2,
        labels=basis.labels,
        bound=bound,
        sector_phase_optimized=optimized,
        relative_phase=relative,
    )


class RotatingFrame:
    """
    Effective Hamiltonian of a drive segment in the interaction picture of H0.

    Resonant terms enter at first order; off-resonant terms enter through
    their second-order commutators [h^dagger, h] / omega, which carry the
    light shifts and two-tone (Raman) couplings. Phases of the drive are
    referenced to absolute time, so the interaction picture is global and a
    schedule reduces to a product of constant-generator exponentials.
    """

    def __init__(self, drift: np.ndarray, control: np.ndarray) -> None:
        """Diagonalize the drift once."""
        self.energies, self.vectors = eigh(drift)
        self.control = self.vectors.conj().T @ control @ self.vectors
        self._gaps = self.energies[:, None] - self.energies[None, :]
        self._cache: dict[tuple, np.ndarray] = {}

    @property
    def dim(self) -> int:
        """Return the sector dimension."""
        return len(self.energies)

    def effective(self, segment: PulseSegment) -> np.ndarray:
        """Return the effective Hamiltonian of a driven segment, in the drift eigenbasis."""
        key = (segment.carriers, segment.phases, segment.amplitude)
        if key in self._cache:
            return self._cache[key]
        rows, cols = np.nonzero(np.abs(self.control) > HERMITIAN_ATOL)
        values = self.control[rows, cols]
        freqs, coeffs, rr, cc = [], [], [], []
        for omega, phase in zip(segment.carriers, segment.phases, strict=True):
            for sign in (-1.0, 1.0):
                freqs.append(self._gaps[rows, cols] + sign * omega)
                coeffs.append(segment.amplitude * np.exp(1j * sign * phase) * values)
                rr.append(rows)
                cc.append(cols)
        freq = np.concatenate(freqs) if freqs else np.zeros(0)
        coeff = np.concatenate(coeffs) if coeffs else np.zeros(0, dtype=complex)
        rows_all = np.concatenate(rr) if rr else np.zeros(0, dtype=int)
        cols_all = np.concatenate(cc) if cc else np.zeros(0, dtype=int)
        effective = np.zeros((self.dim, self.dim), dtype=complex)
        order = np.argsort(freq)
        start = 0
        while start < len(order):
            stop = start + 1
            while stop < len(order) and freq[order[stop]] - freq[order[start]] < RESONANCE_ATOL:
                stop += 1
            members = order[start:stop]
            centre = float(np.mean(freq[members]))
            term = np.zeros((self.dim, self.dim), dtype=complex)
            np.add.at(term, (rows_all[members], cols_all[members]), coeff[members])
            if abs(centre) < RESONANCE_ATOL:
                effective += term
            elif centre < 0.0:
                # term multiplies exp(-i |centre| t)
                effective += (term.conj().T @ term - term @ term.conj().T) / abs(centre)
            start = stop
        effective = 0.5 * (effective + effective.conj().T)
        self._cache[key] = effective
        return effective

    def unitary(self, segment: PulseSegment) -> np.ndarray:
        """Return the interaction-picture propagator of one segment."""
        if segment.kind is PulseKind.FREE or segment.amplitude == 0.0:
            return np.eye(self.dim, dtype=complex)
        return expm(-1j * segment.duration * self.effective(segment))

    def to_frame(self, state: np.ndarray, time: float) -> np.ndarray:
        """Return e^{iEt} V^dagger psi."""
        return np.exp(1j * self.energies * time) * (self.vectors.conj().T @ state)

    def from_frame(self, coords: np.ndarray, time: float) -> np.ndarray:
        """Return V e^{-iEt} psi_I."""
        return self.vectors @ (np.exp(-1j * self.energies * time) * coords)


class FramePredictor:
    """Run a whole schedule with per-sector rotating-frame models."""

    def __init__(self, net: SpinNetwork, sectors: tuple[int, ...]) -> None:
        """Build one RotatingFrame per sector."""
        drift, control = direct_sum_sector(net, list(sectors))
        self.basis = drift.basis
        self.slices = self.basis.offsets()
        self.frames = [
            RotatingFrame(drift.entries[s, s], control.entries[s, s]) for s in self.slices
        ]

    def frame(self, k: int) -> RotatingFrame:
        """Return the model of sector k."""
        return self.frames[self.basis.ks.index(k)]

    def run(self, schedule: PulseSchedule, initial: np.ndarray) -> np.ndarray:
        """Return the predicted lab-frame state at the end of the schedule."""
        coords = [f.to_frame(np.asarray(initial)[s], 0.0) for f, s in zip(self.frames, self.slices, strict=True)]
        clock = 0.0
        for segment in schedule.segments:
            if segment.kind in MARKERS:
                lab = self._lab(coords, clock)
                lab = flip_pendant(self.basis, lab)
                coords = [f.to_frame(lab[s], clock) for f, s in zip(self.frames, self.slices, strict=True)]
                continue
            if segment.kind is not PulseKind.FREE:
                coords = [
                    f.unitary(segment) @ c if np.linalg.norm(c) > 0.0 else c
                    for f, c in zip(self.frames, coords, strict=True)
                ]
            clock += segment.duration
        return self._lab(coords, clock)

    def _lab(self, coords: list[np.ndarray], time: float) -> np.ndarray:
        out = np.zeros(self.basis.size, dtype=complex)
        for frame, piece, c in zip(self.frames, self.slices, coords, strict=True):
            out[piece] = frame.from_frame(c, time)
        return out
