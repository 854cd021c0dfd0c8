"""Pulse schedules for single-excitation transfer and catalytic protocols."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.linalg import eigh, null_space
from scipy.optimize import minimize_scalar

from .bounds import (
    check_target,
    classify_dark,
    degenerate_groups,
    max_fidelity,
    pair_states,
    permutation_blocker,
    phase_reachability,
    rotate_degenerate,
    spectral,
)
from .const import (
    DARK_THRESHOLD,
    DEFAULT_QUALITY,
    DEGENERACY_RTOL,
    LOGGER,
    PENDANT_VERTEX,
    RAMAN_DETUNING_FRACTION,
    REFINE_BUDGET,
    RWA_CAP,
)
from .data import DarkKind, PulseKind, PulseSchedule, PulseSegment
from .errors import (
    InfeasibleTaskError,
    NotDarkError,
    SpinNetworkValidationError,
    SynthesisError,
)
from .operators import excitation_basis, restrict, sector_basis
from .propagation import FramePredictor, RotatingFrame, lift, simulate

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Sequence
    from pathlib import Path

    from .data import SimulationResult, SpectralData, SpinNetwork

type Objective = Callable[[Sequence[PulseSegment]], float]

AMPLITUDE_FLOOR = 1e-9
COUPLING_FLOOR = 1e-6
PHASE_GRID = 12
GUARD_TIME = 1.0


def _wrap(phase: float) -> float:
    return float(np.angle(np.exp(1j * phase)))


def sector_state(n: int, sectors: tuple[int, ...], vector: np.ndarray | None = None) -> np.ndarray:
    """Place a single-excitation vector (|1> by default) into the concatenated sectors."""
    return lift(sector_basis(n, list(sectors)), 1, _unit(n) if vector is None else vector)


def transition_gap(levels: Iterable[float]) -> float:
    """Return the smallest spacing among {0} and the |levels|, or 1.0 when there is none."""
    points = np.sort(np.abs(np.concatenate([[0.0], np.asarray(list(levels), dtype=float)])))
    scale = max(float(points[-1]), 1.0)
    spacings = np.diff(points)
    spacings = spacings[spacings > DEGENERACY_RTOL * scale]
    return float(spacings.min()) if spacings.size else 1.0


def drive_amplitude(quality: float, gap: float) -> float:
    """Turn a leakage tolerance into a drive amplitude epsilon = quality * gap."""
    if not quality > 0.0:
        msg = f"quality must be positive, got {quality}"
        raise SpinNetworkValidationError(msg, field="--quality")
    if quality > RWA_CAP:
        LOGGER.warning("Quality %.3g clipped to the RWA cap %.3g", quality, RWA_CAP)
        quality = RWA_CAP
    return quality * gap


@dataclass
class _Group:
    """Levels driven together by one carrier."""

    members: tuple[int, ...]
    carrier: float
    rate: float
    weight: float
    raman: bool = False


def _transfer_groups(
    spec: SpectralData, gamma: np.ndarray, *, allow_raman: bool
) -> list[_Group]:
    """Group bright levels by |lambda|, heaviest target weight first."""
    values = spec.eigenvalues
    alpha = np.abs(spec.overlaps)
    scale = max(float(np.max(np.abs(values))), 1.0)
    bright = spec.bright
    groups: list[_Group] = []
    seen: set[int] = set()
    for n in bright:
        if n in seen:
            continue
        if abs(values[n]) < DEGENERACY_RTOL * scale:
            members, carrier, rate = (n,), 0.0, 2.0 * alpha[n]
        else:
            partners = [
                m
                for m in bright
                if m != n and abs(abs(values[m]) - abs(values[n])) < DEGENERACY_RTOL * scale
            ]
            if len(partners) > 1:
                msg = f"{len(partners) + 1} bright levels share |lambda| = {abs(values[n]):.6g}"
                raise SynthesisError(msg)
            members = tuple(sorted((n, *partners), key=lambda m: -values[m]))
            carrier = float(abs(values[n]))
            rate = float(np.sqrt(np.sum(alpha[list(members)] ** 2)))
        seen.update(members)
        weight = float(np.linalg.norm(gamma[list(members)]))
        if weight < AMPLITUDE_FLOOR:
            continue
        raman = False
        if len(members) == 2:  # noqa: PLR2004
            a, b = members
            mismatch = abs(abs(gamma[a]) * alpha[b] - abs(gamma[b]) * alpha[a])
            if mismatch > 1e-6 * weight * rate:
                if not allow_raman:
                    msg = (
                        f"levels {values[a]:.6g} and {values[b]:.6g} are degenerate in |lambda| "
                        "and the target needs a Raman transition, which is disabled"
                    )
                    raise SynthesisError(msg, reason="raman_required")
                raman = True
        groups.append(_Group(members, carrier, rate, weight, raman))
    groups.sort(key=lambda g: -g.weight)
    return groups


def _durations(groups: list[_Group], epsilon: float) -> list[float]:
    """Pulse durations for areas arcsin(|gamma_g| / remaining amplitude)."""
    remaining = 1.0
    durations = []
    for group in groups:
        ratio = min(1.0, group.weight / remaining) if remaining > AMPLITUDE_FLOOR else 1.0
        durations.append(math.asin(ratio) / (epsilon * group.rate))
        remaining = math.sqrt(max(remaining**2 - group.weight**2, 0.0))
    return durations


def _global_phase(gamma: np.ndarray, groups: list[_Group]) -> float:
    """Pick the output phase G that the first constrained group can produce."""
    for group in groups:
        if group.carrier == 0.0:
            product = gamma[group.members[0]] ** 2
        elif len(group.members) == 2:  # noqa: PLR2004
            product = gamma[group.members[0]] * gamma[group.members[1]]
        else:
            continue
        if abs(product) > AMPLITUDE_FLOOR**2:
            return 0.5 * (math.pi - float(np.angle(product)))
    return 0.0


def _group_phase(
    spec: SpectralData, gamma: np.ndarray, group: _Group, rotation: complex, total: float
) -> float:
    """
    Return the drive phase loading e^{iG} e^{i lambda T} gamma_n in the frame of H0.

    A resonant tone leaves -i e^{-i s phi} on the level, s the sign of lambda.
    """
    lead = max(group.members, key=lambda m: abs(gamma[m]))
    value = float(spec.eigenvalues[lead])
    coefficient = rotation * np.exp(1j * value * total) * gamma[lead]
    if group.carrier == 0.0:
        return 0.0 if (1j * coefficient).real > 0.0 else math.pi
    return _wrap(-math.copysign(1.0, value) * float(np.angle(1j * coefficient)))


def _sector_frame(net: SpinNetwork, k: int) -> RotatingFrame:
    return RotatingFrame(restrict(net, "drift", k).entries, restrict(net, "control", k).entries)


def _raman_segment(
    spec: SpectralData,
    frame: RotatingFrame,
    group: _Group,
    gamma: np.ndarray,
    epsilon: float,
    detuning: float,
) -> PulseSegment:
    """Two-tone segment rotating a loaded +/- pair to the target ratio."""
    trial = PulseSegment(
        PulseKind.RAMAN,
        duration=1.0,
        carriers=(group.carrier - detuning, group.carrier + detuning),
        amplitude=epsilon,
        phases=(0.0, 0.0),
        label=f"raman |lambda|={group.carrier:.6g}",
    )
    a, b = group.members
    local = frame.vectors.conj().T @ spec.eigenvectors[:, [a, b]]
    coupling = abs(np.vdot(local[:, 0], frame.effective(trial) @ local[:, 1]))
    if coupling < COUPLING_FLOOR * epsilon**2:
        msg = f"no Raman coupling between levels {a} and {b}"
        raise SynthesisError(msg)
    alpha = np.abs(spec.overlaps)
    loaded = math.atan2(alpha[b], alpha[a])
    wanted = math.atan2(abs(gamma[b]), abs(gamma[a]))
    return replace(trial, duration=abs(wanted - loaded) / coupling)


def _transfer_segments(
    spec: SpectralData,
    gamma: np.ndarray,
    epsilon: float,
    gap: float,
    *,
    allow_raman: bool = False,
    tail: float = 0.0,
) -> list[PulseSegment]:
    """Rabi segments loading the coefficients gamma, phased for a schedule ending `tail` later."""
    groups = _transfer_groups(spec, gamma, allow_raman=allow_raman)
    if not groups:
        msg = "target has no bright component to load"
        raise SynthesisError(msg)
    durations = _durations(groups, epsilon)
    raman: dict[int, PulseSegment] = {}
    if any(g.raman for g in groups):
        frame = _sector_frame(spec.network, 1)
        detuning = RAMAN_DETUNING_FRACTION * gap
        for index, group in enumerate(groups):
            if group.raman:
                raman[index] = _raman_segment(spec, frame, group, gamma, epsilon, detuning)
    total = sum(durations) + sum(s.duration for s in raman.values()) + tail
    rotation = np.exp(1j * _global_phase(gamma, groups))
    segments = []
    for index, (group, duration) in enumerate(zip(groups, durations, strict=True)):
        segments.append(
            PulseSegment(
                PulseKind.RABI,
                duration=duration,
                carriers=(group.carrier,),
                amplitude=epsilon,
                phases=(_group_phase(spec, gamma, group, rotation, total),),
                label="load " + ", ".join(f"{spec.eigenvalues[m]:.6g}" for m in group.members),
            )
        )
        if index in raman:
            segments.append(raman[index])
        LOGGER.debug(
            "Group %s at carrier %.6g: weight %.6g, duration %.6g",
            group.members,
            group.carrier,
            group.weight,
            duration,
        )
    return segments


def _objective(
    predictor: FramePredictor, initial: np.ndarray, goal: np.ndarray
) -> Objective:
    sectors = tuple(predictor.basis.ks)

    def overlap(segments: Sequence[PulseSegment]) -> float:
        final = predictor.run(PulseSchedule(tuple(segments), sectors=sectors), initial)
        return float(abs(np.vdot(goal, final)) ** 2)

    return overlap


def _with_phase(segment: PulseSegment, tone: int, phase: float) -> PulseSegment:
    phases = list(segment.phases)
    phases[tone] = _wrap(phase)
    return replace(segment, phases=tuple(phases))


def _phase_search(
    objective: Objective, segments: list[PulseSegment], index: int, tone: int
) -> tuple[float, float]:
    """Grid the phase of one tone, then polish the best cell with a bounded search."""

    def score(phase: float) -> float:
        trial = list(segments)
        trial[index] = _with_phase(segments[index], tone, phase)
        return -objective(trial)

    segment = segments[index]
    start = segment.phases[tone]
    if segment.carriers[tone] == 0.0:
        grid = np.array([start, start + math.pi])
    else:
        grid = start + np.linspace(-math.pi, math.pi, PHASE_GRID, endpoint=False)
    values = [score(p) for p in grid]
    best = int(np.argmin(values))
    phase, value = float(grid[best]), -values[best]
    if segment.carriers[tone] != 0.0:
        width = math.pi / PHASE_GRID
        result = minimize_scalar(
            score, bounds=(phase - width, phase + width), method="bounded", options={"xatol": 1e-7}
        )
        if -result.fun > value:
            phase, value = float(result.x), -float(result.fun)
    return phase, value


def _calibrate(
    objective: Objective,
    segments: list[PulseSegment],
    indices: Iterable[int],
    *,
    sweeps: int = 2,
) -> tuple[list[PulseSegment], float]:
    """Coordinate ascent on the drive phases of the given segments."""
    segments = list(segments)
    indices = [i for i in indices if segments[i].kind in (PulseKind.RABI, PulseKind.RAMAN)]
    best = objective(segments)
    for sweep in range(sweeps):
        for index in indices:
            for tone in range(len(segments[index].phases)):
                phase, value = _phase_search(objective, segments, index, tone)
                if value > best:
                    best = value
                    segments[index] = _with_phase(segments[index], tone, phase)
        LOGGER.debug("Calibration sweep %d: predicted overlap %.9f", sweep, best)
    return segments, best


def synthesize_transfer(
    spec: SpectralData,
    target: np.ndarray,
    quality: float = DEFAULT_QUALITY,
    *,
    allow_raman: bool = False,
    calibrate: bool = True,
) -> PulseSchedule:
    """
    Build Rabi segments that move |1> onto the optimal output for `target`.

    Levels are loaded one carrier at a time (a +/- pair shares one carrier) in
    descending order of target weight, with pulse areas
    arcsin(|gamma_g| / remaining amplitude). The drive amplitude is
    quality times the smallest transition spacing. Phases start from the
    resonant two-level solution and are then calibrated on the rotating-frame
    model, which also supplies the predicted fidelity.
    """
    net = spec.network
    if net is None:
        msg = "spectral data carries no network"
        raise SynthesisError(msg)
    bound = max_fidelity(net, target, spec)
    if bound.value <= 0.0:
        msg = "target lies entirely in dark blocks"
        raise SynthesisError(msg, reason="no_bright_weight")
    if not bound.phase_attainable:
        msg = "target breaks the bipartite phase pattern of states reachable from |1>"
        raise SynthesisError(msg, reason="phase_unreachable")
    gamma = bound.optimal_output
    gap = transition_gap(spec.eigenvalues[spec.bright])
    epsilon = drive_amplitude(quality, gap)
    segments = _transfer_segments(spec, gamma, epsilon, gap, allow_raman=allow_raman)

    predictor = FramePredictor(net, (1,))
    initial = lift(predictor.basis, 1, _unit(net.n))
    goal = lift(predictor.basis, 1, spec.eigenvectors @ gamma)
    objective = _objective(predictor, initial, goal)
    if calibrate:
        segments, overlap = _calibrate(objective, segments, range(len(segments)))
    else:
        overlap = objective(segments)
    LOGGER.info(
        "Transfer schedule: %d segments, epsilon %.4g, predicted fidelity %.6f",
        len(segments),
        epsilon,
        bound.value * overlap,
    )
    return PulseSchedule(
        tuple(segments), sectors=(1,), rwa_cap=RWA_CAP * gap, predicted_fidelity=bound.value * overlap
    )


def _unit(n: int) -> np.ndarray:
    vector = np.zeros(n, dtype=complex)
    vector[PENDANT_VERTEX - 1] = 1.0
    return vector


@dataclass
class _Bridge:
    """A two-excitation route from a donor level to the catalytic dark state."""

    donor: tuple[int, ...]
    states: tuple[int, ...]
    carrier_a: float
    carrier_b: float
    coupling_a: float
    coupling_b: float
    gap_a: float
    gap_b: float

    @property
    def score(self) -> float:
        """Return the slower of the two isolated transfer rates."""
        return min(self.gap_a * self.coupling_a, self.gap_b * self.coupling_b)


class _PairSector:
    """
    The two-excitation sector split by the state of spin 1.

    With the control off, spin 1 is decoupled, so the sector is the direct sum
    of |1> (x) (single excitation on spins 2..n) and the pair states of spins
    2..n. The control couples the two manifolds only.
    """

    def __init__(
        self, net: SpinNetwork, spec: SpectralData, dark: np.ndarray, dark_energy: float
    ) -> None:
        """Diagonalize both manifolds with the accessible levels and the dark state kept whole."""
        basis = excitation_basis(net.n, 2)
        self.control = restrict(net, "control", 2).entries
        drift = restrict(net, "drift", 2).entries
        right = [i for i, s in enumerate(basis.states) if PENDANT_VERTEX not in s]
        values, vectors = eigh(drift[np.ix_(right, right)])
        self.right_values = values
        self.right_vectors = np.zeros((basis.size, len(right)), dtype=complex)
        self.right_vectors[right, :] = vectors
        self.right_groups = degenerate_groups(values)

        levels = spec.eigenvectors[:, 1:]
        known = np.column_stack([levels, dark, _unit(net.n)])
        rest = null_space(known.conj().T)
        adjacency = restrict(net, "drift", 1).entries
        rest_values, rest_local = np.zeros(0), np.zeros((0, 0))
        if rest.shape[1]:
            rest_values, rest_local = eigh(rest.conj().T @ adjacency @ rest)
        self.left_values = np.concatenate([spec.eigenvalues[1:], [dark_energy], rest_values])
        self.left_vectors = pair_states(
            net.n, np.column_stack([levels, dark, rest @ rest_local])
        )
        self.dark_index = levels.shape[1]
        self.scale = max(float(np.max(np.abs(self.left_values))), float(np.max(np.abs(values))), 1.0)

    def level(self, n: int) -> int:
        """Return the left-manifold column of accessible level n."""
        return n - 1

    def partner_group(self, energy: float) -> list[int] | None:
        """Return the right-manifold eigenspace at `energy`, if any."""
        for group in self.right_groups:
            if abs(self.right_values[group[0]] - energy) < DEGENERACY_RTOL * self.scale:
                return group
        return None

    def transitions(self, rotated: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (right index, left index, frequency) of every coupled pair."""
        couplings = rotated.conj().T @ self.control @ self.left_vectors
        rows, cols = np.nonzero(np.abs(couplings) > COUPLING_FLOOR)
        freqs = np.abs(self.left_values[cols] - self.right_values[rows])
        return rows, cols, freqs


def _isolation(
    transitions: tuple[np.ndarray, np.ndarray, np.ndarray],
    carrier: float,
    intended: set[tuple[int, int]],
    left: set[int],
    right: set[int],
) -> float:
    """Distance from the carrier to the nearest unintended transition touching a used state."""
    best = math.inf
    for r, c, f in zip(*transitions, strict=True):
        if (int(r), int(c)) in intended or (int(c) not in left and int(r) not in right):
            continue
        best = min(best, abs(f - carrier), f + carrier)
    return best


def _donors(spec: SpectralData) -> list[tuple[int, ...]]:
    donors = []
    for n in spec.bright:
        partner = spec.paired_with.get(n)
        if partner is None:
            donors.append((n,))
        elif spec.eigenvalues[n] > 0.0:
            donors.append((n, partner))
    return donors


def _bridges(
    sector: _PairSector,
    spec: SpectralData,
    populated: set[int],
    dark_energy: float,
) -> list[_Bridge]:
    """Score every (donor, bridge eigenspace) route by isolation times coupling."""
    tol = DEGENERACY_RTOL * sector.scale
    dark_pump = sector.control @ sector.left_vectors[:, sector.dark_index]
    found = []
    for donor in _donors(spec):
        if len(donor) == 2 and abs(dark_energy) > tol:  # noqa: PLR2004
            continue
        energy = float(spec.eigenvalues[donor[0]])
        for group in sector.right_groups:
            mu = float(sector.right_values[group[0]])
            carrier_a, carrier_b = abs(energy - mu), abs(mu - dark_energy)
            if carrier_a < tol or carrier_b < tol:
                continue
            slots = [(group, donor[0])]
            if len(donor) == 2:  # noqa: PLR2004
                mirror = sector.partner_group(-mu)
                if mirror is None or mirror == group:
                    continue
                slots.append((mirror, donor[1]))
            rotated = sector.right_vectors.copy()
            states, coupling_a, coupling_b = [], math.inf, 0.0
            for slot, level in slots:
                pump = sector.control @ sector.left_vectors[:, sector.level(level)]
                columns = sector.right_vectors[:, slot]
                projected = columns @ (columns.conj().T @ pump)
                strength = float(np.linalg.norm(projected))
                coupling_a = min(coupling_a, strength)
                rotated[:, slot] = rotate_degenerate(columns, pump)
                states.append(slot[0])
                coupling_b += float(abs(np.vdot(rotated[:, slot[0]], dark_pump)) ** 2)
            coupling_b = math.sqrt(coupling_b)
            if coupling_a < COUPLING_FLOOR or coupling_b < COUPLING_FLOOR:
                continue
            transitions = sector.transitions(rotated)
            left = {sector.level(n) for n in populated} | {sector.dark_index}
            right = set(states)
            pump_pairs = {
                (state, sector.level(level)) for state, (_, level) in zip(states, slots, strict=True)
            }
            dump_pairs = {(state, sector.dark_index) for state in states}
            found.append(
                _Bridge(
                    donor=donor,
                    states=tuple(states),
                    carrier_a=carrier_a,
                    carrier_b=carrier_b,
                    coupling_a=coupling_a,
                    coupling_b=coupling_b,
                    gap_a=_isolation(transitions, carrier_a, pump_pairs, left, right),
                    gap_b=_isolation(transitions, carrier_b, dump_pairs, left, right),
                )
            )
    return sorted(found, key=lambda b: -b.score)


def _dark_energy(net: SpinNetwork, dark: np.ndarray) -> float:
    adjacency = restrict(net, "drift", 1).entries
    energy = float(np.real(np.vdot(dark, adjacency @ dark)))
    if np.linalg.norm(adjacency @ dark - energy * dark) > 1e-8:
        msg = "the dark part of the target spans several drift energies"
        raise SynthesisError(msg)
    return energy


def _intermediate(
    spec: SpectralData, beta: np.ndarray, donor: tuple[int, ...], dark_weight: float
) -> np.ndarray:
    """Return the bright state whose donor group carries the extra dark weight."""
    coefficients = np.zeros_like(beta)
    bright = spec.bright
    coefficients[bright] = beta[bright]
    group = list(donor)
    loaded = float(np.linalg.norm(beta[group]))
    if loaded > AMPLITUDE_FLOOR:
        coefficients[group] *= math.sqrt(loaded**2 + dark_weight) / loaded
        return spec.eigenvectors @ coefficients
    for chi in (0.0, 0.5 * math.pi):
        for sign in (1.0, -1.0):
            trial = coefficients.copy()
            trial[group[0]] = math.sqrt(dark_weight / len(group)) * np.exp(1j * chi)
            if len(group) == 2:  # noqa: PLR2004
                trial[group[1]] = sign * trial[group[0]]
            state = spec.eigenvectors @ trial
            if phase_reachability(spec.network, state, spec)[0]:
                return state
    msg = f"no reachable loading of donor levels {donor}"
    raise SynthesisError(msg)


def plan_catalysis(
    net: SpinNetwork,
    target: np.ndarray,
    quality: float = DEFAULT_QUALITY,
    *,
    spec: SpectralData | None = None,
    calibrate: bool = True,
) -> PulseSchedule:
    """
    Plan a transfer that borrows a second excitation on spin 1.

    The bright part of the target is loaded with one donor level overfilled,
    a catalyst is injected on spin 1, two resonant drives move the surplus
    through a bridge eigenstate of the spins 2..n pair manifold onto the dark
    state (with the catalyst still on spin 1), and the catalyst is extracted.
    Targets without dark weight fall back to synthesize_transfer; targets
    with weight on states that break an automorphism fixing spins 1 and 2
    are infeasible.
    """
    target = check_target(target, net.n)
    spec = spec or spectral(net)
    bound = max_fidelity(net, target, spec)
    beta = bound.target_decomposition
    bright_part = spec.eigenvectors[:, spec.bright] @ beta[spec.bright]
    dark = target - bright_part
    dark_weight = float(np.real(np.vdot(dark, dark)))
    if dark_weight <= DARK_THRESHOLD:
        LOGGER.info("Target has no dark weight, planning a direct transfer")
        return synthesize_transfer(spec, target, quality, calibrate=calibrate)

    loss, blocker = permutation_blocker(net, dark)
    if loss > DARK_THRESHOLD:
        msg = f"target puts weight {loss:.6g} on states that break automorphism {blocker}"
        raise InfeasibleTaskError(msg, blocker=blocker)
    try:
        classification = classify_dark(net, dark, spec)
    except NotDarkError as exception:
        msg = "the dark part of the target lies inside the accessible block"
        raise SynthesisError(msg) from exception
    if classification.kind is DarkKind.TRULY_DARK:
        msg = "the dark part of the target stays dark with a catalytic excitation"
        raise InfeasibleTaskError(msg, blocker=classification.blocker)

    unit_dark = dark / math.sqrt(dark_weight)
    dark_energy = _dark_energy(net, unit_dark)
    sector = _PairSector(net, spec, unit_dark, dark_energy)
    populated = {n for n in spec.bright if abs(beta[n]) > AMPLITUDE_FLOOR}
    candidates = _bridges(sector, spec, populated, dark_energy)
    if not candidates:
        msg = "no two-excitation bridge links a bright level to the dark state"
        raise SynthesisError(msg)
    route = candidates[0]
    LOGGER.info(
        "Bridge through pair-sector energies %s from donor %s (carriers %.6g, %.6g)",
        [float(sector.right_values[s]) for s in route.states],
        route.donor,
        route.carrier_a,
        route.carrier_b,
    )
    intermediate = _intermediate(spec, beta, route.donor, dark_weight)
    gamma = spec.eigenvectors.conj().T @ intermediate
    gap = min(transition_gap(spec.eigenvalues[spec.bright]), route.gap_a, route.gap_b)
    epsilon = drive_amplitude(quality, gap)

    donor_weight = float(np.linalg.norm(beta[list(route.donor)]))
    theta = math.atan2(math.sqrt(dark_weight), donor_weight)
    pump = PulseSegment(
        PulseKind.RABI,
        duration=theta / (epsilon * route.coupling_a),
        carriers=(route.carrier_a,),
        amplitude=epsilon,
        phases=(0.0,),
        label="bridge pump",
    )
    dump = PulseSegment(
        PulseKind.RABI,
        duration=0.5 * math.pi / (epsilon * route.coupling_b),
        carriers=(route.carrier_b,),
        amplitude=epsilon,
        phases=(0.0,),
        label="bridge dump",
    )
    guard = PulseSegment(PulseKind.FREE, duration=GUARD_TIME, label="guard")
    tail = (
        guard,
        PulseSegment(PulseKind.INJECT, label="inject"),
        guard,
        pump,
        dump,
        guard,
        PulseSegment(PulseKind.EXTRACT, label="extract"),
        guard,
    )
    loading = _transfer_segments(
        spec, gamma, epsilon, gap, tail=sum(s.duration for s in tail)
    )
    segments = [*loading, *tail]
    sectors = (0, 1, 2, 3)
    predictor = FramePredictor(net, sectors)
    initial = lift(predictor.basis, 1, _unit(net.n))
    goal = lift(predictor.basis, 1, target)
    objective = _objective(predictor, initial, goal)
    pump_index = len(loading) + 3
    if calibrate:
        segments = _grid_pair(objective, segments, pump_index, pump_index + 1)
        segments, predicted = _calibrate(objective, segments, range(len(segments)), sweeps=1)
    else:
        predicted = objective(segments)
    LOGGER.info("Catalytic schedule: %d segments, predicted fidelity %.6f", len(segments), predicted)
    return PulseSchedule(
        tuple(segments), sectors=sectors, rwa_cap=RWA_CAP * gap, predicted_fidelity=predicted
    )


def _grid_pair(
    objective: Objective, segments: list[PulseSegment], first: int, second: int
) -> list[PulseSegment]:
    """Joint phase grid for two segments whose phases only matter together."""
    grid = np.linspace(-math.pi, math.pi, PHASE_GRID, endpoint=False)
    best, choice = -1.0, (0.0, 0.0)
    for a in grid:
        for b in grid:
            trial = list(segments)
            trial[first] = _with_phase(segments[first], 0, a)
            trial[second] = _with_phase(segments[second], 0, b)
            value = objective(trial)
            if value > best:
                best, choice = value, (float(a), float(b))
    out = list(segments)
    out[first] = _with_phase(segments[first], 0, choice[0])
    out[second] = _with_phase(segments[second], 0, choice[1])
    LOGGER.debug("Bridge phases %s give predicted overlap %.6f", choice, best)
    return out


def refine_schedule(
    net: SpinNetwork,
    schedule: PulseSchedule,
    initial: np.ndarray,
    target: np.ndarray,
    *,
    seed: int,
    budget: int = REFINE_BUDGET,
    dt: float | None = None,
) -> tuple[PulseSchedule, SimulationResult]:
    """
    Polish phases and durations by seeded coordinate descent on the simulator.

    Each trial is one full simulation; at most `budget` are run. A move is
    kept only when it raises the simulated fidelity, and step sizes halve
    after a pass without improvement.
    """
    rng = np.random.default_rng(seed)
    best = simulate(net, schedule, initial, dt, target=target)
    calls = 1
    knobs = [
        (index, tone)
        for index, segment in enumerate(schedule.segments)
        if segment.kind in (PulseKind.RABI, PulseKind.RAMAN)
        for tone in (*range(len(segment.phases)), -1)
    ]
    phase_step, duration_step = 0.05, 2e-3
    while calls < budget and knobs and phase_step > 1e-5:  # noqa: PLR2004
        improved = False
        for knob in rng.permutation(len(knobs)):
            index, tone = knobs[int(knob)]
            for direction in (1.0, -1.0):
                if calls >= budget:
                    break
                segment = schedule.segments[index]
                if tone < 0:
                    changed = replace(segment, duration=segment.duration * (1 + direction * duration_step))
                else:
                    changed = _with_phase(segment, tone, segment.phases[tone] + direction * phase_step)
                trial = replace(
                    schedule,
                    segments=(*schedule.segments[:index], changed, *schedule.segments[index + 1 :]),
                )
                result = simulate(net, trial, initial, dt, target=target)
                calls += 1
                if result.fidelity > best.fidelity + 1e-12:
                    schedule, best, improved = trial, result, True
                    break
        if not improved:
            phase_step, duration_step = phase_step / 2, duration_step / 2
    LOGGER.info("Refinement used %d simulations, fidelity %.9f", calls, best.fidelity)
    return replace(schedule, predicted_fidelity=best.fidelity), best


def export_trajectory(result: SimulationResult, path: str | Path) -> None:
    """Write time plus one population column per basis label as CSV."""
    frame = pd.DataFrame(result.populations, columns=result.labels)
    frame.insert(0, "time", result.times)
    frame.to_csv(path, index=False, float_format="%.12g")
