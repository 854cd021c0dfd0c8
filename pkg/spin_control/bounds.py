"""Accessible-block spectra, fidelity bounds and dark-state classification."""

from __future__ import annotations

from typing import TYPE_CHECKING

import networkx as nx
import numpy as np
from scipy.linalg import eigh

from .const import (
    CONTROL_VERTEX,
    DARK_THRESHOLD,
    DEGENERACY_RTOL,
    LOGGER,
    NORM_ATOL,
    PENDANT_VERTEX,
    PHASE_ATOL,
)
from .data import (
    Bipartition,
    DarkClassification,
    DarkComponent,
    DarkKind,
    Decomposition,
    FidelityBound,
    SpectralData,
    SpinNetwork,
)
from .errors import NotDarkError, TargetError
from .network import automorphisms, bipartition, coupling_graph, require_pendant
from .operators import excitation_basis, restrict
from .symmetries import embed, find_asos, invariant_closure, network_decomposition, restrict_to_block

if TYPE_CHECKING:
    from collections.abc import Iterable

_TWO = CONTROL_VERTEX - 1
_ONE = PENDANT_VERTEX - 1


def _unit(n: int, index: int) -> np.ndarray:
    vector = np.zeros(n, dtype=complex)
    vector[index] = 1.0
    return vector


def _fix_phase(vector: np.ndarray, pivot: int) -> np.ndarray:
    """Rotate so entry `pivot` is positive real, or the largest entry if that one vanishes."""
    value = vector[pivot]
    if abs(value) < DARK_THRESHOLD:
        value = vector[int(np.argmax(np.abs(vector)))]
    return vector * (abs(value) / value)


def degenerate_groups(values: np.ndarray) -> list[list[int]]:
    scale = max(float(np.max(np.abs(values), initial=0.0)), 1.0)
    groups: list[list[int]] = []
    for index, value in enumerate(values):
        if groups and value - values[groups[-1][-1]] < DEGENERACY_RTOL * scale:
            groups[-1].append(index)
        else:
            groups.append([index])
    return groups


def rotate_degenerate(vectors: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    """Within one eigenspace keep only the direction of the anchor's projection bright."""
    if vectors.shape[1] == 1:
        return vectors
    projected = vectors @ (vectors.conj().T @ anchor)
    if np.linalg.norm(projected) < DARK_THRESHOLD:
        return vectors
    first = projected / np.linalg.norm(projected)
    rest = vectors - np.outer(first, first.conj() @ vectors)
    values, basis = eigh(rest @ rest.conj().T)
    others = basis[:, values > 0.5][:, : vectors.shape[1] - 1]  # noqa: PLR2004
    return np.column_stack([first, others])


def primed_basis(decomposition: Decomposition, n: int) -> np.ndarray:
    """Return an orthonormal basis of the accessible block with |1> removed."""
    projector = decomposition.accessible.projector
    one = _unit(n, _ONE)
    reduced = projector - np.outer(one, one) * float(np.real(one @ projector @ one))
    values, basis = eigh(reduced)
    return basis[:, values > 0.5]  # noqa: PLR2004


def drive_component(net: SpinNetwork) -> set[int]:
    """Return the vertices connected to spin 1 once the control edge is drawn."""
    graph = coupling_graph(net, include_control=True)
    return set(nx.node_connected_component(graph, PENDANT_VERTEX))


def spectral(net: SpinNetwork) -> SpectralData:
    """
    Eigen-decompose the drift on the accessible block.

    Column 0 is |1> with eigenvalue 0 and overlap 0; the other columns are
    eigenvectors of A on the block with |1> removed, phased so that
    alpha_n = <2|lambda_n> is non-negative. When the block carries an ASO the
    +/- lambda partners are recorded in `paired_with`.
    """
    require_pendant(net)
    hams, decomposition = network_decomposition(net)
    adjacency = hams[0].entries
    basis = primed_basis(decomposition, net.n)
    values, local = eigh(basis.conj().T @ adjacency @ basis)
    vectors = basis @ local
    anchor = _unit(net.n, _TWO)
    columns = []
    for group in degenerate_groups(values):
        columns.append(rotate_degenerate(vectors[:, group], anchor))
    vectors = np.column_stack([_fix_phase(v, _TWO) for v in np.column_stack(columns).T])
    overlaps = np.real(vectors[_TWO, :]).copy()
    overlaps[np.abs(overlaps) < DARK_THRESHOLD] = 0.0

    eigenvalues = np.concatenate([[0.0], values])
    eigenvectors = np.column_stack([_unit(net.n, _ONE), vectors])
    overlaps = np.concatenate([[0.0], overlaps])

    aso, parts, pairs = None, None, {}
    restricted = restrict_to_block(hams, decomposition, decomposition.accessible_index)
    if found := find_asos(restricted):
        found[0].block = decomposition.accessible_index
        aso = embed(found[0], decomposition)
        parts = bipartition(net, drive_component(net), include_control=True)
        pairs = _pairs(eigenvalues, eigenvectors, aso)
    LOGGER.debug("Spectrum %s with overlaps %s", eigenvalues, overlaps)
    return SpectralData(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        overlaps=overlaps,
        decomposition=decomposition,
        paired_with=pairs,
        bipartition=parts,
        aso=aso,
        network=net,
    )


def _pairs(values: np.ndarray, vectors: np.ndarray, aso: np.ndarray) -> dict[int, int]:
    """Match each non-zero level with the level its ASO image lands on."""
    scale = max(float(np.max(np.abs(values))), 1.0)
    pairs: dict[int, int] = {}
    for index in range(1, len(values)):
        if abs(values[index]) < DEGENERACY_RTOL * scale:
            continue
        image = aso @ vectors[:, index]
        weights = np.abs(vectors.conj().T @ image)
        partner = int(np.argmax(weights))
        if abs(values[partner] + values[index]) < 1e-8 * scale:
            pairs[index] = partner
    return pairs


def check_target(target: np.ndarray, n: int) -> np.ndarray:
    """Validate a single-excitation transfer target."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (n,):
        msg = f"target must have {n} amplitudes, got shape {target.shape}"
        raise TargetError(msg)
    if abs(float(np.linalg.norm(target)) - 1.0) > NORM_ATOL:
        msg = f"target is not normalized (norm {np.linalg.norm(target):.6g})"
        raise TargetError(msg)
    if abs(target[_ONE]) > NORM_ATOL:
        msg = "target overlaps |1>, the transfer setting needs <1|target> = 0"
        raise TargetError(msg)
    return target


def _canonical_vector(vector: np.ndarray) -> np.ndarray:
    vector = vector / np.linalg.norm(vector)
    return _fix_phase(vector, int(np.argmax(np.abs(vector))))


def max_fidelity(
    net: SpinNetwork, target: np.ndarray, spec: SpectralData | None = None
) -> FidelityBound:
    """
    Return the best fidelity for turning |1> into `target`.

    The bound is one minus the target weight in dark blocks and dark
    eigenvectors. The optimal output keeps the bright coefficients,
    renormalized.
    """
    target = check_target(target, net.n)
    spec = spec or spectral(net)
    decomposition = spec.decomposition
    components: list[DarkComponent] = []
    for index in decomposition.dark_indices:
        part = decomposition.blocks[index].projector @ target
        weight = float(np.real(np.vdot(part, part)))
        if weight > DARK_THRESHOLD**2:
            components.append(DarkComponent(index, _canonical_vector(part), weight))
    beta = spec.eigenvectors.conj().T @ target
    bright = set(spec.bright)
    for index in range(1, len(beta)):
        weight = float(abs(beta[index]) ** 2)
        if index not in bright and weight > DARK_THRESHOLD**2:
            vector = spec.eigenvectors[:, index]
            components.append(
                DarkComponent(decomposition.accessible_index, _canonical_vector(vector), weight)
            )
    value = min(max(1.0 - sum(c.weight for c in components), 0.0), 1.0)
    gamma = np.zeros_like(beta)
    if value > 0.0:
        for index in bright:
            gamma[index] = beta[index] / np.sqrt(value)
    attainable, phase = (False, None)
    if value > 0.0:
        attainable, phase = phase_reachability(net, spec.eigenvectors @ gamma, spec)
    LOGGER.debug("Fidelity bound %.12g with %d dark components", value, len(components))
    return FidelityBound(
        value=value,
        dark_components=tuple(components),
        phase_attainable=attainable,
        target_decomposition=beta,
        optimal_output=gamma,
        global_phase=phase,
    )


def max_subspace_fidelity(
    decomposition: Decomposition, initial: np.ndarray, target: np.ndarray
) -> float:
    """Return (sum_d ||P_d in|| ||P_d out||)^2 for any pair of normalized states."""
    total = 0.0
    for block in decomposition.blocks:
        projector = block.projector
        total += float(np.linalg.norm(projector @ initial) * np.linalg.norm(projector @ target))
    return min(total**2, 1.0)


def _partition(net: SpinNetwork, spec: SpectralData | None) -> Bipartition | None:
    if spec is not None:
        return spec.bipartition if spec.has_aso else None
    return bipartition(net, drive_component(net), include_control=True)


def phase_reachability(
    net: SpinNetwork, target: np.ndarray, spec: SpectralData | None = None
) -> tuple[bool, float | None]:
    """
    Check the bipartite phase pattern of a target.

    A state reachable from |1> is real on part A and imaginary on part B up
    to one global phase. Returns (True, phase) with the phase that makes
    e^{i phase} * target follow that pattern, or (False, None). Networks
    without a bipartite drive component are unconstrained.
    """
    parts = _partition(net, spec)
    if parts is None:
        return True, 0.0
    target = np.asarray(target, dtype=complex)
    gauge = np.array(
        [
            target[v - 1] if parts.side(v) >= 0 else -1j * target[v - 1]
            for v in net.vertices
        ]
    )
    inside = np.array([parts.side(v) != 0 for v in net.vertices])
    gauge = np.where(inside, gauge, 0.0)
    pivot = gauge[int(np.argmax(np.abs(gauge)))]
    if abs(pivot) < NORM_ATOL:
        return True, 0.0
    phase = -float(np.angle(pivot))
    rotated = gauge * np.exp(1j * phase)
    scale = max(float(np.max(np.abs(gauge))), 1.0)
    if float(np.max(np.abs(rotated.imag))) > PHASE_ATOL * scale:
        return False, None
    return True, float(np.angle(np.exp(1j * phase)))


def partition_phase_operator(net: SpinNetwork) -> np.ndarray:
    """Return diag(1 on part A, i on part B), identity off the drive component."""
    parts = bipartition(net, drive_component(net), include_control=True)
    diagonal = np.ones(net.n, dtype=complex)
    if parts is not None:
        for v in parts.part_b:
            diagonal[v - 1] = 1j
    return np.diag(diagonal)


def symmetric_projector(net: SpinNetwork) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Return the projector onto states fixed by every automorphism pinning spins 1 and 2."""
    perms = automorphisms(net, fixed={PENDANT_VERTEX, CONTROL_VERTEX})
    total = np.eye(net.n, dtype=complex)
    for perm in perms:
        matrix = np.zeros((net.n, net.n), dtype=complex)
        for v in net.vertices:
            matrix[perm[v - 1] - 1, v - 1] = 1.0
        total += matrix
    return total / (len(perms) + 1), perms


def permutation_blocker(
    net: SpinNetwork, vector: np.ndarray
) -> tuple[float, tuple[int, ...] | None]:
    """Return the non-symmetric weight of a vector and the automorphism it breaks most."""
    projector, perms = symmetric_projector(net)
    symmetric = projector @ vector
    loss = float(np.real(np.vdot(vector, vector) - np.vdot(symmetric, symmetric)))
    blocker = None
    if perms and loss > DARK_THRESHOLD:
        moved = [float(np.linalg.norm(_permute(vector, p) - vector)) for p in perms]
        blocker = perms[int(np.argmax(moved))]
    return max(loss, 0.0), blocker


def _permute(vector: np.ndarray, perm: tuple[int, ...]) -> np.ndarray:
    out = np.zeros_like(vector)
    for v, image in enumerate(perm, start=1):
        out[image - 1] = vector[v - 1]
    return out


def pair_states(n: int, vectors: np.ndarray) -> np.ndarray:
    """Map single-excitation vectors w (with w_1 = 0) to |1> (x) w in the pair sector."""
    basis = excitation_basis(n, 2)
    out = np.zeros((basis.size, vectors.shape[1]), dtype=complex)
    for v in range(2, n + 1):
        out[basis.index((PENDANT_VERTEX, v))] = vectors[v - 1]
    return out


def catalytic_space(net: SpinNetwork, spec: SpectralData | None = None) -> np.ndarray:
    """
    Return the pair-sector subspace reachable from |1> (x) H_a'.

    This is the invariant closure, under the two-excitation drift and control,
    of the states with the catalyst on spin 1 and one excitation in the
    accessible block.
    """
    spec = spec or spectral(net)
    seeds = pair_states(net.n, spec.eigenvectors[:, 1:])
    pair_hams = [restrict(net, "drift", 2).entries, restrict(net, "control", 2).entries]
    return invariant_closure(pair_hams, seeds)


def _connected_to_seeds(net: SpinNetwork, support: Iterable[int], seeds: np.ndarray) -> bool:
    """Check that the catalyst states of `support` share a component with the seeds."""
    basis = excitation_basis(net.n, 2)
    total = restrict(net, "drift", 2).entries + restrict(net, "control", 2).entries
    graph = nx.from_numpy_array((np.abs(total) > 0).astype(int))
    starts = {basis.index((PENDANT_VERTEX, v)) for v in support if v != PENDANT_VERTEX}
    targets = {int(i) for i in np.nonzero(np.linalg.norm(seeds, axis=1) > DARK_THRESHOLD)[0]}
    reach: set[int] = set()
    for start in starts:
        reach |= nx.node_connected_component(graph, start)
    return bool(reach & targets)


def classify_dark(
    net: SpinNetwork, dark_vector: np.ndarray, spec: SpectralData | None = None
) -> DarkClassification:
    """
    Decide whether a dark vector can be reached with a catalytic excitation.

    Truly dark vectors either break an automorphism that pins spins 1 and 2,
    or stay outside the pair-sector space reachable from the accessible block.
    """
    spec = spec or spectral(net)
    vector = np.asarray(dark_vector, dtype=complex)
    norm = float(np.linalg.norm(vector))
    if norm < NORM_ATOL:
        msg = "dark vector is zero"
        raise NotDarkError(msg)
    vector = vector / norm
    accessible = spec.decomposition.accessible.projector
    bright = float(np.real(np.vdot(vector, accessible @ vector)))
    if bright > DARK_THRESHOLD:
        msg = f"vector has weight {bright:.3g} in the accessible block"
        raise NotDarkError(msg)

    loss, blocker = permutation_blocker(net, vector)
    if loss > DARK_THRESHOLD:
        LOGGER.debug("Dark vector breaks automorphism %s (weight %.3g)", blocker, loss)
        return DarkClassification(
            kind=DarkKind.TRULY_DARK, blocker=blocker, symmetric_weight=1.0 - loss
        )
    support = [v for v in net.vertices if abs(vector[v - 1]) > DARK_THRESHOLD]
    seeds = pair_states(net.n, spec.eigenvectors[:, 1:])
    if not _connected_to_seeds(net, support, seeds):
        return DarkClassification(kind=DarkKind.TRULY_DARK)
    space = catalytic_space(net, spec)
    lifted = pair_states(net.n, vector.reshape(-1, 1))[:, 0]
    reached = float(np.linalg.norm(space.conj().T @ lifted) ** 2)
    kind = DarkKind.CATALYTICALLY_ACCESSIBLE if reached > DARK_THRESHOLD else DarkKind.TRULY_DARK
    LOGGER.debug("Dark vector reaches the catalytic space with weight %.6g", reached)
    return DarkClassification(kind=kind, accessible_weight=reached)
