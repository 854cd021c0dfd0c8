"""Commuting and anticommuting symmetry search, block structure and Lie closure."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import eigh, null_space, orth

from .const import (
    CONTROL_VERTEX,
    DEGENERACY_RTOL,
    HERMITIAN_ATOL,
    LIE_RANK_RTOL,
    LOGGER,
    MAX_SYMMETRY_DIM,
    NULL_SPACE_RCOND,
)
from .data import Decomposition, InvariantBlock, OperatorMatrix, SymmetryKind, SymmetryOperator
from .errors import BudgetExceededError, LieClosureCapExceededError, SpinNetworkValidationError
from .operators import restrict

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .data import SpinNetwork

type HamiltonianLike = OperatorMatrix | np.ndarray

RESIDUAL_RTOL = 1e-9

# Fixed seed for the generic combination of central elements.
_CENTRE_SEED = 20240517


def as_arrays(hams: Sequence[HamiltonianLike]) -> list[np.ndarray]:
    """Return plain complex arrays that share one square shape."""
    arrays = [
        np.asarray(h.entries if isinstance(h, OperatorMatrix) else h, dtype=complex)
        for h in hams
    ]
    if not arrays:
        msg = "at least one Hamiltonian is required"
        raise SpinNetworkValidationError(msg, field="hams")
    shape = arrays[0].shape
    square = len(shape) == 2 and shape[0] == shape[1]  # noqa: PLR2004
    if not square or any(a.shape != shape for a in arrays):
        msg = "Hamiltonians must be square and share one basis"
        raise SpinNetworkValidationError(msg, field="hams", reason="shape")
    return arrays


def _check_budget(dim: int) -> None:
    if dim > MAX_SYMMETRY_DIM:
        msg = f"symmetry search limited to dimension {MAX_SYMMETRY_DIM}, got {dim}"
        raise BudgetExceededError(msg)


def _commutator_liouvillian(h: np.ndarray) -> np.ndarray:
    """Row-major vec([H, J]) = (H x 1 - 1 x H^T) vec(J)."""
    eye = np.eye(h.shape[0])
    return np.kron(h, eye) - np.kron(eye, h.T)


def _anticommutator_liouvillian(h: np.ndarray) -> np.ndarray:
    """Row-major vec(H^T J + J H) = (H^T x 1 + 1 x H^T) vec(J)."""
    eye = np.eye(h.shape[0])
    return np.kron(h.T, eye) + np.kron(eye, h.T)


def traceless(h: np.ndarray) -> np.ndarray:
    """Remove the trace of a square matrix."""
    return h - np.trace(h) / h.shape[0] * np.eye(h.shape[0])


def _to_real(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def _from_real(v: np.ndarray, dim: int) -> np.ndarray:
    half = dim * dim
    return (v[:half] + 1j * v[half:]).reshape(dim, dim)


def _canonical(m: np.ndarray) -> np.ndarray:
    """Scale so the largest-magnitude entry has unit size and a positive real part."""
    flat = m.ravel()
    pivot = flat[int(np.argmax(np.abs(flat)))]
    sign = -1.0 if pivot.real < -HERMITIAN_ATOL or (
        abs(pivot.real) <= HERMITIAN_ATOL and pivot.imag < 0
    ) else 1.0
    out = sign * m / abs(pivot)
    out[np.abs(out) < HERMITIAN_ATOL] = 0.0
    return out


def _hermitian_null_space(
    liouvillian: np.ndarray, dim: int, *, drop_identity: bool
) -> list[np.ndarray]:
    """Return Hermitian representatives spanning the null space of a stacked Liouvillian."""
    kernel = null_space(liouvillian, rcond=NULL_SPACE_RCOND)
    if kernel.shape[1] == 0:
        return []
    candidates = []
    for column in kernel.T:
        x = column.reshape(dim, dim)
        candidates.append(_to_real((x + x.conj().T) / 2))
        candidates.append(_to_real((x - x.conj().T) / 2j))
    stack = np.array(candidates).T
    if drop_identity:
        identity = _to_real(np.eye(dim, dtype=complex)) / np.sqrt(dim)
        stack = stack - np.outer(identity, identity @ stack)
    norms = np.linalg.norm(stack, axis=0)
    stack = stack[:, norms > np.sqrt(NULL_SPACE_RCOND)]
    if stack.shape[1] == 0:
        return []
    basis = orth(stack, rcond=NULL_SPACE_RCOND)
    return [_from_real(v, dim) for v in basis.T]


def _residual_ok(op: SymmetryOperator, arrays: list[np.ndarray]) -> bool:
    scale = max(float(np.linalg.norm(h)) for h in arrays) * float(np.linalg.norm(op.matrix))
    return op.residual(arrays) < RESIDUAL_RTOL * max(scale, 1.0)


def find_csos(hams: Sequence[HamiltonianLike]) -> list[SymmetryOperator]:
    """
    Return a Hermitian basis of the commutant with the identity removed.

    An empty list means only multiples of the identity commute with every H.
    """
    arrays = as_arrays(hams)
    dim = arrays[0].shape[0]
    _check_budget(dim)
    stacked = np.vstack([_commutator_liouvillian(h) for h in arrays])
    found = []
    for matrix in _hermitian_null_space(stacked, dim, drop_identity=True):
        op = SymmetryOperator(kind=SymmetryKind.CSO, matrix=_canonical(matrix))
        if _residual_ok(op, arrays):
            found.append(op)
        else:
            LOGGER.debug("Dropping CSO candidate with residual %.3g", op.residual(arrays))
    LOGGER.debug("Found %d CSOs in dimension %d", len(found), dim)
    return found


def find_asos(hams: Sequence[HamiltonianLike]) -> list[SymmetryOperator]:
    """
    Return a Hermitian basis of {J : H~^T J + J H~ = 0 for every H}.

    Each H~ is H with its trace removed.
    """
    arrays = [traceless(h) for h in as_arrays(hams)]
    dim = arrays[0].shape[0]
    _check_budget(dim)
    stacked = np.vstack([_anticommutator_liouvillian(h) for h in arrays])
    found = []
    for matrix in _hermitian_null_space(stacked, dim, drop_identity=False):
        op = SymmetryOperator(kind=SymmetryKind.ASO, matrix=_canonical(matrix))
        if _residual_ok(op, arrays):
            found.append(op)
        else:
            LOGGER.debug("Dropping ASO candidate with residual %.3g", op.residual(arrays))
    LOGGER.debug("Found %d ASOs in dimension %d", len(found), dim)
    return found


def _group_eigenvalues(values: np.ndarray) -> list[list[int]]:
    """Group sorted eigenvalues that agree within the degeneracy tolerance."""
    scale = max(float(np.max(np.abs(values))), 1.0)
    groups: list[list[int]] = [[0]]
    for index in range(1, len(values)):
        if values[index] - values[groups[-1][-1]] < DEGENERACY_RTOL * scale:
            groups[-1].append(index)
        else:
            groups.append([index])
    return groups


def _block_basis(vectors: np.ndarray) -> np.ndarray:
    """Prefer a real orthonormal basis when the projector is real."""
    projector = vectors @ vectors.conj().T
    if np.max(np.abs(projector.imag), initial=0.0) < HERMITIAN_ATOL:
        values, basis = eigh(projector.real)
        return basis[:, values > 0.5].astype(complex)  # noqa: PLR2004
    return vectors


def default_anchor(dim: int, anchor: np.ndarray | None) -> np.ndarray:
    """Return the given anchor vector or the unit vector of level 2."""
    if anchor is not None:
        return np.asarray(anchor, dtype=complex)
    vector = np.zeros(dim, dtype=complex)
    vector[min(CONTROL_VERTEX - 1, dim - 1)] = 1.0
    return vector


def _centre_blocks(arrays: list[np.ndarray], frame: np.ndarray) -> list[InvariantBlock]:
    """Split span(frame) into eigenspaces of a generic central element of its commutant."""
    local = [frame.conj().T @ h @ frame for h in arrays]
    csos = find_csos(local) if frame.shape[1] > 1 else []
    if not csos:
        return [InvariantBlock(basis=_block_basis(frame))]
    centre = find_csos(local + [op.matrix for op in csos])
    weights = np.random.default_rng(_CENTRE_SEED).uniform(0.5, 1.5, len(centre))
    generic = np.zeros((frame.shape[1], frame.shape[1]), dtype=complex)
    for weight, op in zip(weights, centre, strict=True):
        generic += weight * op.matrix
    values, vectors = eigh(generic)
    return [
        InvariantBlock(
            basis=_block_basis(frame @ vectors[:, group]), label=float(np.mean(values[group]))
        )
        for group in _group_eigenvalues(values)
    ]


def decompose(
    hams: Sequence[HamiltonianLike], anchor: np.ndarray | None = None
) -> Decomposition:
    """
    Split the space into the accessible block and the blocks of its complement.

    The accessible block (index 0) is the smallest invariant subspace holding
    `anchor` (default: level 2, the spin the control couples to). The
    complement is split into eigenspaces of a generic element of the centre
    of its commutant, so isotypic components stay whole.
    """
    arrays = as_arrays(hams)
    dim = arrays[0].shape[0]
    _check_budget(dim)
    accessible = invariant_closure(arrays, default_anchor(dim, anchor))
    blocks = [InvariantBlock(basis=_block_basis(accessible))]
    if accessible.shape[1] < dim:
        complement = null_space(accessible.conj().T, rcond=NULL_SPACE_RCOND)
        blocks.extend(_centre_blocks(arrays, complement))
    csos = find_csos(arrays)
    LOGGER.debug("Decomposed dimension %d into blocks %s", dim, [b.dim for b in blocks])
    return Decomposition(blocks=tuple(blocks), accessible_index=0, provenance=tuple(csos))


def restrict_to_block(
    hams: Sequence[HamiltonianLike], decomposition: Decomposition, index: int
) -> list[np.ndarray]:
    """Return B^dagger H B for every H, with B the block's orthonormal basis."""
    basis = decomposition.blocks[index].basis
    return [basis.conj().T @ h @ basis for h in as_arrays(hams)]


def block_asos(
    hams: Sequence[HamiltonianLike], decomposition: Decomposition
) -> dict[int, list[SymmetryOperator]]:
    """Run the ASO search inside every block; matrices are in block coordinates."""
    found: dict[int, list[SymmetryOperator]] = {}
    for index in range(len(decomposition.blocks)):
        restricted = restrict_to_block(hams, decomposition, index)
        asos = find_asos(restricted)
        for op in asos:
            op.block = index
        found[index] = asos
    return found


def embed(op: SymmetryOperator, decomposition: Decomposition) -> np.ndarray:
    """Lift a block-coordinate operator back to the full space."""
    if op.block is None:
        return op.matrix
    basis = decomposition.blocks[op.block].basis
    return basis @ op.matrix @ basis.conj().T


def _extend(
    basis: np.ndarray, candidates: np.ndarray, rtol: float, scale: float = 1.0
) -> np.ndarray:
    """
    Return orthonormal directions of `candidates` outside span(basis).

    Candidates shorter than rtol * scale are numerically zero and are
    dropped before normalization.
    """
    if candidates.size == 0:
        return candidates.reshape(basis.shape[0], 0)
    norms = np.linalg.norm(candidates, axis=0)
    keep = norms > rtol * scale
    candidates = candidates[:, keep] / norms[keep]
    if basis.shape[1]:
        candidates = candidates - basis @ (basis.conj().T @ candidates)
        candidates = candidates - basis @ (basis.conj().T @ candidates)
    fresh = candidates[:, np.linalg.norm(candidates, axis=0) > rtol]
    if fresh.shape[1] == 0:
        return fresh
    return orth(fresh, rcond=rtol)


def invariant_closure(
    hams: Sequence[HamiltonianLike], seeds: np.ndarray, rtol: float = 1e-10
) -> np.ndarray:
    """Return an orthonormal basis of the smallest subspace holding seeds and closed under hams."""
    arrays = as_arrays(hams)
    seeds = np.asarray(seeds, dtype=complex).reshape(arrays[0].shape[0], -1)
    scale = max(1.0, *(float(np.linalg.norm(h, 2)) for h in arrays))
    basis = _extend(np.zeros((seeds.shape[0], 0), dtype=complex), seeds, rtol)
    frontier = basis
    while frontier.shape[1]:
        images = np.hstack([h @ frontier for h in arrays])
        frontier = _extend(basis, images, rtol, scale)
        basis = np.hstack([basis, frontier])
    return basis


def lie_closure_dimension(
    generators: Sequence[HamiltonianLike], max_dim: int | None = None
) -> int:
    """
    Return the real dimension of the Lie algebra generated by {i H_m}.

    Commutators of the current basis with the newest directions are added
    until no new direction survives the rank test. Raises
    LieClosureCapExceededError once the dimension passes max_dim.
    """
    arrays = [1j * h for h in as_arrays(generators)]
    dim = arrays[0].shape[0]
    cap = dim * dim if max_dim is None else min(max_dim, dim * dim)
    vectors = np.array([_to_real(a) for a in arrays]).T
    scale = max(1.0, float(np.max(np.linalg.norm(vectors, axis=0))))
    basis = _extend(np.zeros((2 * dim * dim, 0)), vectors, LIE_RANK_RTOL, scale)
    frontier = basis
    while frontier.shape[1]:
        if basis.shape[1] > cap:
            msg = f"Lie closure exceeded {cap} dimensions"
            raise LieClosureCapExceededError(msg, lower_bound=basis.shape[1])
        left = [_from_real(v, dim) for v in basis.T]
        right = [_from_real(v, dim) for v in frontier.T]
        brackets = np.array([_to_real(a @ b - b @ a) for a in left for b in right]).T
        frontier = _extend(basis, brackets, LIE_RANK_RTOL)
        basis = np.hstack([basis, frontier])
        LOGGER.debug("Lie closure at dimension %d", basis.shape[1])
    if basis.shape[1] > cap:
        msg = f"Lie closure exceeded {cap} dimensions"
        raise LieClosureCapExceededError(msg, lower_bound=basis.shape[1])
    return int(basis.shape[1])


def network_decomposition(net: SpinNetwork, k: int = 1) -> tuple[list[OperatorMatrix], Decomposition]:
    """Return (A, C) in sector k and their block decomposition anchored at spin 2."""
    drift = restrict(net, "drift", k)
    control = restrict(net, "control", k)
    anchor = None
    if k == 1:
        anchor = np.zeros(net.n, dtype=complex)
        anchor[CONTROL_VERTEX - 1] = 1.0
    return [drift, control], decompose([drift, control], anchor=anchor)


def odd_power_moments(net: SpinNetwork, kmax: int = 5) -> np.ndarray:
    """Return <2|A^(2k+1)|2> for k = 0..kmax."""
    adjacency = restrict(net, "drift", 1).entries.real
    index = CONTROL_VERTEX - 1
    moments = []
    power = adjacency.copy()
    square = adjacency @ adjacency
    for _ in range(kmax + 1):
        moments.append(power[index, index])
        power = power @ square
    return np.array(moments)
