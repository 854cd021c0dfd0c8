"""Drift and control Hamiltonians restricted to excitation sectors."""

from __future__ import annotations

import json
from functools import reduce
from itertools import combinations
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
import pandas as pd
from scipy.linalg import block_diag

from .config import TARGET_MAP_SCHEMA, validate
from .const import HERMITIAN_ATOL, LOGGER, MAX_ORACLE_SPINS, NORM_ATOL
from .data import ExcitationBasis, OperatorMatrix, SectorBasis, SpinNetwork
from .errors import BudgetExceededError, SpinNetworkValidationError, TargetError

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path

    from .data import Basis

type Which = Literal["drift", "control"]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def excitation_basis(n: int, k: int) -> ExcitationBasis:
    """Return the lexicographic basis of the k-excitation sector of n spins."""
    if not 0 <= k <= n:
        msg = f"excitation count {k} outside 0..{n}"
        raise SpinNetworkValidationError(msg, field="k", reason="bad_sector")
    return ExcitationBasis(n=n, k=k, states=tuple(combinations(range(1, n + 1), k)))


def _edges(net: SpinNetwork, which: Which) -> dict[frozenset[int], float]:
    if which not in ("drift", "control"):
        msg = f"unknown coupling set {which!r}"
        raise SpinNetworkValidationError(msg, field="which")
    edges = net.drift_edges if which == "drift" else net.control_edges
    return {e.pair: e.weight for e in edges}


def _hopping(basis: ExcitationBasis, weights: Mapping[frozenset[int], float]) -> np.ndarray:
    """Entry (S, T) is d_ij when S and T differ by one excitation moved across i-j."""
    matrix = np.zeros((basis.size, basis.size))
    position = {s: index for index, s in enumerate(basis.states)}
    for row, state in enumerate(basis.states):
        occupied = set(state)
        for pair, weight in weights.items():
            i, j = sorted(pair)
            if (i in occupied) == (j in occupied):
                continue
            moved = occupied ^ {i, j}
            matrix[row, position[tuple(sorted(moved))]] = weight
    return matrix


def restrict(net: SpinNetwork, which: Which, k: int) -> OperatorMatrix:
    """
    Restrict the drift or control XX Hamiltonian to the k-excitation sector.

    For k=1 this is the weighted adjacency matrix A (or C).
    """
    basis = excitation_basis(net.n, k)
    matrix = _hopping(basis, _edges(net, which))
    return OperatorMatrix(basis=basis, entries=matrix, name=f"{which}[k={k}]")


def second_excitation(net: SpinNetwork, which: Which = "drift") -> OperatorMatrix:
    """Return the two-excitation matrix, Lambda^2 of A or C."""
    return restrict(net, which, 2)


def sector_basis(n: int, ks: list[int] | tuple[int, ...]) -> SectorBasis:
    """Concatenate excitation sectors in the given order."""
    if len(set(ks)) != len(ks) or not ks:
        msg = f"excitation counts must be distinct and non-empty, got {list(ks)}"
        raise SpinNetworkValidationError(msg, field="ks", reason="bad_sector")
    return SectorBasis(sectors=tuple(excitation_basis(n, k) for k in ks))


def direct_sum_sector(
    net: SpinNetwork, ks: list[int] | tuple[int, ...]
) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Return block-diagonal (drift, control) over the concatenated sectors."""
    basis = sector_basis(net.n, ks)
    pair = []
    for which in ("drift", "control"):
        blocks = [restrict(net, which, k).entries for k in ks]
        pair.append(
            OperatorMatrix(basis=basis, entries=block_diag(*blocks), name=f"{which}{list(ks)}")
        )
    LOGGER.debug("Assembled sectors %s of total size %d", list(ks), basis.size)
    return pair[0], pair[1]


def _site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    factors = [op if s == site else np.eye(2) for s in range(1, n + 1)]
    return reduce(np.kron, factors)


def full_hamiltonian(net: SpinNetwork, which: Which) -> np.ndarray:
    """
    Return 1/2 sum d_ij (X_i X_j + Y_i Y_j) on the full 2^n space.

    Spin 1 is the most significant tensor factor and |1> is the excited level.
    """
    if net.n > MAX_ORACLE_SPINS:
        msg = f"full-space Hamiltonian limited to {MAX_ORACLE_SPINS} spins"
        raise BudgetExceededError(msg)
    dim = 2**net.n
    total = np.zeros((dim, dim), dtype=complex)
    for pair, weight in _edges(net, which).items():
        i, j = sorted(pair)
        for pauli in (PAULI_X, PAULI_Y):
            total += 0.5 * weight * (
                _site_operator(pauli, i, net.n) @ _site_operator(pauli, j, net.n)
            )
    return total


def full_space_index(state: tuple[int, ...], n: int) -> int:
    """Return the computational-basis index of an excitation tuple."""
    return sum(1 << (n - s) for s in state)


def project_sector(full: np.ndarray, basis: Basis) -> np.ndarray:
    """Project a full-space operator onto the states of a basis."""
    index = [full_space_index(s, basis.n) for s in basis.states]
    return full[np.ix_(index, index)]


def basis_vector(basis: Basis, state: tuple[int, ...] | str) -> np.ndarray:
    """Return the unit vector of one basis state (tuple or label)."""
    if isinstance(state, str):
        state = label_to_state(state)
    vector = np.zeros(basis.size, dtype=complex)
    try:
        vector[basis.index(state)] = 1.0
    except ValueError as exception:
        msg = f"state {state} is not in this basis"
        raise TargetError(msg) from exception
    return vector


def label_to_state(label: str) -> tuple[int, ...]:
    """Turn '1,3' into (1, 3) and '0' into the vacuum."""
    label = label.strip()
    if label == "0":
        return ()
    try:
        return tuple(sorted(int(part) for part in label.split(",")))
    except ValueError as exception:
        msg = f"bad basis label {label!r}"
        raise SpinNetworkValidationError(msg, field="--target") from exception


def state_vector(basis: Basis, amplitudes: Mapping[str, complex]) -> np.ndarray:
    """Build a vector from a label -> amplitude map."""
    vector = np.zeros(basis.size, dtype=complex)
    for label, value in amplitudes.items():
        state = label_to_state(label)
        if state not in basis.states:
            msg = f"target label {label!r} is not a state of this sector"
            raise SpinNetworkValidationError(msg, field="--target", reason="invalid_target")
        vector[basis.index(state)] += value
    return vector


def parse_target(text: str, basis: Basis) -> np.ndarray:
    """
    Parse a target given as a basis label or an inline amplitude map.

    Labels look like "3" or "1,4"; maps look like {"3": [0.707, 0], "4": [0, 0.707]}.
    The result is normalized only when it already is, within tolerance.
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exception:
            msg = f"target map is not JSON: {exception.msg}"
            raise SpinNetworkValidationError(msg, field="--target") from exception
        data = validate(TARGET_MAP_SCHEMA, raw)
        amplitudes = {
            label: complex(*value) if isinstance(value, list | tuple) else complex(value)
            for label, value in data.items()
        }
        return state_vector(basis, amplitudes)
    return state_vector(basis, {text: 1.0})


def normalize(vector: np.ndarray, *, field: str = "--target") -> np.ndarray:
    """Rescale a non-zero vector to unit norm."""
    norm = float(np.linalg.norm(vector))
    if norm < NORM_ATOL:
        msg = "state vector is zero"
        raise SpinNetworkValidationError(msg, field=field, reason="invalid_target")
    return vector / norm


def to_json(op: OperatorMatrix) -> dict[str, Any]:
    """Return nested [re, im] pairs plus the basis labels."""
    return {
        "name": op.name,
        "labels": op.basis.labels,
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in op.entries],
    }


def to_csv(op: OperatorMatrix, path: str | Path) -> None:
    """Write a real matrix as (row, col, value) triplets of its non-zero entries."""
    if not op.is_real_symmetric:
        msg = f"{op.name or 'matrix'} has complex entries and cannot be written as CSV"
        raise SpinNetworkValidationError(msg, field="entries", reason="complex_csv")
    rows, cols = np.nonzero(np.abs(op.entries) > HERMITIAN_ATOL)
    labels = op.basis.labels
    frame = pd.DataFrame(
        {
            "row": [labels[r] for r in rows],
            "col": [labels[c] for c in cols],
            "value": op.entries.real[rows, cols],
        }
    )
    frame.to_csv(path, index=False)
