"""Custom types for spin_control."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np

from .const import DARK_THRESHOLD, HERMITIAN_ATOL
from .errors import SpinNetworkValidationError

if TYPE_CHECKING:
    from collections.abc import Iterable


class Edge(NamedTuple):
    """A weighted coupling between two spins (1-based labels)."""

    i: int
    j: int
    weight: float

    @property
    def pair(self) -> frozenset[int]:
        """Return the unordered vertex pair."""
        return frozenset((self.i, self.j))


def _normalize_edges(edges: Iterable[Any], field_name: str, n: int) -> tuple[Edge, ...]:
    """
    Validate an edge list and return it with i < j inside every edge.

    Raises SpinNetworkValidationError naming the offending entry.
    """
    normalized: list[Edge] = []
    seen: set[frozenset[int]] = set()
    for index, raw in enumerate(edges):
        where = f"{field_name}[{index}]"
        i, j, weight = raw
        if not (1 <= i <= n and 1 <= j <= n):
            msg = f"{where}: spin index out of range 1..{n}"
            raise SpinNetworkValidationError(msg, field=where, reason="index_range")
        if i == j:
            msg = f"{where}: self-loop on spin {i}"
            raise SpinNetworkValidationError(msg, field=where, reason="self_loop")
        if not math.isfinite(weight):
            msg = f"{where}: weight must be finite"
            raise SpinNetworkValidationError(msg, field=where, reason="bad_weight")
        pair = frozenset((i, j))
        if pair in seen:
            msg = f"{where}: duplicate edge {min(i, j)}-{max(i, j)}"
            raise SpinNetworkValidationError(msg, field=where, reason="duplicate_edge")
        seen.add(pair)
        normalized.append(Edge(min(i, j), max(i, j), float(weight)))
    return tuple(normalized)


@dataclass(frozen=True)
class SpinNetwork:
    """An XX-coupled spin network with drift and control couplings."""

    n: int
    drift_edges: tuple[Edge, ...] = ()
    control_edges: tuple[Edge, ...] = ()
    name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        """Check the graph invariants and normalize edge order."""
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            msg = f"n must be a positive integer, got {self.n!r}"
            raise SpinNetworkValidationError(msg, field="n", reason="bad_n")
        drift = _normalize_edges(self.drift_edges, "drift_edges", self.n)
        control = _normalize_edges(self.control_edges, "control_edges", self.n)
        shared = {e.pair for e in drift} & {e.pair for e in control}
        if shared:
            pair = sorted(next(iter(shared)))
            msg = f"edge {pair[0]}-{pair[1]} appears in both drift and control lists"
            raise SpinNetworkValidationError(
                msg, field="control_edges", reason="shared_edge"
            )
        object.__setattr__(self, "drift_edges", drift)
        object.__setattr__(self, "control_edges", control)

    @property
    def vertices(self) -> range:
        """Return the 1-based spin labels."""
        return range(1, self.n + 1)

    def weighted_degree(self, vertex: int) -> float:
        """Return the summed drift weight at a vertex."""
        return sum(e.weight for e in self.drift_edges if vertex in (e.i, e.j))


@dataclass(frozen=True)
class Bipartition:
    """A 2-colouring of a connected vertex set."""

    part_a: frozenset[int]
    part_b: frozenset[int]

    def side(self, vertex: int) -> int:
        """Return +1 for part A, -1 for part B and 0 outside the component."""
        if vertex in self.part_a:
            return 1
        if vertex in self.part_b:
            return -1
        return 0


def state_label(state: tuple[int, ...]) -> str:
    """Return the CSV/CLI label of a basis state, '0' for the vacuum."""
    return ",".join(str(s) for s in state) if state else "0"


@dataclass(frozen=True)
class ExcitationBasis:
    """Lexicographic basis of one excitation sector."""

    n: int
    k: int
    states: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        """Return the sector dimension."""
        return len(self.states)

    @property
    def ks(self) -> tuple[int, ...]:
        """Return the excitation counts covered by this basis."""
        return (self.k,)

    @property
    def labels(self) -> list[str]:
        """Return printable labels for the states."""
        return [state_label(s) for s in self.states]

    def index(self, state: Iterable[int]) -> int:
        """Return the position of a state given as excitation positions."""
        return self.states.index(tuple(sorted(state)))


@dataclass(frozen=True)
class SectorBasis:
    """Concatenation of several excitation sectors, in the given order."""

    sectors: tuple[ExcitationBasis, ...]

    @property
    def n(self) -> int:
        """Return the number of spins."""
        return self.sectors[0].n

    @property
    def states(self) -> tuple[tuple[int, ...], ...]:
        """Return all states, sector by sector."""
        return tuple(s for sector in self.sectors for s in sector.states)

    @property
    def size(self) -> int:
        """Return the total dimension."""
        return sum(sector.size for sector in self.sectors)

    @property
    def ks(self) -> tuple[int, ...]:
        """Return the excitation counts in block order."""
        return tuple(sector.k for sector in self.sectors)

    @property
    def labels(self) -> list[str]:
        """Return printable labels for the states."""
        return [state_label(s) for s in self.states]

    def offsets(self) -> list[slice]:
        """Return one slice per sector into the concatenated basis."""
        slices, start = [], 0
        for sector in self.sectors:
            slices.append(slice(start, start + sector.size))
            start += sector.size
        return slices

    def index(self, state: Iterable[int]) -> int:
        """Return the position of a state given as excitation positions."""
        return self.states.index(tuple(sorted(state)))


type Basis = ExcitationBasis | SectorBasis


@dataclass(eq=False)
class OperatorMatrix:
    """A dense Hermitian matrix tagged with its excitation basis."""

    basis: Basis
    entries: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        """Coerce to a complex square array and check Hermiticity."""
        self.entries = np.asarray(self.entries, dtype=complex)
        dim = self.basis.size
        if self.entries.shape != (dim, dim):
            msg = f"matrix shape {self.entries.shape} does not match basis size {dim}"
            raise SpinNetworkValidationError(msg, field="entries", reason="shape")
        if not np.allclose(self.entries, self.entries.conj().T, atol=HERMITIAN_ATOL):
            msg = f"matrix {self.name or '<unnamed>'} is not Hermitian"
            raise SpinNetworkValidationError(msg, field="entries", reason="not_hermitian")

    @property
    def dim(self) -> int:
        """Return the matrix dimension."""
        return self.entries.shape[0]

    @property
    def is_real_symmetric(self) -> bool:
        """Return True when the matrix is real with a zero imaginary part."""
        return bool(np.max(np.abs(self.entries.imag), initial=0.0) < HERMITIAN_ATOL)


class SymmetryKind(StrEnum):
    """Kinds of symmetry operator."""

    CSO = "CSO"
    ASO = "ASO"


@dataclass(eq=False)
class SymmetryOperator:
    """A commuting or anticommuting symmetry found by null-space search."""

    kind: SymmetryKind
    matrix: np.ndarray
    block: int | None = None

    def residual(self, hams: Iterable[np.ndarray]) -> float:
        """
        Return the largest defect against the given matrices.

        CSOs are measured by ||[H, J]||, ASOs by ||H~^T J + J H~|| with H~
        the traceless part of H.
        """
        worst = 0.0
        for h in hams:
            if self.kind is SymmetryKind.ASO:
                h_tilde = h - np.trace(h) / h.shape[0] * np.eye(h.shape[0])
                defect = h_tilde.T @ self.matrix + self.matrix @ h_tilde
            else:
                defect = h @ self.matrix - self.matrix @ h
            worst = max(worst, float(np.linalg.norm(defect)))
        return worst


@dataclass(eq=False)
class InvariantBlock:
    """One invariant subspace of a decomposition."""

    basis: np.ndarray
    label: float = 0.0

    @property
    def dim(self) -> int:
        """Return the block dimension."""
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        """Return the orthogonal projector onto the block."""
        return self.basis @ self.basis.conj().T


@dataclass(eq=False)
class Decomposition:
    """Simultaneous block structure of a set of Hamiltonians."""

    blocks: tuple[InvariantBlock, ...]
    accessible_index: int
    provenance: tuple[SymmetryOperator, ...] = ()

    @property
    def accessible(self) -> InvariantBlock:
        """Return the accessible block H_a."""
        return self.blocks[self.accessible_index]

    @property
    def dark_indices(self) -> list[int]:
        """Return the indices of every block other than H_a."""
        return [i for i in range(len(self.blocks)) if i != self.accessible_index]


@dataclass(eq=False)
class SpectralData:
    """Eigen-decomposition of the drift on the accessible block."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    overlaps: np.ndarray
    decomposition: Decomposition
    paired_with: dict[int, int] = field(default_factory=dict)
    bipartition: Bipartition | None = None
    aso: np.ndarray | None = None
    network: SpinNetwork | None = None

    @property
    def has_aso(self) -> bool:
        """Return True when the accessible block carries an ASO."""
        return self.aso is not None

    @property
    def bright(self) -> list[int]:
        """Return the eigenvector indices with a non-zero C-overlap."""
        return [i for i, a in enumerate(self.overlaps) if abs(a) >= DARK_THRESHOLD]


@dataclass(frozen=True)
class DarkComponent:
    """Target weight lost to one dark block."""

    block: int
    vector: np.ndarray = field(compare=False)
    weight: float = 0.0


@dataclass(eq=False)
class FidelityBound:
    """Maximum fidelity for transferring |1> to a target."""

    value: float
    dark_components: tuple[DarkComponent, ...]
    phase_attainable: bool
    target_decomposition: np.ndarray
    optimal_output: np.ndarray
    global_phase: float | None = None


class DarkKind(StrEnum):
    """Classification of a dark state."""

    TRULY_DARK = "truly_dark"
    CATALYTICALLY_ACCESSIBLE = "catalytically_accessible"


@dataclass(frozen=True)
class DarkClassification:
    """Result of classifying a dark vector."""

    kind: DarkKind
    blocker: tuple[int, ...] | None = None
    accessible_weight: float = 0.0
    symmetric_weight: float = 1.0


class PulseKind(StrEnum):
    """Kinds of schedule segment."""

    RABI = "rabi"
    RAMAN = "raman"
    FREE = "free"
    INJECT = "inject_catalyst"
    EXTRACT = "extract_catalyst"


MARKERS = (PulseKind.INJECT, PulseKind.EXTRACT)


@dataclass(frozen=True)
class PulseSegment:
    """One piece of a schedule: f(t) = amplitude * sum_j 2 cos(w_j t + phi_j)."""

    kind: PulseKind
    duration: float = 0.0
    carriers: tuple[float, ...] = ()
    amplitude: float = 0.0
    phases: tuple[float, ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        """Check that duration and tones agree with the kind."""
        if self.kind in MARKERS:
            if self.duration != 0.0 or self.amplitude != 0.0:
                msg = f"{self.kind} must have zero duration and amplitude"
                raise SpinNetworkValidationError(msg, field="segments", reason="marker")
            return
        if not self.duration > 0.0:
            msg = f"{self.kind} segment needs a positive duration"
            raise SpinNetworkValidationError(msg, field="segments", reason="duration")
        tones = {PulseKind.RABI: 1, PulseKind.RAMAN: 2, PulseKind.FREE: 0}[self.kind]
        if len(self.carriers) != tones or len(self.phases) != tones:
            msg = f"{self.kind} segment needs {tones} carrier(s) and phase(s)"
            raise SpinNetworkValidationError(msg, field="segments", reason="tones")

    def drive(self, t: float | np.ndarray) -> float | np.ndarray:
        """Return f(t) at absolute time t."""
        total = 0.0
        for omega, phase in zip(self.carriers, self.phases, strict=True):
            total = total + 2.0 * np.cos(omega * t + phase)
        return self.amplitude * total

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready view."""
        return {
            "kind": str(self.kind),
            "duration": self.duration,
            "carriers": list(self.carriers),
            "amplitude": self.amplitude,
            "phases": list(self.phases),
            "label": self.label,
        }


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered segments plus the excitation sectors they evolve in."""

    segments: tuple[PulseSegment, ...]
    sectors: tuple[int, ...] = (1,)
    rwa_cap: float | None = None
    predicted_fidelity: float | None = None

    def __post_init__(self) -> None:
        """Check marker placement and the amplitude cap."""
        for index, segment in enumerate(self.segments):
            if segment.kind in MARKERS:
                for neighbour in (index - 1, index + 1):
                    if 0 <= neighbour < len(self.segments):
                        other = self.segments[neighbour]
                        if other.kind not in (PulseKind.FREE, *MARKERS):
                            msg = f"segment {index}: {segment.kind} next to a driven segment"
                            raise SpinNetworkValidationError(
                                msg, field=f"segments[{index}]", reason="marker"
                            )
            elif self.rwa_cap is not None and segment.amplitude > self.rwa_cap * (1 + 1e-9):
                msg = f"segment {index}: amplitude {segment.amplitude:.3g} above cap"
                raise SpinNetworkValidationError(
                    msg, field=f"segments[{index}]", reason="rwa_cap"
                )

    @property
    def total_duration(self) -> float:
        """Return the summed duration."""
        return float(sum(s.duration for s in self.segments))

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready view."""
        return {
            "sectors": list(self.sectors),
            "rwa_cap": self.rwa_cap,
            "predicted_fidelity": self.predicted_fidelity,
            "total_duration": self.total_duration,
            "segments": [s.to_dict() for s in self.segments],
        }


@dataclass(eq=False)
class SimulationResult:
    """Outcome of propagating a schedule."""

    final_state: np.ndarray
    fidelity: float
    times: np.ndarray
    populations: np.ndarray
    labels: list[str]
    bound: FidelityBound | None = None
    sector_phase_optimized: bool = False
    relative_phase: float | None = None


@dataclass(eq=False)
class SurvivalRecord:
    """Sampled survival probability of |1> under H = A + eps C."""

    epsilon: float
    times: np.ndarray
    probabilities: np.ndarray
    duration: float
    dt: float
    shots: int | None = None


@dataclass(frozen=True)
class Estimate:
    """One identified level."""

    lambda_hat: float
    alpha_hat: float
    overlap: float
    sign_resolved: bool = False


@dataclass(frozen=True)
class IdentificationResult:
    """Levels recovered from a survival record."""

    estimates: tuple[Estimate, ...]
    resolution: float
    epsilon: float
    zero_level: bool = False
    aso_symmetric: bool | None = None
    collisions: tuple[float, ...] = ()


@dataclass(frozen=True)
class Report:
    """Versioned CLI output document."""

    command: str
    network: dict[str, Any]
    results: dict[str, Any]
    schema: str
    version: str
