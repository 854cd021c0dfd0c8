"""Report documents written by the command line."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cache
from importlib import resources
from typing import TYPE_CHECKING, Any

import networkx as nx
import numpy as np

from .const import LOGGER, REPORT_SCHEMA
from .data import Report, SpinNetwork
from .network import coupling_graph, is_pendant

if TYPE_CHECKING:
    from collections.abc import Callable

    from .data import (
        Basis,
        DarkClassification,
        FidelityBound,
        IdentificationResult,
        OperatorMatrix,
        PulseSchedule,
        SimulationResult,
        SymmetryOperator,
    )
    from .network import Document

SIGNIFICANT_DIGITS = 12


@dataclass(frozen=True, kw_only=True)
class DigestDescription:
    """Describes one field of the network digest."""

    key: str
    value_fn: Callable[[SpinNetwork], Any]


@dataclass(frozen=True, kw_only=True)
class MatrixDigestDescription:
    """Describes one field of the digest of a raw-matrix document."""

    key: str
    value_fn: Callable[[list[OperatorMatrix]], Any]


def _drift_bipartite(net: SpinNetwork) -> bool:
    graph = coupling_graph(net)
    graph.remove_nodes_from([v for v in list(graph.nodes) if graph.degree(v) == 0])
    return bool(nx.is_bipartite(graph))


DIGEST_DESCRIPTIONS: tuple[DigestDescription, ...] = (
    DigestDescription(key="name", value_fn=lambda net: net.name),
    DigestDescription(key="n", value_fn=lambda net: net.n),
    DigestDescription(key="drift_edges", value_fn=lambda net: len(net.drift_edges)),
    DigestDescription(key="control_edges", value_fn=lambda net: len(net.control_edges)),
    DigestDescription(key="bipartite", value_fn=_drift_bipartite),
    DigestDescription(key="pendant", value_fn=is_pendant),
)

MATRIX_DIGEST_DESCRIPTIONS: tuple[MatrixDigestDescription, ...] = (
    MatrixDigestDescription(key="matrices", value_fn=len),
    MatrixDigestDescription(key="dim", value_fn=lambda hams: hams[0].dim),
    MatrixDigestDescription(
        key="real_symmetric", value_fn=lambda hams: all(h.is_real_symmetric for h in hams)
    ),
    MatrixDigestDescription(key="names", value_fn=lambda hams: [h.name for h in hams]),
)


@cache
def manifest() -> dict[str, Any]:
    """Return the package manifest."""
    text = resources.files(__package__).joinpath("manifest.json").read_text(encoding="utf-8")
    return json.loads(text)


def network_digest(document: Document | None) -> dict[str, Any]:
    """Summarize a network or raw-matrix document."""
    if document is None:
        return {}
    if isinstance(document, SpinNetwork):
        return {d.key: d.value_fn(document) for d in DIGEST_DESCRIPTIONS}
    return {d.key: d.value_fn(document) for d in MATRIX_DIGEST_DESCRIPTIONS}


def plain(value: Any) -> Any:
    """
    Convert results to JSON-ready values.

    Floats are rounded to twelve significant digits, NaN and infinities become
    null, complex numbers become [re, im] and arrays become lists.
    """
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, bool | np.bool_):
        return bool(value)
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, complex | np.complexfloating):
        return [plain(value.real), plain(value.imag)]
    if isinstance(value, float | np.floating):
        if not math.isfinite(value):
            return None
        return float(f"{float(value):.{SIGNIFICANT_DIGITS}g}") + 0.0
    return value


def build_report(command: str, document: Document | None, results: dict[str, Any]) -> Report:
    """Wrap command results with the network digest and schema tag."""
    info = manifest()
    return Report(
        command=command,
        network=network_digest(document),
        results=results,
        schema=info.get("report_schema", REPORT_SCHEMA),
        version=info["version"],
    )


def render(report: Report) -> str:
    """Serialize a report; equal inputs give byte-identical text."""
    document = {
        "schema": report.schema,
        "version": report.version,
        "command": report.command,
        "network": plain(report.network),
        "results": plain(report.results),
    }
    LOGGER.debug("Rendering %s report", report.command)
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def vector_map(basis: Basis, vector: np.ndarray, floor: float = 1e-12) -> dict[str, Any]:
    """Return the non-zero amplitudes of a vector keyed by basis label."""
    return {
        label: value
        for label, value in zip(basis.labels, np.asarray(vector, dtype=complex), strict=True)
        if abs(value) > floor
    }


def matrix_payload(matrix: np.ndarray) -> list[Any]:
    """Return a real matrix as rows of floats and a complex one as [re, im] pairs."""
    matrix = np.asarray(matrix)
    if np.max(np.abs(np.imag(matrix)), initial=0.0) < 1e-12:  # noqa: PLR2004
        return np.real(matrix).tolist()
    return matrix.tolist()


def symmetry_payload(op: SymmetryOperator, hams: list[np.ndarray]) -> dict[str, Any]:
    """Describe a symmetry operator and its defect."""
    return {
        "kind": str(op.kind),
        "block": op.block,
        "residual": op.residual(hams),
        "matrix": matrix_payload(op.matrix),
    }


def classification_payload(classification: DarkClassification | None) -> dict[str, Any] | None:
    """Describe how the dark part of a target can be reached, if it can."""
    if classification is None:
        return None
    return {
        "kind": str(classification.kind),
        "blocker": list(classification.blocker) if classification.blocker else None,
        "accessible_weight": classification.accessible_weight,
        "symmetric_weight": classification.symmetric_weight,
    }


def bound_payload(
    bound: FidelityBound, basis: Basis, classification: DarkClassification | None = None
) -> dict[str, Any]:
    """Describe a fidelity bound and the dark states that limit it."""
    return {
        "fidelity": bound.value,
        "phase_attainable": bound.phase_attainable,
        "global_phase": bound.global_phase,
        "dark": [
            {"eigvec": vector_map(basis, c.vector), "weight": c.weight, "block": c.block}
            for c in bound.dark_components
        ],
        "classification": classification_payload(classification),
        "eigen_weights": np.abs(bound.target_decomposition) ** 2,
    }


def schedule_payload(schedule: PulseSchedule) -> dict[str, Any]:
    """Describe a pulse schedule."""
    return schedule.to_dict()


def simulation_payload(result: SimulationResult) -> dict[str, Any]:
    """Describe a simulation outcome without the trajectory itself."""
    return {
        "fidelity": result.fidelity,
        "final_time": float(result.times[-1]) if result.times.size else 0.0,
        "samples": int(result.times.size),
        "sector_phase_optimized": result.sector_phase_optimized,
        "relative_phase": result.relative_phase,
        "final_populations": dict(
            zip(result.labels, np.abs(result.final_state) ** 2, strict=True)
        ),
    }


def identification_payload(result: IdentificationResult) -> dict[str, Any]:
    """Describe recovered levels."""
    return {
        "epsilon": result.epsilon,
        "resolution": result.resolution,
        "zero_level": result.zero_level,
        "aso_symmetric": result.aso_symmetric,
        "collisions": list(result.collisions),
        "levels": [
            {
                "lambda": e.lambda_hat,
                "alpha": e.alpha_hat,
                "overlap": e.overlap,
                "sign_resolved": e.sign_resolved,
            }
            for e in result.estimates
        ],
    }
