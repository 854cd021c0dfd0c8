"""Spin network documents, bipartitions and automorphisms."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import GraphMatcher

from .config import HAMILTONIAN_SCHEMA, NETWORK_SCHEMA, validate
from .const import (
    CONTROL_VERTEX,
    FIXTURE_NAMES,
    LOGGER,
    MAX_AUTOMORPHISM_SPINS,
    PENDANT_VERTEX,
    WEIGHT_ATOL,
)
from .data import Bipartition, Edge, ExcitationBasis, OperatorMatrix, SpinNetwork
from .errors import (
    BudgetExceededError,
    ComponentNotConnectedError,
    SpinNetworkValidationError,
)

if TYPE_CHECKING:
    from collections.abc import Iterable

type Document = SpinNetwork | list[OperatorMatrix]


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exception:
        msg = f"not a JSON document: {exception.msg} at line {exception.lineno}"
        raise SpinNetworkValidationError(msg, field="<document>") from exception


def network_from_dict(document: dict[str, Any]) -> SpinNetwork:
    """Validate a decoded network document."""
    data = validate(NETWORK_SCHEMA, document)
    return SpinNetwork(
        n=data["n"],
        drift_edges=tuple(Edge(*e) for e in data["drift_edges"]),
        control_edges=tuple(Edge(*e) for e in data["control_edges"]),
        name=data.get("name"),
    )


def parse_network(text: str) -> SpinNetwork:
    """
    Parse a network JSON document.

    Schema: {"n": int, "drift_edges": [[i, j, w], ...], "control_edges": [...]}
    with 1-based spin labels. Raises SpinNetworkValidationError naming the
    offending field.
    """
    return network_from_dict(_load_json(text))


def _weight(w: float) -> int | float:
    return int(w) if float(w).is_integer() else w


def serialize_network(net: SpinNetwork) -> str:
    """Return the JSON document for a network; inverse of parse_network."""
    document: dict[str, Any] = {
        "n": net.n,
        "drift_edges": [[e.i, e.j, _weight(e.weight)] for e in net.drift_edges],
        "control_edges": [[e.i, e.j, _weight(e.weight)] for e in net.control_edges],
    }
    if net.name:
        document["name"] = net.name
    return json.dumps(document, indent=2) + "\n"


def parse_hamiltonians(text: str) -> list[OperatorMatrix]:
    """Parse a raw-matrix document into Hermitian operators on levels 1..N."""
    data = validate(HAMILTONIAN_SCHEMA, _load_json(text))
    matrices: list[OperatorMatrix] = []
    names = data["names"]
    for index, rows in enumerate(data["matrices"]):
        dim = len(rows)
        if any(len(row) != dim for row in rows):
            msg = f"matrices[{index}] is not square"
            raise SpinNetworkValidationError(msg, field=f"matrices[{index}]")
        entries = np.array(
            [[complex(*v) if isinstance(v, list | tuple) else v for v in row] for row in rows],
            dtype=complex,
        )
        basis = ExcitationBasis(n=dim, k=1, states=tuple((s,) for s in range(1, dim + 1)))
        name = names[index] if index < len(names) else f"H{index}"
        matrices.append(OperatorMatrix(basis=basis, entries=entries, name=name))
    if len({m.dim for m in matrices}) != 1:
        msg = "all matrices must share one dimension"
        raise SpinNetworkValidationError(msg, field="matrices")
    return matrices


def parse_document(text: str) -> Document:
    """Parse either a network document or a raw-matrix document."""
    document = _load_json(text)
    if isinstance(document, dict) and document.get("kind") == "hamiltonians":
        return parse_hamiltonians(text)
    if not isinstance(document, dict):
        msg = "expected a JSON object"
        raise SpinNetworkValidationError(msg, field="<document>")
    return network_from_dict(document)


def fixture_text(name: str) -> str:
    """Return the bundled fixture document for a name such as 'fig2'."""
    stem = name.removesuffix(".json")
    if stem not in FIXTURE_NAMES:
        msg = f"unknown fixture {name!r}"
        raise SpinNetworkValidationError(msg, field="--net", reason="missing_file")
    return resources.files(__package__).joinpath("fixtures", f"{stem}.json").read_text(
        encoding="utf-8"
    )


def load_fixture(name: str) -> Document:
    """Load a bundled fixture by name."""
    return parse_document(fixture_text(name))


def read_document(ref: str | Path) -> Document:
    """Load a document from a path, falling back to bundled fixture names."""
    path = Path(ref)
    if path.is_file():
        LOGGER.debug("Reading network document %s", path)
        return parse_document(path.read_text(encoding="utf-8"))
    if path.name.removesuffix(".json") in FIXTURE_NAMES:
        LOGGER.debug("Using bundled fixture %s", path.name)
        return load_fixture(path.name)
    msg = f"no such file or fixture: {ref}"
    raise SpinNetworkValidationError(msg, field="--net", reason="missing_file")


def read_network(ref: str | Path) -> SpinNetwork:
    """Load a document and require a graph network."""
    document = read_document(ref)
    if not isinstance(document, SpinNetwork):
        msg = f"{ref} holds raw matrices, a spin network is required here"
        raise SpinNetworkValidationError(msg, field="--net")
    return document


def is_pendant(net: SpinNetwork) -> bool:
    """
    Return True for pendant-control form.

    Spin 1 carries no drift edge and the only control edge is (1, 2, 1.0).
    """
    if net.n < 2:  # noqa: PLR2004
        return False
    controls = [(e.i, e.j, e.weight) for e in net.control_edges]
    if controls != [(PENDANT_VERTEX, CONTROL_VERTEX, 1.0)]:
        return False
    return all(PENDANT_VERTEX not in (e.i, e.j) for e in net.drift_edges)


def require_pendant(net: SpinNetwork) -> None:
    """Raise unless the network is in pendant-control form."""
    if not is_pendant(net):
        msg = "network is not in pendant-control form (control edge (1, 2, 1.0), spin 1 free)"
        raise SpinNetworkValidationError(msg, field="control_edges", reason="not_pendant")


def coupling_graph(net: SpinNetwork, *, include_control: bool = False) -> nx.Graph:
    """Return the weighted drift graph over all n spins."""
    graph = nx.Graph()
    graph.add_nodes_from(net.vertices)
    edges: Iterable[Edge] = net.drift_edges
    if include_control:
        edges = (*net.drift_edges, *net.control_edges)
    graph.add_weighted_edges_from(edges)
    return graph


def _orient(colouring: dict[int, int], component: set[int], *, pendant: bool) -> int:
    """Pick the vertex whose colour becomes part A."""
    if PENDANT_VERTEX in component:
        return colouring[PENDANT_VERTEX]
    if pendant and CONTROL_VERTEX in component:
        # spin 1 sits opposite spin 2 once the control edge is drawn
        return 1 - colouring[CONTROL_VERTEX]
    return colouring[min(component)]


def bipartition(
    net: SpinNetwork,
    component: Iterable[int],
    *,
    include_control: bool = False,
) -> Bipartition | None:
    """
    Two-colour a connected vertex set, or return None for an odd cycle.

    Spin 1 always lands in part A. For a pendant network a component holding
    spin 2 but not spin 1 is oriented as if the control edge were present, so
    spin 2 sits in part B. Any other component puts its lowest label in part A.
    """
    vertices = set(component)
    if not vertices or not vertices <= set(net.vertices):
        msg = f"component {sorted(vertices)} is empty or out of range"
        raise ComponentNotConnectedError(msg)
    graph = coupling_graph(net, include_control=include_control).subgraph(vertices)
    if not nx.is_connected(graph):
        msg = f"component {sorted(vertices)} is not connected"
        raise ComponentNotConnectedError(msg)
    if not nx.is_bipartite(graph):
        return None
    colouring = nx.bipartite.color(graph)
    colour_a = _orient(colouring, vertices, pendant=is_pendant(net))
    part_a = frozenset(v for v, c in colouring.items() if c == colour_a)
    return Bipartition(part_a=part_a, part_b=frozenset(vertices - part_a))


def automorphisms(net: SpinNetwork, fixed: Iterable[int] = ()) -> list[tuple[int, ...]]:
    """
    Return every weight-preserving drift automorphism fixing `fixed` pointwise.

    A permutation is a tuple p with p[v - 1] the image of spin v. The identity
    is excluded.
    """
    if net.n > MAX_AUTOMORPHISM_SPINS:
        msg = f"automorphism search limited to {MAX_AUTOMORPHISM_SPINS} spins, got {net.n}"
        raise BudgetExceededError(msg)
    pinned = set(fixed)
    graph = coupling_graph(net)
    for v in graph.nodes:
        graph.nodes[v]["label"] = v if v in pinned else 0

    def _same_weight(a: dict[str, Any], b: dict[str, Any]) -> bool:
        return math.isclose(a["weight"], b["weight"], rel_tol=0.0, abs_tol=WEIGHT_ATOL)

    matcher = GraphMatcher(
        graph,
        graph,
        node_match=lambda a, b: a["label"] == b["label"],
        edge_match=_same_weight,
    )
    identity = tuple(net.vertices)
    found = {
        perm
        for mapping in matcher.isomorphisms_iter()
        if (perm := tuple(mapping[v] for v in net.vertices)) != identity
    }
    LOGGER.debug("Found %d automorphisms fixing %s", len(found), sorted(pinned))
    return sorted(found)


def permutation_cycles(perm: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Return the non-trivial cycles of a permutation, e.g. [(6, 7)]."""
    seen: set[int] = set()
    cycles: list[tuple[int, ...]] = []
    for start in range(1, len(perm) + 1):
        if start in seen or perm[start - 1] == start:
            continue
        cycle, v = [], start
        while v not in seen:
            seen.add(v)
            cycle.append(v)
            v = perm[v - 1]
        cycles.append(tuple(cycle))
    return cycles
