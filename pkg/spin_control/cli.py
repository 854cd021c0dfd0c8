"""Command line front end: analyze, bound, simulate, catalyze, identify, fixtures."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from functools import cache
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from slugify import slugify

from .bounds import classify_dark, max_fidelity, spectral
from .config import load_config, setup_logging
from .const import (
    CONTROL_VERTEX,
    DARK_THRESHOLD,
    FIXTURE_NAMES,
    LOGGER,
    MAX_AUTOMORPHISM_SPINS,
    PENDANT_VERTEX,
)
from .data import SpinNetwork
from .errors import (
    BudgetExceededError,
    InfeasibleTaskError,
    SpinControlError,
    SpinNetworkValidationError,
    SynthesisError,
    TargetError,
)
from .network import (
    automorphisms,
    fixture_text,
    is_pendant,
    permutation_cycles,
    read_document,
    read_network,
)
from .operators import excitation_basis, normalize, parse_target
from .propagation import simulate
from .pulses import (
    export_trajectory,
    plan_catalysis,
    refine_schedule,
    sector_state,
    synthesize_transfer,
)
from .report import (
    bound_payload,
    build_report,
    identification_payload,
    manifest,
    matrix_payload,
    render,
    schedule_payload,
    simulation_payload,
    symmetry_payload,
)
from .symmetries import (
    as_arrays,
    block_asos,
    decompose,
    find_csos,
    lie_closure_dimension,
    network_decomposition,
    odd_power_moments,
    restrict_to_block,
)
from .sysid import estimate_spectrum, export_record, resolve_signs, survival_record

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .config import Settings
    from .data import DarkClassification, SpectralData
    from .network import Document

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


@cache
def _messages() -> dict[str, str]:
    text = resources.files(__package__).joinpath("translations", "en.json").read_text(
        encoding="utf-8"
    )
    return json.loads(text)["error"]


def describe_error(error: SpinControlError) -> str:
    """Render an error through the translation table."""
    messages = _messages()
    template = messages.get(error.reason, messages["unknown"])
    field = getattr(error, "field", None) or "-"
    return template.format(field=field, detail=str(error))


def _add_globals(parser: argparse.ArgumentParser) -> None:
    """Accept --config and --verbose after the subcommand too."""
    parser.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="YAML settings file")
    parser.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)


def _add_common(parser: argparse.ArgumentParser, *, target: bool = True) -> None:
    _add_globals(parser)
    parser.add_argument("--net", required=True, help="network JSON file or bundled fixture name")
    if target:
        parser.add_argument(
            "--target",
            required=True,
            help='basis label such as "3" or an amplitude map {"3": [0.707, 0], ...}',
        )
    parser.add_argument("--out", type=Path, default=None, help="report path (default stdout)")


def _add_schedule(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--quality", type=float, default=None)
    parser.add_argument("--dt", type=float, default=None, help="maximum integration step")
    parser.add_argument("--csv", type=Path, default=None, help="trajectory CSV path")
    parser.add_argument("--refine", action=argparse.BooleanOptionalAction, default=False)
    parser.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with every subcommand registered."""
    parser = argparse.ArgumentParser(
        prog="spin-control",
        description="Analysis and control of pendant-controlled XX spin networks.",
    )
    parser.add_argument("--config", type=Path, default=None, help="YAML settings file")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=manifest()["version"])
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="symmetries, blocks and Lie closure")
    _add_common(analyze, target=False)

    bound = sub.add_parser("bound", help="maximum transfer fidelity from spin 1")
    _add_common(bound)

    simulate_cmd = sub.add_parser("simulate", help="synthesize and simulate a transfer")
    _add_common(simulate_cmd)
    _add_schedule(simulate_cmd)
    simulate_cmd.add_argument("--allow-raman", action="store_true")

    catalyze = sub.add_parser("catalyze", help="plan and simulate a catalytic transfer")
    _add_common(catalyze)
    _add_schedule(catalyze)

    identify = sub.add_parser("identify", help="recover the spectrum from a survival record")
    _add_common(identify, target=False)
    identify.add_argument("--epsilon", type=float, default=None)
    identify.add_argument("--T", dest="duration", type=float, default=None)
    identify.add_argument("--dt", type=float, default=None)
    identify.add_argument("--shots", type=int, default=None)
    identify.add_argument("--seed", type=int, default=None)
    identify.add_argument("--offset", type=float, default=0.0, help="global energy shift")
    identify.add_argument("--csv", type=Path, default=None, help="record CSV path")
    identify.add_argument(
        "--resolve-signs", action=argparse.BooleanOptionalAction, default=True
    )

    fixtures = sub.add_parser("fixtures", help="write the bundled fixtures to a directory")
    _add_globals(fixtures)
    fixtures.add_argument("directory", type=Path)
    fixtures.add_argument("--out", type=Path, default=None)
    return parser


def _target(net: SpinNetwork, text: str) -> np.ndarray:
    return normalize(parse_target(text, excitation_basis(net.n, 1)))


def _csv_path(args: argparse.Namespace, net: SpinNetwork, suffix: str) -> Path:
    """Return --csv, or a slug of the network and command next to the report."""
    if args.csv is not None:
        return args.csv
    stem = net.name or Path(args.net).stem
    folder = args.out.parent if args.out is not None else Path()
    return folder / f"{slugify(f'{stem} {suffix}')}.csv"


def _analyze(document: Document) -> dict[str, Any]:
    results: dict[str, Any] = {}
    if isinstance(document, SpinNetwork):
        hams, decomposition = network_decomposition(document)
        arrays = as_arrays(hams)
    else:
        arrays = as_arrays(document)
        decomposition = decompose(arrays)
    accessible = decomposition.accessible_index
    csos = find_csos(arrays)
    asos = block_asos(arrays, decomposition)
    restricted = restrict_to_block(arrays, decomposition, accessible)
    results["csos"] = [symmetry_payload(op, arrays) for op in csos]
    results["asos"] = [symmetry_payload(op, restricted) for op in asos[accessible]]
    results["block_asos"] = [len(asos[index]) for index in sorted(asos)]
    results["blocks"] = [
        {"dim": block.dim, "basis": matrix_payload(block.basis)} for block in decomposition.blocks
    ]
    results["accessible_block"] = accessible
    results["accessible_dim"] = decomposition.accessible.dim
    results["lie_dim"] = lie_closure_dimension(restricted)

    if isinstance(document, SpinNetwork):
        net = document
        results["odd_moments"] = odd_power_moments(net)
        if net.n <= MAX_AUTOMORPHISM_SPINS:
            perms = automorphisms(net, fixed=(PENDANT_VERTEX, CONTROL_VERTEX))
            results["automorphisms"] = [
                [list(cycle) for cycle in permutation_cycles(p)] for p in perms
            ]
        if is_pendant(net):
            spec = spectral(net)
            parts = spec.bipartition
            results["spectrum"] = {
                "eigenvalues": spec.eigenvalues,
                "overlaps": spec.overlaps,
                "pairs": {str(k): v for k, v in sorted(spec.paired_with.items())},
                "bipartition": None
                if parts is None
                else {"a": sorted(parts.part_a), "b": sorted(parts.part_b)},
            }
    return results


def _dark_classification(
    net: SpinNetwork, target: np.ndarray, spec: SpectralData
) -> DarkClassification | None:
    """Classify the part of the target outside the accessible block."""
    decomposition = spec.decomposition
    dark = np.zeros(net.n, dtype=complex)
    for index in decomposition.dark_indices:
        dark += decomposition.blocks[index].projector @ target
    if np.linalg.norm(dark) < DARK_THRESHOLD:
        return None
    try:
        return classify_dark(net, dark, spec)
    except BudgetExceededError as exception:
        LOGGER.warning("Dark part left unclassified: %s", exception)
        return None


def _bound(args: argparse.Namespace, net: SpinNetwork) -> dict[str, Any]:
    target = _target(net, args.target)
    spec = spectral(net)
    bound = max_fidelity(net, target, spec)
    classification = _dark_classification(net, target, spec)
    return bound_payload(bound, excitation_basis(net.n, 1), classification)


def _run_schedule(
    args: argparse.Namespace, settings: Settings, net: SpinNetwork, *, catalytic: bool
) -> dict[str, Any]:
    if args.refine and args.seed is None:
        msg = "--refine needs --seed"
        raise SpinNetworkValidationError(msg, field="--seed")
    quality = settings.quality if args.quality is None else args.quality
    target = _target(net, args.target)
    spec = spectral(net)
    bound = max_fidelity(net, target, spec)
    if catalytic:
        schedule = plan_catalysis(net, target, quality, spec=spec)
    else:
        schedule = synthesize_transfer(spec, target, quality, allow_raman=args.allow_raman)
    initial = sector_state(net.n, schedule.sectors)
    goal = sector_state(net.n, schedule.sectors, target)
    if args.refine:
        schedule, result = refine_schedule(
            net, schedule, initial, goal, seed=args.seed, dt=args.dt
        )
    else:
        result = simulate(net, schedule, initial, args.dt, target=goal, bound=bound)
    path = _csv_path(args, net, "catalyze" if catalytic else "simulate")
    export_trajectory(result, path)
    LOGGER.info("Trajectory written to %s", path)
    return {
        "feasible": True,
        "bound": bound.value,
        "quality": quality,
        "schedule": schedule_payload(schedule),
        "simulation": simulation_payload(result),
        "trajectory_csv": str(path),
    }


def _identify(args: argparse.Namespace, settings: Settings, net: SpinNetwork) -> dict[str, Any]:
    epsilon = settings.epsilon if args.epsilon is None else args.epsilon
    duration = settings.T if args.duration is None else args.duration
    dt = settings.dt if args.dt is None else args.dt
    shots = settings.shots if args.shots is None else args.shots
    record = survival_record(
        net, epsilon, duration, dt, shots=shots, seed=args.seed, offset=args.offset
    )
    path = _csv_path(args, net, "identify")
    export_record(record, path)
    result = estimate_spectrum(record)
    if args.resolve_signs:
        result = resolve_signs(net, result)
    payload = identification_payload(result)
    payload.update(
        {"T": duration, "dt": dt, "shots": shots, "offset": args.offset, "record_csv": str(path)}
    )
    return payload


def _fixtures(args: argparse.Namespace) -> dict[str, Any]:
    args.directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in FIXTURE_NAMES:
        path = args.directory / f"{name}.json"
        path.write_text(fixture_text(name), encoding="utf-8")
        written.append(str(path))
    return {"files": written}


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="utf-8")
    LOGGER.info("Report written to %s", args.out)


def _infeasible(exception: SpinControlError) -> dict[str, Any]:
    blocker = getattr(exception, "blocker", None)
    return {
        "feasible": False,
        "reason": str(exception),
        "blocker": list(blocker) if blocker else None,
    }


def _is_infeasible(exception: SpinControlError) -> bool:
    if isinstance(exception, InfeasibleTaskError):
        return True
    return isinstance(exception, SynthesisError) and exception.reason == "phase_unreachable"


def _dispatch(args: argparse.Namespace, settings: Settings, command: str) -> int:
    if args.command == "fixtures":
        _emit(args, render(build_report(command, None, _fixtures(args))))
        return EXIT_OK
    if args.command == "analyze":
        document = read_document(args.net)
        _emit(args, render(build_report(command, document, _analyze(document))))
        return EXIT_OK
    net = read_network(args.net)
    try:
        if args.command == "bound":
            results = _bound(args, net)
        elif args.command == "identify":
            results = _identify(args, settings, net)
        else:
            results = _run_schedule(args, settings, net, catalytic=args.command == "catalyze")
    except SpinControlError as exception:
        if _is_infeasible(exception):
            _emit(args, render(build_report(command, net, _infeasible(exception))))
        raise
    _emit(args, render(build_report(command, net, results)))
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exception:
        return EXIT_OK if exception.code in (0, None) else EXIT_INVALID
    try:
        settings = load_config(args.config)
        setup_logging(settings, verbose=args.verbose)
        return _dispatch(args, settings, shlex.join(argv))
    except (SpinNetworkValidationError, TargetError) as exception:
        sys.stderr.write(f"error: {describe_error(exception)}\n")
        return EXIT_INVALID
    except SpinControlError as exception:
        sys.stderr.write(f"error: {describe_error(exception)}\n")
        return EXIT_INFEASIBLE if _is_infeasible(exception) else EXIT_ERROR
    except Exception:
        LOGGER.exception("Unexpected failure running %s", args.command)
        return EXIT_ERROR


def main() -> None:
    """Console script entry point."""
    sys.exit(run())
