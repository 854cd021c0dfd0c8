"""
Analysis and control of XX spin networks driven through one pendant coupling.

The drift couplings are fixed; a single time-dependent field modulates the
coupling between spin 1 and spin 2. The package finds the symmetries that
limit what that field can do, bounds the achievable transfer fidelity,
synthesizes and simulates pulse schedules (including catalytic ones that
borrow a second excitation) and recovers the spectrum from survival records.
"""

from __future__ import annotations

from .bounds import classify_dark, max_fidelity, phase_reachability, spectral
from .errors import SpinControlError
from .network import automorphisms, bipartition, load_fixture, parse_network
from .operators import direct_sum_sector, excitation_basis, restrict
from .propagation import simulate
from .pulses import plan_catalysis, synthesize_transfer
from .symmetries import decompose, find_asos, find_csos, lie_closure_dimension
from .sysid import estimate_spectrum, resolve_signs, survival_record

__version__ = "0.1.0"

__all__ = [
    "SpinControlError",
    "automorphisms",
    "bipartition",
    "classify_dark",
    "decompose",
    "direct_sum_sector",
    "estimate_spectrum",
    "excitation_basis",
    "find_asos",
    "find_csos",
    "lie_closure_dimension",
    "load_fixture",
    "max_fidelity",
    "parse_network",
    "phase_reachability",
    "plan_catalysis",
    "resolve_signs",
    "restrict",
    "simulate",
    "spectral",
    "survival_record",
    "synthesize_transfer",
]
