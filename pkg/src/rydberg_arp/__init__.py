"""Rydberg two-qubit gates from double adiabatic passage of Stark-tuned Förster resonances.

Modules
-------
angular
    Clebsch-Gordan and 6j coefficients, channel angular factors.
stark
    Quadratic Stark shifts, detuning profiles and the field waveforms realising them.
pulses
    Two-level adiabatic rapid passage, exact and dressed-state.
forster
    Channel catalog and the multi-channel pair Hamiltonian.
dynamics
    Schrödinger, propagator and depopulation master-equation solvers.
gates
    CZ/CNOT schedules, truth tables, Bell states and sweeps.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .angular import RydbergLevel, angular_factor, clebsch_gordan, wigner_6j
from .dynamics import DecayChannel, propagate_master, propagate_schrodinger, propagator
from .forster import ChannelSpec, PairHamiltonian, build_catalog
from .gates import (
    QubitRegister,
    bell_state_run,
    calibrate_t2,
    cnot_sequence,
    cz_sequence,
    forster_passage,
    truth_table,
)
from .pulses import PassageParams, double_passage, evolve_adiabatic, evolve_exact
from .stark import DetuningProfile, field_from_profile, resonance_field, stark_shift

__all__ = [
    "ChannelSpec",
    "DecayChannel",
    "DetuningProfile",
    "PairHamiltonian",
    "PassageParams",
    "QubitRegister",
    "RydbergLevel",
    "angular_factor",
    "bell_state_run",
    "build_catalog",
    "calibrate_t2",
    "clebsch_gordan",
    "cnot_sequence",
    "cz_sequence",
    "double_passage",
    "evolve_adiabatic",
    "evolve_exact",
    "field_from_profile",
    "forster_passage",
    "propagate_master",
    "propagate_schrodinger",
    "propagator",
    "resonance_field",
    "stark_shift",
    "truth_table",
    "wigner_6j",
]
