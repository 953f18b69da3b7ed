"""Sparse Fock-space simulation of polarization-encoded linear-optics circuits."""

from .fock import Bell, Ket, ModeLabel, QubitState
from .experiments import (NoiseConfig, apply_feedforward, classical_baseline,
                          run_cnot_truth_table, run_entangling_fringe,
                          run_teleportation)

__version__ = "0.1.0"

__all__ = [
    "Bell", "Ket", "ModeLabel", "QubitState", "NoiseConfig", "apply_feedforward",
    "classical_baseline", "run_cnot_truth_table", "run_entangling_fringe",
    "run_teleportation",
]
