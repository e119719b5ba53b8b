"""Nonlinear two-species kinetic simulator, diagnostics and experiments."""

from __future__ import annotations

from .characteristics import (SampledField, StaticField, Trajectory, TrajectoryState,
                              integrate_characteristics)
from .diagnostics import DiagnosticsRecord, Reference, diagnostics, equilibrium_scale, weight
from .experiments import (InstabilityReport, StabilityReport, equilibrium_setup, escape_time,
                          fit_growth, hcal_violations, linear_mode, run, run_instability_experiment,
                          run_stability_experiment, seeded_state, symmetric_perturbation,
                          weighted_sup)
from .snapshot import read_snapshot, write_snapshot
from .state import (SimConfig, SpeciesState, Stepper, local_maxwellians, maxwellian_state, step)

__all__ = [
    "DiagnosticsRecord", "InstabilityReport", "Reference", "SampledField", "SimConfig",
    "SpeciesState", "StabilityReport", "StaticField", "Stepper", "Trajectory", "TrajectoryState",
    "diagnostics", "equilibrium_scale", "equilibrium_setup", "escape_time", "fit_growth",
    "hcal_violations", "integrate_characteristics", "linear_mode", "local_maxwellians",
    "maxwellian_state", "read_snapshot", "run", "run_instability_experiment",
    "run_stability_experiment", "seeded_state", "step", "symmetric_perturbation", "weight",
    "weighted_sup", "write_snapshot",
]
