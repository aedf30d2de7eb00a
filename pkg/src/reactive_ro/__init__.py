"""Reverse-osmosis feed channel with a reactive, clogging membrane."""

__version__ = "0.1.0"

from .chemistry import (ReactionNetwork, SurfaceReactions, rate_jacobian, reaction_rates,
                        solid_production, species_sources, surface_consumption)
from .config import SimulationConfig, load_config, parse_config, shipped_config, to_ini
from .driver import CouplingControls, Simulation, StepDiagnostics, picard_step, run, sweep
from .errors import ConfigError, CouplingError, SolverError
from .flow import FlowSolver, FlowState, FluidProperties, inlet_profile
from .grid import FaceField, Grid, ScalarField, build_grid
from .membrane import (MembraneState, OsmoticModel, equivalent_water_permeability,
                       kozeny_carman, membrane_resistance, membrane_velocity, osmotic_pressure,
                       recovery, refresh_membrane, update_porosity)
from .transport import MembraneFluxSplit, Species, membrane_species_flux, step_species

__all__ = [
    "ConfigError", "CouplingControls", "CouplingError", "FaceField", "FlowSolver", "FlowState",
    "FluidProperties", "Grid", "MembraneFluxSplit", "MembraneState", "OsmoticModel",
    "ReactionNetwork", "ScalarField", "SimulationConfig", "Simulation", "SolverError", "Species",
    "StepDiagnostics", "SurfaceReactions", "build_grid", "equivalent_water_permeability",
    "inlet_profile", "kozeny_carman", "load_config", "membrane_resistance",
    "membrane_species_flux", "membrane_velocity", "osmotic_pressure", "parse_config",
    "picard_step", "rate_jacobian", "reaction_rates", "recovery", "refresh_membrane", "run",
    "shipped_config", "solid_production", "species_sources", "step_species",
    "surface_consumption", "sweep", "to_ini", "update_porosity",
]
