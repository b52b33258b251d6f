"""flowsteer: an interactive free-surface lattice Boltzmann simulator.

The package couples a D3Q19 single-relaxation-time solver with a
mass-tracking free surface, exposes the running simulation over a small
binary steering protocol (raw TCP and WebSocket), and ships a dam-design
scenario with overflow/stabilization detectors and session metrics.
"""

from .core import (CellFlag, FluidParams, GridGeometry, MacroFields,
                   StabilityFault, bounce_back, collide, equilibrium,
                   moments, stream)
from .scenario import (Box, DetectorConfig, EventLog, IncompleteLog,
                       InvalidScene, LogRecord, Metrics, Outcome,
                       ScenarioRuntime, SceneSpec, WallRegion, build_session,
                       compute_metrics, find_scene, load_scene,
                       load_scene_file, scene_from_json, scene_to_json,
                       verify_optimal_height)
from .sim import Simulation
from .steering import (CommandRejected, LifecycleState, SteeringDriver,
                       apply_edits)
from .surface import (ATMOSPHERIC_RHO, ConversionConfig, WALL_MARKER,
                      convert_cells, exchange_mass, fill_fraction_field,
                      reconstruct_from_gas)

__all__ = [
    "ATMOSPHERIC_RHO", "Box", "CellFlag", "CommandRejected",
    "ConversionConfig", "DetectorConfig", "EventLog", "FluidParams",
    "GridGeometry", "IncompleteLog", "InvalidScene", "LifecycleState",
    "LogRecord", "MacroFields", "Metrics", "Outcome", "ScenarioRuntime",
    "SceneSpec", "Simulation", "StabilityFault", "SteeringDriver",
    "WALL_MARKER", "WallRegion", "apply_edits", "bounce_back",
    "build_session", "collide", "compute_metrics", "convert_cells",
    "equilibrium", "exchange_mass", "fill_fraction_field", "find_scene",
    "load_scene", "load_scene_file", "moments", "reconstruct_from_gas",
    "scene_from_json", "scene_to_json", "stream", "verify_optimal_height",
]

__version__ = "0.1.0"
