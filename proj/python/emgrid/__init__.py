"""Coupled electromigration / thermomigration / IR-drop analysis of power grids.

    import emgrid
    grid = emgrid.load_netlist("grid.sp")
    cfg = emgrid.load_params("grid.params")
    result = emgrid.run(grid, emgrid.thermal_map("die.tmap"), cfg)
    doc = emgrid.result_dict(result, grid)
"""
import json

from ._emgrid import (
    SCHEMA_VERSION,
    InputError,
    NumericalError,
    PowerGrid,
    SimulationConfig,
    SimulationResult,
    ThermalInput,
    __version__,
    filter_trees,
    joule_only,
    load_netlist,
    load_params,
    parse_netlist,
    parse_params,
    render,
    result_json,
    run,
    sha256_hex,
    solve_ir,
    thermal_map,
    write_reports,
)


def result_dict(result, grid):
    """The result.json document as a Python dict."""
    return json.loads(result_json(result, grid))


__all__ = [
    "SCHEMA_VERSION",
    "InputError",
    "NumericalError",
    "PowerGrid",
    "SimulationConfig",
    "SimulationResult",
    "ThermalInput",
    "__version__",
    "filter_trees",
    "joule_only",
    "load_netlist",
    "load_params",
    "parse_netlist",
    "parse_params",
    "render",
    "result_dict",
    "result_json",
    "run",
    "sha256_hex",
    "solve_ir",
    "thermal_map",
    "write_reports",
]
