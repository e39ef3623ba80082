from .config import ConfigError, RunConfig, parse_config, serialize_config
from .output import CSV_COLUMNS, write_vtk
from .runner import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, run, simulate

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialize_config", "CSV_COLUMNS", "write_vtk",
           "run", "simulate", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_IO"]
