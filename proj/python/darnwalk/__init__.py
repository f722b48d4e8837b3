"""Diffusions on darned and glued spaces."""

from ._darnwalk import (
    Config,
    DarnwalkError,
    check_compatibility,
    classify_stability,
    exit_kernel,
    expected_exit_time,
    level_radius,
    radial_g,
    run_cli,
    sha256_hex,
)

__all__ = [
    "Config",
    "DarnwalkError",
    "check_compatibility",
    "classify_stability",
    "exit_kernel",
    "expected_exit_time",
    "level_radius",
    "radial_g",
    "run_cli",
    "sha256_hex",
]
__version__ = "0.1.0"
