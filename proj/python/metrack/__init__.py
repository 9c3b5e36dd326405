"""Online metric-learning visual tracker (Python bindings)."""

from ._metrack import (
    InputError,
    IoError,
    NumericalError,
    Tracker,
    cle,
    default_config,
    featurize,
    hog405,
    pa_update,
    read_frame,
    run_cli,
    solve_regression,
    summarize,
    triplet_loss,
    vor,
    write_pgm,
)

__all__ = [
    "InputError",
    "IoError",
    "NumericalError",
    "Tracker",
    "cle",
    "default_config",
    "featurize",
    "hog405",
    "pa_update",
    "read_frame",
    "run_cli",
    "solve_regression",
    "summarize",
    "triplet_loss",
    "vor",
    "write_pgm",
]
