"""Packet-level simulator of a zero-buffer datacenter pod: centrally
arbitrated slotted transmission with gap-filled control cells, optimistic
sending, a buffered baseline, and collision auditing."""

__version__ = "0.1.0"

from .config import RunConfig, config_from_dict, load_config
from .simulation import PodSimulation, RunResult, run_simulation

__all__ = [
    "RunConfig",
    "config_from_dict",
    "load_config",
    "PodSimulation",
    "RunResult",
    "run_simulation",
    "__version__",
]
