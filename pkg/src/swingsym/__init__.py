"""Transient analysis of swing-equation power grids.

Modal decomposition of the linearized dynamics, first-peak estimates for line
flows, automorphism-based quotient networks and within-cluster deviations,
with an RK4 integrator as the numerical reference.
"""

from importlib import resources
from pathlib import Path

from .errors import DivergenceError, NetworkFormatError, NumericalError, SwingError, SymmetryError
from .linearization import LinearizedSystem, linearize, solve_fixed_point
from .modal import ModalBasis, decompose, steady_state
from .network import GridNetwork, from_edges, from_shorthand, load_network, write_network
from .peaks import ModeCombination, find_first_peak, max_abs_value
from .symmetry import SymmetryPartition, build_quotient, find_orbits, validate_partition

__version__ = "0.1.0"


def example_path(name: str) -> Path:
    """Path of a bundled example network (``bottleneck7``, ``star7``, ...)."""
    path = Path(str(resources.files("swingsym").joinpath(f"data/{name}.json")))
    if not path.exists():
        raise FileNotFoundError(f"no bundled network named {name!r}")
    return path


__all__ = [
    "DivergenceError", "GridNetwork", "LinearizedSystem", "ModalBasis", "ModeCombination",
    "NetworkFormatError", "NumericalError", "SwingError", "SymmetryError", "SymmetryPartition",
    "build_quotient", "decompose", "example_path", "find_first_peak", "find_orbits",
    "from_edges", "from_shorthand", "linearize", "load_network", "max_abs_value",
    "solve_fixed_point", "steady_state", "validate_partition", "write_network",
]
