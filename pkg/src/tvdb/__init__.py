"""Total variation flows with dynamic boundary conditions on a flat periodic strip.

Submodules:

* ``grid``: geometry, state containers, discrete operators
* ``regularizers``: smooth approximations of the Euclidean norm
* ``energies``: singular and relaxed energies, lattice helpers
* ``flow``: minimizing-movement time stepping
* ``mosco``: boundary-layer liftings, recovery sequences, convergence harness
* ``props``: comparison principle and T-monotonicity checks
"""
__version__ = "0.1.0"

from .energies import EnergyBreakdown, EnergyParams, energy, evaluate  # noqa: E402
from .flow import (EvolutionProblem, StepperConfig, Trajectory, prox_step,  # noqa: E402
                   run_flow)
from .grid import GridSpec, StateVector, inner_product_H, norm_H  # noqa: E402
from .regularizers import RegularizerSpec  # noqa: E402

__all__ = ["EnergyBreakdown", "EnergyParams", "EvolutionProblem", "GridSpec", "RegularizerSpec",
           "StateVector", "StepperConfig", "Trajectory", "energy", "evaluate", "inner_product_H",
           "norm_H", "prox_step", "run_flow", "__version__"]
