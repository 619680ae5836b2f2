"""Numerical periodic homogenization for Navier-Stokes-type flows.

Cell problems and effective tensors (:mod:`cell`, :mod:`tensor`), macroscopic
limit solvers (:mod:`macro`), fine-scale direct simulation (:mod:`dns`) and
convergence studies (:mod:`harness`) on top of the periodic and staggered
discretizations in :mod:`grid` and :mod:`staggered`.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import DomainGrid, PeriodicGrid, set_threads
from .coeff import (CellGeometry, CoefficientField, DiskDescriptor, make_coefficients,
                    make_disk_geometry, make_forcing)
from .cell import (SolverParams, solve_all_correctors, solve_elliptic_corrector,
                   solve_permeability_corrector, solve_permeability_correctors)
from .tensor import (HomogenizedTensor, PermeabilityMatrix, assemble_K, assemble_q_direct,
                     assemble_q_energy, homogenized_tensor)
from .macro import reconstruct_corrector, solve_darcy, solve_homogenized_ns
from .dns import audit_estimates, ladyzhenskaya_audit, solve_eps_oscillating, solve_eps_porous
from .harness import (StudyReport, TestFunctionFamily, darcy_study, export_report,
                      homogenization_study, two_scale_gap)
