"""Ensembles of matrix product states: spectra, mutual information, transitions."""

__version__ = "0.1.0"

from .circuits import (CircuitSpec, build_rmps, haar_unitary, run_brickwork,
                       run_monitored, run_uniform_ti)
from .errors import (BudgetExceededError, CapExceededError, ConfigError,
                     ConvergenceError, DimensionMismatchError,
                     MpsEnsemblesError, NumericalError)
from .linalg import EigResult, SvdResult, eig_general, kron, matmul, qr_unitary, svd
from .mps import MpsState, fidelity, product_state
from .replica import (BlockLayout, ReplicaOperator, default_layout,
                      renyi_mutual_info_TI, renyi_mutual_info_finite,
                      replica_apply, replica_eigvals)
from .serialize import load_mps, save_mps
from .spectra import (RadialDensity, TransferSpectrum, central_site_spectrum,
                      connected_correlator, density_difference, radial_density,
                      small_eig_fraction, spectral_gap, spectrum, transfer_matrix)
from .weingarten import (AveragedReplicaPair, ShiftedReplicaTM, WeingartenMatrix,
                         averaged_replica_tm, ik_slope_scan, rmps_averaged_Ik,
                         weingarten_matrix)

__all__ = [name for name in dir() if not name.startswith("_")]
