"""Numerical laboratory for random Schroedinger scattering.

Forward-simulates the stationary scattering problem with a rough Gaussian
random source and a deterministic potential, synthesizes far-field data, and
recovers the source's rough strength from frequency-band correlations of a
single realization.
"""

from .errors import (ConfigError, CoverageError, DiagonalSingularityError,
                     FieldFormatError, IterationLimitError, MigrError,
                     NotContractingError, ShapeMismatchError,
                     VacuousCheckError)
from .fieldio import read_field, read_sidecar, write_field, write_sidecar
from .grid import (ComplexField, Grid3, ScalarField, fft_convolve,
                   forward_spectrum, line_sums, point_sums, spectrum_to_field,
                   weighted_norm)
from .source import (NoiseSeed, SourceModel, covariance_oracle, double_bump,
                     empirical_covariance, gaussian_bump, lattice_covariance,
                     normalized_integral, plateau, pooled_covariance,
                     riesz_constant, sample_source)
from .solver import (MildSolution, Potential, SolverConfig, apply_resolvent,
                     resolvent_symbol, solve_density, solve_mild,
                     truncated_kernel_symbol)
from .farfield import (DirectionSet, FarFieldDataset, FrequencyGrid,
                       far_field, mean_far_field, read_dataset, synthesize,
                       write_dataset)
from .recovery import (BandCorrelation, KSequence, RecoveryResult,
                       band_correlate, invert_to_mu, k_sequence, m_star,
                       recover_mu_hat)
from .diagnostics import (RateFit, check_cross_decay, check_ergodic_rates,
                          check_leading_term, f_components, fit_loglog,
                          mean_decay)

__version__ = "0.1.0"
