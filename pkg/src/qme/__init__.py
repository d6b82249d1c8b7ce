"""Open quantum system dynamics: Lindblad, Bloch-Redfield, Pauli and Floquet solvers."""
__version__ = "0.1.0"

from .correlations import (
                           CorrelationSeries,
                           Spectrum,
                           absorption_spectrum,
                           emission_spectrum,
                           multilevel_emission,
                           steady_correlation,
                           two_time_correlation,
)
from .errors import *
from .floquet import (
                           FloquetProblem,
                           quasi_energies_hf,
                           quasi_energies_propagator,
                           time_averaged_probability,
                           transition_probability,
)
from .liouville import (
                           LindbladChannel,
                           build_liouvillian,
                           devectorize,
                           dissipator,
                           lindblad_rhs,
                           null_space,
                           steady_states,
                           unique_steady_state,
                           vectorize,
)
from .mcwf import TrajectoryConfig, ensemble_average, sample_trajectory
from .operators import (
                           expectation,
                           is_density_operator,
                           partial_trace,
                           purity,
                           state_score,
                           tensor_product,
)
from .propagation import (
                           TimeDependentGenerator,
                           TimeGrid,
                           Trajectory,
                           expm_trajectory,
                           propagate_expm,
                           propagate_piecewise,
                           rk45_propagate,
                           semigroup_propagate,
                           spectral_solution,
                           trotter_propagate,
)
from .redfield import (
                           CouplingSpec,
                           OhmicSpectrum,
                           bloch_redfield_tensor,
                           br_lindblad_form,
                           ohmic_spectrum,
                           pauli_propagate,
                           pauli_rates,
)
