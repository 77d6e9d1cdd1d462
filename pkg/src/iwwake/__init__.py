"""Far-field internal gravity waves behind a source moving through a
stratified, horizontally inhomogeneous fluid layer.

Pipeline: vertical modes -> dispersion surface -> space-time ray fan ->
amplitude transport -> global Airy/Fresnel wave synthesis.  See the
README for the batch CLI.
"""

from .stratification import (StratificationField, SourceSpec, eval_n2,
                             validate, ValidationReport, DomainError)
from .modes import (ModeSolution, ModeCache, solve_mode, mode_wavenumber,
                    domega_derivative, NoPropagatingModeError, ModeSolverError)
from .dispersion import (DispersionSurface, DirectDispersion,
                         ConstantNDispersion, build_surface,
                         ExtrapolationError, SurfaceBuildError)
from .rays import (RayState, RayPath, RayFan, initial_conditions, trace_ray,
                   trace_fan, EvanescentDirectionError)
from .transport import (TransportState, TransportFan, jacobian, p_factor,
                        source_constant, amplitude_psi, evaluate_transport,
                        WAVE_AIRY, WAVE_FRESNEL)
from .synthesis import (FieldSample, GridResult, airy_w, fresnel_eta,
                        horizontal_velocity, wkb_far_field, collect_samples,
                        synthesize_grid, NotApplicableError)
from . import specfun

__version__ = "0.1.0"
