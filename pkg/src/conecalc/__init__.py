"""Numerical Mellin and cone calculus on a log grid."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .mellin_core import (POINT, BaseModel, RadialGrid, SpectralFunction,  # noqa: F401
                          WeightedGridFunction, cutoff, dilate, mellin_eval, mellin_forward,
                          mellin_inverse, op_mellin, set_threads)
from .symbols import (ConormalSequence, MeromorphicSymbol, add, invert_conormal_sequence,  # noqa: F401
                      invert_elliptic, laurent_extract, locate_singularities, multiply,
                      translate, translation_product)
from .asymptotics import (DiscreteAsymptoticType, MellinAsymptoticType, WeightData,  # noqa: F401
                          from_pole_set, shadow_close, validate)
from .fuchs import (FuchsOperator, conormal_sequence, ellipticity_report,  # noqa: F401
                    extract_asymptotics, indicial_roots, solve_model, solve_with_taylor)
from .spaces import (NormSpec, flatness_profile, hs_gamma_norm, ksg_norm, pairing,  # noqa: F401
                     kappa)
from .edge import (EdgeGridFunction, EdgeOperator, YGrid, edge_symbol,  # noqa: F401
                   oscillatory_integral, twisted_homogeneity_check, ws_norm)
