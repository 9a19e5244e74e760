"""Group, chronological and Cartan exponentials on compact matrix Lie groups."""
from .cartan import (GeodesicTrace, d_hexp_at_zero, geodesic, geodesic_curvature,
                     geodesic_curvature_fd, geodesic_speed, hexp, hexp_flow,
                     riemannian_curvature, riemannian_geodesic)
from .errors import (CartanFlowError, DegenerateGeodesicError, InputError,
                     MatrixOverflowError, NotInAlgebraError, NumericalError,
                     SeriesNotConvergedError, StepSizeUnderflowError)
from .flows import (FlowTrace, TimeDependentField, bch_product, conjugated_flow,
                    d_exp, flow_between, flow_ode, flow_series, inverse_flow,
                    series_error_bound, variations_rhs)
from .kernel import (ToleranceConfig, ext_norm, mat_exp, matrix_from_json,
                     matrix_to_json, quad_integrate, unitarity_defect)
from .lie import (Ad, AlgebraElement, CartanSplit, LieAlgebraSpec, ad_matrix,
                  bracket, cartan_split, gell_mann_basis, inner_product,
                  killing_form, norm)
from .verify import VerifyReport, run_verify

__version__ = "0.1.0"
