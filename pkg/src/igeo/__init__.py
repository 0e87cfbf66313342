"""Information geometry of escort-weighted divergences on finite alphabets."""
from .distributions import (EscortMap, ParametricModel, apply_escort_map, as_pmf, escort,
                            escort_model, simplex_chart, uniform)
from .divergences import (ConvexGenerator, DivergenceSpec, csiszar_f_divergence,
                          generalized_f_divergence, kl, relative_alpha_entropy,
                          renyi_divergence, renyi_entropy, shannon_entropy)
from .eguchi import (MetricMatrix, alpha_metric_closed, duality_residual,
                     eguchi_connections_fd, eguchi_metric_fd, fisher_metric,
                     generalized_metric_closed)
from .families import (FamilySpec, alpha_exponential_model, counterexample_report,
                       eta_coordinates, escort_correspondence, power_law_model)
from .crlb import (Estimator, alpha_crlb_report, exact_moments, from_escort_estimator,
                   generalized_crlb_report, to_escort_estimator)

__version__ = "0.1.0"
