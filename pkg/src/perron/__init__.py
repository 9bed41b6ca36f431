"""Transfer operators of rational maps, equilibrium-measure sampling and
numerical checks of limit theorems for Birkhoff sums."""

from .errors import *  # noqa: F401,F403
from .sphere import (SpherePoint, Chart, ChartValue, Quadrature, normalize, chordal_distance,
                     to_chart, from_chart, fubini_quadrature, fubini_mean, sobolev_norms)
from .rational_map import (RationalMap, PreimageSet, from_affine, from_record, evaluate,
                           preimages, critical_points)
from .observables import Observable
from .equilibrium import (MeasureSample, CorrelationTable, sample_equilibrium, integrate,
                          weight_by, invariance_check, correlation_table, decay_fit,
                          export_sample, import_sample)
from .transfer import (PerturbationParameter, transfer_apply, perturbed_apply,
                       iterated_perturbed_apply, birkhoff_sum, gordin_partial_sums)

__version__ = "0.1.0"
