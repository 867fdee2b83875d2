"""Single-server deadline queues: exact simulation, reference-system
construction, heavy-traffic diffusion limits, and closed-form performance
predictions."""

from .measures import AtomicMeasure, MeasureError, EPS_MASS
from .primitives import (CustomerRecord, CustomerStream, DistributionSpec,
                         LeadTimeSpec, PrimitivesError, TrafficParams,
                         generate_stream, rationalize, substreams,
                         traffic_params)
from .simulator import (PolicyKind, PolicySpec, SimulationError,
                        SystemTrajectory, netput_workload, run_policy_suite,
                        simulate)
from .reference import (ComparisonReport, CutDecomposition, DirectReference,
                        ReferenceError, ReferenceTrajectory,
                        compare_reference_routes, compare_systems,
                        cut_decomposition, reference_from_standard,
                        simulate_reference)
from .kernels import HAVE_NUMBA, RunSummary, run_counters
from .diffusion import (BoundaryRatesMC, DiffusionError, LeadProfile,
                        PathGrid, StationaryLaw, boundary_rates_mc,
                        frontier_from_workload, idle_rate, reflect_one_sided,
                        reflect_two_sided, renege_rate, simulate_bm,
                        stationary_density)
from .predict import (PredictError, customer_work_ratio,
                      customer_work_ratio_limit, fifo_lost_work_crosscheck,
                      fraction_late_work_standard,
                      fraction_lost_work_reneging, mean_excess_service,
                      prediction_table, renege_probability, work_ratio)
from .stats import (CollapseCheck, ScaledPath, StatsError, SteadyEstimate,
                    batch_mean_ci, collapse_check, frontier_relation_check,
                    lead_profile_check, long_run_fractions,
                    queue_work_proportionality, removed_work_rate_check,
                    scale_path)
from .audit import (AuditReport, audit_stream, policy_optimality_check,
                    run_audit_battery, tie_rich_stream)
from .config import ConfigError, Settings, load_settings

__version__ = "0.1.0"
