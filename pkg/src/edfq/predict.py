"""Closed-form steady-state predictions for nearly critical deadline queues.

All formulas take the drift parameter theta = 2(1-rho)/sigma2 from
:func:`edfq.primitives.traffic_params` and the mean initial lead dbar.
They come from the strip-reflected diffusion picture: lost work is the
upper-boundary outflow, late work in the no-removal system is the mass
beyond the cap of the one-sided exponential law, and customer-level
quantities follow from the service transform.  Every ratio degenerates
smoothly at exactly critical load (theta == 0).
"""

from __future__ import annotations

import math

from .primitives import DistributionSpec, PrimitivesError, TrafficParams


class PredictError(ValueError):
    """Raised on invalid prediction inputs."""


def _check(traffic: TrafficParams, dbar) -> float:
    dbar = float(dbar)
    if dbar <= 0:
        raise PredictError("mean lead must be positive")
    return dbar


def fraction_lost_work_reneging(traffic: TrafficParams, dbar) -> float:
    """Long-run fraction of arriving work removed by reneging.

    (1-rho) / (rho * (exp(theta*dbar) - 1)) away from critical load;
    sigma2/(2*dbar) exactly at it (the two agree in the limit).
    """
    dbar = _check(traffic, dbar)
    th = traffic.theta
    if th == 0:
        return traffic.sigma2 / (2 * dbar)
    return (1 - traffic.rho) / (traffic.rho * math.expm1(th * dbar))


def fraction_late_work_standard(traffic: TrafficParams, dbar) -> float:
    """Long-run fraction of work served past its deadline, no removal."""
    dbar = _check(traffic, dbar)
    return math.exp(-traffic.theta * dbar)


def work_ratio(traffic: TrafficParams, dbar) -> float:
    """Late work (kept) over lost work (removed): the price of patience.

    rho * (1 - exp(-theta*dbar)) / (1 - rho), degenerating to
    2*dbar/sigma2 at critical load.  Large values mean reneging removes
    far less work than lateness would otherwise affect.
    """
    dbar = _check(traffic, dbar)
    th = traffic.theta
    if th == 0:
        return 2 * dbar / traffic.sigma2
    return -traffic.rho * math.expm1(-th * dbar) / (1 - traffic.rho)


def renege_probability(traffic: TrafficParams, dbar,
                       service: DistributionSpec) -> float:
    """Long-run fraction of customers that renege (lose their residual).

    (E[exp(theta*V)] - 1) / (exp(theta*dbar) - 1); at critical load this
    degenerates to E[V]/dbar.
    """
    dbar = _check(traffic, dbar)
    th = traffic.theta
    if th == 0:
        return service.mean / dbar
    try:
        num = service.mgf(th) - 1
    except PrimitivesError as exc:
        raise PredictError(
            "service transform diverges at theta; the prediction does not "
            "apply") from exc
    return num / math.expm1(th * dbar)


def mean_excess_service(service: DistributionSpec) -> float:
    """Mean residual service seen by a work-sampled inspection point."""
    m = service.mean
    if m <= 0:
        raise PredictError("service mean must be positive")
    return service.second_moment / (2 * m)


def customer_work_ratio(traffic: TrafficParams, dbar,
                        service: DistributionSpec) -> float:
    """Reneging probability over lost-work fraction.

    Algebraically rho*(E[exp(theta*V)]-1)/(1-rho); near critical load it
    approaches 2*E[V]^2/(var U + var V) -- for Poisson arrivals that is
    2*E[V]^2/E[V^2], e.g. 1 for exponential service and 2 for
    deterministic service.
    """
    dbar = _check(traffic, dbar)
    return (renege_probability(traffic, dbar, service)
            / fraction_lost_work_reneging(traffic, dbar))


def customer_work_ratio_limit(interarrival: DistributionSpec,
                              service: DistributionSpec) -> float:
    """Critical-load limit of :func:`customer_work_ratio`."""
    var_u = interarrival.std ** 2
    var_v = service.std ** 2
    if var_u + var_v <= 0:
        raise PredictError("a deterministic system never reneges in the "
                           "diffusion regime")
    return 2 * service.mean ** 2 / (var_u + var_v)


def fifo_lost_work_crosscheck(rho: float, mu: float, dbar) -> float:
    """Coarse first-come-first-served loss fraction for Poisson/exponential.

    Uses the classical waiting-time tail P = rho*exp(-mu*(1-rho)*dbar) in
    (1-rho)*P/(1-rho*P).  Only an order-of-magnitude companion for the
    deadline-ordered prediction: the two approximations track each other
    within tens of percent but neither bounds the other uniformly in the
    mean lead.
    """
    dbar = float(dbar)
    if not 0 < rho < 1 or mu <= 0 or dbar <= 0:
        raise PredictError("need 0 < rho < 1, mu > 0, dbar > 0")
    p = rho * math.exp(-mu * (1 - rho) * dbar)
    return (1 - rho) * p / (1 - rho * p)


def prediction_table(traffic: TrafficParams, dbar_values,
                     service: DistributionSpec) -> list[dict]:
    """One prediction row per mean lead: every closed form side by side."""
    rows = []
    for dbar in dbar_values:
        rows.append({
            "dbar": float(dbar),
            "lost_work": fraction_lost_work_reneging(traffic, dbar),
            "late_work": fraction_late_work_standard(traffic, dbar),
            "late_over_lost": work_ratio(traffic, dbar),
            "renege_probability": renege_probability(traffic, dbar, service),
            "customer_work_ratio": customer_work_ratio(traffic, dbar,
                                                       service),
        })
    return rows
