"""Observables, covariance estimation, decay fits and bound verification."""
from .bounds import BoundReport, OutsideUniqueness, check_decay_bound, check_moment_bounds
from .covariance import (CovarianceSeries, DecayFit, InsufficientSamples, NoSignal, batch_means,
                         displacement_ball, estimate_covariances, fit_decay_rate)
from .observables import (BATTERY, ObservableSpec, UnboundedSeminorm, custom_observable, delta_k,
                          observable, product_deltas)
from .verify import (moment_quadrature, run_battery, self_measure, verify_brascamp_lieb_1d,
                     verify_contraction, verify_kkk_chain, verify_lsi_1d)

__all__ = [
    "BoundReport", "OutsideUniqueness", "check_decay_bound", "check_moment_bounds",
    "CovarianceSeries", "DecayFit", "InsufficientSamples", "NoSignal", "batch_means",
    "displacement_ball", "estimate_covariances", "fit_decay_rate", "BATTERY", "ObservableSpec",
    "UnboundedSeminorm", "custom_observable", "delta_k", "observable", "product_deltas",
    "moment_quadrature", "run_battery", "self_measure", "verify_brascamp_lieb_1d",
    "verify_contraction", "verify_kkk_chain", "verify_lsi_1d",
]
