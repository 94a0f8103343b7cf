"""
Early exit from the learned BNTT scales.

The exit time is computed offline from mean |gamma| of every BNTT layer at
every timestep, before any forward pass. Timesteps past the exit add little
to the output once all layers have shrunk their gamma below ``tau``.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from services.base_service import BaseEvaluationService
from utils.errors import AnalysisError
from utils.logging_config import logger

LAST_ABOVE = "last-above"
FIRST_ALL_BELOW = "first-all-below"
EXIT_RULES = (LAST_ABOVE, FIRST_ALL_BELOW)
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class EarlyExitPolicy:
    tau: float
    exit_time: int  # number of timesteps to run, 1 <= exit_time <= timesteps
    timesteps: int
    rule: str = LAST_ABOVE


def gamma_profile(net) -> Dict[str, np.ndarray]:
    """Mean |gamma| per BNTT layer per timestep, shape [T] each."""
    layers = net.norm_layers()
    if not layers:
        raise AnalysisError("Network has no BNTT layers to derive an exit time from")
    profile = {}
    for layer in layers:
        if not layer.norm.populated:
            raise AnalysisError(
                f"Layer {layer.spec.name} has untrained gamma (no statistics updates)"
            )
        means = np.abs(layer.norm.gamma.astype(np.float64)).mean(axis=1)
        if layer.norm.time_shared:
            means = np.repeat(means, net.timesteps)
        profile[layer.spec.name] = means
    return profile


def exit_time_from_profile(profile, tau, timesteps, rule=LAST_ABOVE):
    if rule not in EXIT_RULES:
        raise AnalysisError(f"Unknown exit rule {rule!r}; expected one of {EXIT_RULES}")
    table = np.vstack([np.asarray(means, dtype=np.float64) for means in profile.values()])
    above = np.any(table >= tau, axis=0)
    if rule == LAST_ABOVE:
        hits = np.flatnonzero(above)
        return int(hits[-1]) + 1 if hits.size else 1
    below = np.flatnonzero(~above)
    if not below.size:
        return timesteps
    return max(1, int(below[0]))


def compute_exit_time(net, tau, rule=LAST_ABOVE):
    """Exit policy for ``tau``; ``rule`` picks the last-above or first-all-below reading."""
    profile = gamma_profile(net)
    exit_time = exit_time_from_profile(profile, tau, net.timesteps, rule)
    logger.info(f"[EarlyExit] tau={tau} rule={rule}: exit after {exit_time}/{net.timesteps}")
    return EarlyExitPolicy(float(tau), exit_time, net.timesteps, rule)


def gamma_histograms(net, bins=HISTOGRAM_BINS):
    """
    Per layer and timestep, counts of gamma values over ``bins`` equal bins
    spanning that layer's [min, max]. Returns rows for CSV export.
    """
    rows = []
    for layer in net.norm_layers():
        gamma = layer.norm.gamma.astype(np.float64)
        low, high = float(gamma.min()), float(gamma.max())
        if high <= low:
            high = low + 1.0
        edges = np.linspace(low, high, bins + 1)
        for slot in range(gamma.shape[0]):
            counts, _ = np.histogram(gamma[slot], bins=edges)
            for b, count in enumerate(counts):
                rows.append(
                    {
                        "layer": layer.spec.name,
                        "timestep": slot + 1,
                        "bin": b,
                        "bin_low": float(edges[b]),
                        "bin_high": float(edges[b + 1]),
                        "count": int(count),
                    }
                )
    return rows


def gamma_profile_rows(profile):
    return [
        {"layer": name, "timestep": t + 1, "mean_abs_gamma": float(value)}
        for name, means in profile.items()
        for t, value in enumerate(means)
    ]


class EarlyExitSweepService(BaseEvaluationService):
    """Accuracy when inference stops at the exit time of each tau"""

    analysis_type = "EarlyExit"
    level_name = "tau"
    exit_rule = LAST_ABOVE

    @classmethod
    def _validate_level(cls, level):
        if not np.isfinite(level):
            raise AnalysisError(f"tau must be finite, got {level}")

    @classmethod
    def _timesteps_for(cls, net, level):
        return compute_exit_time(net, level, cls.exit_rule).exit_time

    @classmethod
    def _perturb(cls, net, images, labels, sample_ids, rng, level):
        return images

    @classmethod
    def _format_row(cls, level, result):
        return {"tau": level, "exit_time": result.timesteps, "accuracy": result.accuracy}


class FirstAllBelowSweepService(EarlyExitSweepService):
    exit_rule = FIRST_ALL_BELOW


SWEEP_SERVICES = {LAST_ABOVE: EarlyExitSweepService, FIRST_ALL_BELOW: FirstAllBelowSweepService}


def sweep_exit_thresholds(net, dataset, rng, taus, rule=LAST_ABOVE):
    """Rows of (tau, exit_time, accuracy) in the order of ``taus``."""
    if rule not in SWEEP_SERVICES:
        raise AnalysisError(f"Unknown exit rule {rule!r}; expected one of {EXIT_RULES}")
    gamma_profile(net)
    return SWEEP_SERVICES[rule].run_sweep(net, dataset, rng, taus)
