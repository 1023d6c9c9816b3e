"""Coordinate-descent search over source intensities and selection probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .core import ChannelParams, DomainError, IntensityProfile
from .pipeline import evaluate
from .scan import KeyRateResult

COORDS = ("mu", "nu", "omega", "p_mu", "p_nu", "p_omega")

MIN_INTENSITY = 0.01
PROB_RANGE = (0.01, 0.97)
MAX_PROB_SUM = 0.99


@dataclass(frozen=True)
class OptimizerOptions:
    step: float = 0.2  # relative perturbation
    min_step: float = 1e-4
    max_evals: int = 400
    restarts: int = 4
    restart_spread: float = 0.3
    rng_seed: int = 0
    grid: Tuple[int, int] = (16, 16)
    refine: bool = True


@dataclass
class OptimizationResult:
    profile: IntensityProfile
    result: KeyRateResult
    zero_rate: bool
    n_evals: int
    trace: List[Dict] = field(default_factory=list)


def admissible(values: Dict[str, float]) -> bool:
    """Search-box constraints, tighter than the profile type's own invariants."""
    if not values["mu"] > values["nu"] > values["omega"] > MIN_INTENSITY:
        return False
    lo, hi = PROB_RANGE
    probs = [values["p_mu"], values["p_nu"], values["p_omega"]]
    if not all(lo < p < hi for p in probs):
        return False
    return sum(probs) < MAX_PROB_SUM


def _objective(res: KeyRateResult) -> Tuple[float, float]:
    # the margin ranks profiles on the zero-rate plateau
    r = res.r_per_pulse if res.r_per_pulse == res.r_per_pulse else -math.inf
    g = res.margin if res.margin == res.margin else -math.inf
    return (r, g)


def _try_profile(values: Dict[str, float]) -> Optional[IntensityProfile]:
    if not admissible(values):
        return None
    try:
        return IntensityProfile(**values)
    except DomainError:
        return None


def _descend(
    channel: ChannelParams,
    start: IntensityProfile,
    opts: OptimizerOptions,
    budget: int,
    record: Callable[[Dict], None],
    restart: int,
) -> Tuple[IntensityProfile, KeyRateResult, int]:
    evals = 0

    def score(p: IntensityProfile) -> KeyRateResult:
        nonlocal evals
        evals += 1
        return evaluate(p, channel, grid=opts.grid, refine=opts.refine).result

    best_p = start
    best = score(start)
    record({"restart": restart, "eval": evals, "profile": start.as_dict(), "r_per_pulse": best.r_per_pulse, "margin": best.margin, "accepted": True})
    step = opts.step
    while step >= opts.min_step and evals < budget:
        improved = False
        for name in COORDS:
            for sign in (1.0, -1.0):
                if evals >= budget:
                    break
                values = best_p.as_dict()
                values[name] = values[name] * (1.0 + sign * step)
                cand = _try_profile(values)
                if cand is None:
                    continue
                res = score(cand)
                accept = _objective(res) > _objective(best)
                record({"restart": restart, "eval": evals, "profile": cand.as_dict(), "r_per_pulse": res.r_per_pulse, "margin": res.margin, "accepted": accept})
                if accept:
                    best_p, best, improved = cand, res, True
                    break
        if not improved:
            step /= 2.0
    return best_p, best, evals


def optimize_profile(
    channel: ChannelParams,
    seed_profile: IntensityProfile,
    options: Optional[OptimizerOptions] = None,
    on_eval: Optional[Callable[[Dict], None]] = None,
) -> OptimizationResult:
    """Locally maximize the double-scan key rate starting from ``seed_profile``.

    Each coordinate is perturbed by a relative ``+-step``; an improvement is
    accepted at once, and the step halves after a sweep without one. Profiles
    are ranked by rate, then by the unclamped rate margin so that the search
    can leave regions where the rate is zero. Restarts
    begin from seeded random perturbations of the seed profile and only
    replace the incumbent if strictly better. If no candidate has a positive
    rate the seed is returned with ``zero_rate`` set. Every evaluated
    candidate is passed to ``on_eval`` and kept in the returned trace.
    """
    opts = options or OptimizerOptions()
    trace: List[Dict] = []

    def record(entry: Dict) -> None:
        trace.append(entry)
        if on_eval is not None:
            on_eval(entry)

    best_p, best, used = _descend(channel, seed_profile, opts, opts.max_evals, record, 0)
    rng = np.random.default_rng(opts.rng_seed)
    for k in range(1, opts.restarts + 1):
        # draws happen even when rejected so the stream stays aligned across runs
        jitter = rng.uniform(-opts.restart_spread, opts.restart_spread, size=len(COORDS))
        remaining = opts.max_evals * (k + 1) - used
        values = {c: float(v * (1.0 + j)) for (c, v), j in zip(seed_profile.as_dict().items(), jitter)}
        start = _try_profile(values)
        if start is None or remaining <= 0:
            continue
        p, res, n = _descend(channel, start, opts, remaining, record, k)
        used += n
        if _objective(res) > _objective(best):
            best_p, best = p, res
    zero_rate = not best.r_per_pulse > 0
    if zero_rate:
        # no profile with a key was found: hand back the seed unchanged
        best_p = seed_profile
        best = evaluate(seed_profile, channel, grid=opts.grid, refine=opts.refine).result
    return OptimizationResult(profile=best_p, result=best, zero_rate=zero_rate, n_evals=used, trace=trace)
