"""End-to-end evaluation: simulate, tally, bound, scan."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .baseline import baseline_key_rate
from .channel import ChannelObservables, model_observables, sample_tallies
from .core import ChannelParams, IntensityProfile, TallySet
from .decoy import ScanRectangle, build_scan_rectangle
from .scan import KeyRateResult, scan_minimum
from .stats import SecurityBudget


@dataclass(frozen=True)
class Evaluation:
    observables: ChannelObservables
    tallies: TallySet
    rectangle: ScanRectangle
    result: KeyRateResult


def evaluate(
    profile: IntensityProfile,
    channel: ChannelParams,
    mode: str = "expected",
    seed: Optional[int] = None,
    grid: Tuple[int, int] = (16, 16),
    refine: bool = True,
    exact: bool = False,
    keep_surface: bool = False,
    solver=None,
) -> Evaluation:
    obs = model_observables(profile, channel)
    tallies = sample_tallies(obs, profile, channel, mode=mode, seed=seed)
    budget = SecurityBudget(channel.epsilon)
    rect = build_scan_rectangle(tallies, profile, budget, exact=exact)
    result = scan_minimum(
        rect,
        tallies,
        profile,
        grid=grid,
        f_ec=channel.f_ec,
        rep_rate_hz=channel.rep_rate_hz,
        epsilon=channel.epsilon,
        refine=refine,
        keep_surface=keep_surface,
        solver=solver,
    )
    return Evaluation(obs, tallies, rect, result)


def evaluate_baseline(
    profile: IntensityProfile,
    channel: ChannelParams,
    mode: str = "expected",
    seed: Optional[int] = None,
    exact: bool = False,
) -> KeyRateResult:
    obs = model_observables(profile, channel)
    tallies = sample_tallies(obs, profile, channel, mode=mode, seed=seed)
    return baseline_key_rate(tallies, profile, channel, exact=exact)
