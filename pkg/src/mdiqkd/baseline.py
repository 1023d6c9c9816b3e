"""Non-scanning four-intensity analysis.

Every expected rate in the two-decoy yield and error bounds is worst-cased on
its own Chernoff interval, with no variable shared across terms. This is the
comparator the double scan improves on; it does not reproduce any further
refinements of published four-intensity analyses.
"""

from __future__ import annotations

from typing import Mapping

from .core import ChannelParams, IntensityProfile, TallySet
from .decoy import DecoyBounds, DecoyCoefficients, ScanRectangle, build_scan_rectangle, promote_to_z
from .scan import KeyRateResult, rate_formula, signal_observed
from .stats import SecurityBudget


def closed_form_yield(q: Mapping[str, float], profile: IntensityProfile) -> float:
    """Two-decoy yield lower bound evaluated on given expected rates (unclamped).

    ``q`` needs ``q_ww, q_on, q_no, q_nn, q_oo, q_ow, q_wo``; ``q_oo`` may be
    split into ``q_oo_nu`` and ``q_oo_w`` for its two occurrences.
    """
    co = DecoyCoefficients.from_profile(profile)
    q_oo_nu = q.get("q_oo_nu", q.get("q_oo"))
    q_oo_w = q.get("q_oo_w", q.get("q_oo"))
    num = (
        co.a * q["q_ww"]
        + co.g * co.p0_nu * q["q_on"]
        + co.g * co.p0_nu * q["q_no"]
        - co.g * q["q_nn"]
        - co.g * co.p0_nu**2 * q_oo_nu
        - co.a * (co.p0_w * q["q_ow"] + co.p0_w * q["q_wo"] - co.p0_w**2 * q_oo_w)
    )
    return num / co.denominator


def closed_form_error(qe: Mapping[str, float], y11: float, profile: IntensityProfile) -> float:
    """Two-decoy bit-error upper bound on given error-weighted rates (unclamped)."""
    p0w = profile.pn("omega", 0)
    p1w = profile.pn("omega", 1)
    num = qe["m"] - (p0w * qe["qe_ow"] + p0w * qe["qe_wo"] - p0w**2 * qe["qe_oo"])
    return num / (p1w**2 * y11)


def worst_case_bounds(rect: ScanRectangle, profile: IntensityProfile) -> DecoyBounds:
    iv = rect.intervals
    y_terms = {
        "q_ww": iv["q_ww"].lower,
        "q_on": iv["q_on"].lower,
        "q_no": iv["q_no"].lower,
        "q_nn": iv["q_nn"].upper,
        "q_oo_nu": iv["q_oo"].upper,
        "q_ow": iv["q_ow"].upper,
        "q_wo": iv["q_wo"].upper,
        "q_oo_w": iv["q_oo"].lower,
    }
    y11 = min(max(closed_form_yield(y_terms, profile), 0.0), 1.0)
    if y11 <= 0:
        return promote_to_z(0.0, 0.5, {"y11_unclamped": closed_form_yield(y_terms, profile)})
    # vacuum-involving error rates are half the corresponding gains
    e_terms = {
        "m": iv["m"].upper,
        "qe_ow": iv["q_ow"].lower / 2.0,
        "qe_wo": iv["q_wo"].lower / 2.0,
        "qe_oo": iv["q_oo"].upper / 2.0,
    }
    e11 = min(max(closed_form_error(e_terms, y11, profile), 0.0), 0.5)
    return promote_to_z(y11, e11, {"worst_case_rates": y_terms})


def baseline_bounds(tallies: TallySet, profile: IntensityProfile, budget: SecurityBudget) -> DecoyBounds:
    return worst_case_bounds(build_scan_rectangle(tallies, profile, budget), profile)


def baseline_key_rate(
    tallies: TallySet, profile: IntensityProfile, channel: ChannelParams, exact: bool = False
) -> KeyRateResult:
    budget = SecurityBudget(channel.epsilon)
    rect = build_scan_rectangle(tallies, profile, budget, exact=exact)
    bounds = worst_case_bounds(rect, profile)
    q, e = signal_observed(tallies)
    r = float(rate_formula(bounds.y11_zz_lower, bounds.e11_ph_upper, q, e, profile, channel.f_ec))
    return KeyRateResult(
        r_per_pulse=r,
        r_bps=r * channel.rep_rate_hz,
        argmin=(rect.h_high, rect.m_high),
        bounds=bounds,
        composed_failure=min(1.0, rect.n_chernoff * channel.epsilon),
        q_signal=q,
        e_signal=e,
        method="baseline",
    )
