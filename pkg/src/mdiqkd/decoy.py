"""Double-scanning decoy-state estimation.

The vacuum-related count rate ``H`` and the (omega, omega) error count rate
``M`` are treated as scan coordinates. For every fixed ``(H, M)`` the
single-photon-pair yield bound is the minimum of a linear program over the
remaining expected rates, each confined to its Chernoff interval and tied
together by the ``H`` definition and by ``Mbar + M`` reproducing the total
(omega, omega) gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from .core import DomainError, ExpectedRateInterval, IntensityProfile, TallySet
from .lp import LinearProgram, LPInfeasible, get_solver
from .stats import SecurityBudget, chernoff_interval, exact_interval

# observable name -> (intensity pair, which count)
OBSERVABLES: Dict[str, Tuple[Tuple[str, str], str]] = {
    "mbar": (("omega", "omega"), "correct"),
    "q_ww": (("omega", "omega"), "coinc"),
    "m": (("omega", "omega"), "err"),
    "q_on": (("o", "nu"), "coinc"),
    "q_no": (("nu", "o"), "coinc"),
    "q_nn": (("nu", "nu"), "coinc"),
    "q_oo": (("o", "o"), "coinc"),
    "q_ow": (("o", "omega"), "coinc"),
    "q_wo": (("omega", "o"), "coinc"),
}

LP_VARS = ("mbar", "q_on", "q_no", "q_nn", "q_oo", "q_ow", "q_wo")


@dataclass(frozen=True)
class DecoyCoefficients:
    """Poisson weights entering the two-decoy yield and error bounds."""

    p0_nu: float
    p1_nu: float
    p2_nu: float
    p0_w: float
    p1_w: float
    p2_w: float

    @classmethod
    def from_profile(cls, profile: IntensityProfile) -> "DecoyCoefficients":
        return cls(*(profile.pn(l, k) for l in ("nu", "omega") for k in (0, 1, 2)))

    @property
    def denominator(self) -> float:
        den = self.p1_w * self.p1_nu * (self.p1_w * self.p2_nu - self.p1_nu * self.p2_w)
        if not den > 0:
            raise DomainError("yield-bound denominator must be positive (requires nu > omega)")
        return den

    @property
    def a(self) -> float:
        """Weight of the omega-side terms."""
        return self.p1_nu * self.p2_nu

    @property
    def g(self) -> float:
        """Weight of the nu-side terms."""
        return self.p1_w * self.p2_w


@dataclass(frozen=True)
class ScanRectangle:
    h_low: float
    h_high: float
    m_low: float
    m_high: float
    intervals: Mapping[str, ExpectedRateInterval]
    p0_w: float
    n_chernoff: int = 0

    def __post_init__(self) -> None:
        if self.h_low > self.h_high or self.m_low > self.m_high:
            raise DomainError("scan rectangle bounds are inverted")

    @property
    def degenerate(self) -> bool:
        return self.h_low == self.h_high and self.m_low == self.m_high

    def contains(self, h: float, m: float) -> bool:
        return self.h_low <= h <= self.h_high and self.m_low <= m <= self.m_high

    def as_dict(self) -> Dict[str, Any]:
        return {
            "h_low": self.h_low,
            "h_high": self.h_high,
            "m_low": self.m_low,
            "m_high": self.m_high,
            "n_chernoff": self.n_chernoff,
            "intervals": {
                k: {"observed": v.observed_rate, "lower": v.lower, "upper": v.upper}
                for k, v in self.intervals.items()
            },
        }


@dataclass(frozen=True)
class DecoyBounds:
    y11_xx_lower: float
    e11_xx_upper: float
    y11_zz_lower: float
    e11_ph_upper: float
    lp_diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "y11_xx_lower": self.y11_xx_lower,
            "e11_xx_upper": self.e11_xx_upper,
            "y11_zz_lower": self.y11_zz_lower,
            "e11_ph_upper": self.e11_ph_upper,
            "lp_diagnostics": dict(self.lp_diagnostics),
        }


def _observed(tallies: TallySet, pair: Tuple[str, str], which: str) -> Tuple[float, int]:
    if pair not in tallies:
        raise DomainError(f"tallies are missing intensity pair {pair[0]},{pair[1]}")
    t = tallies[pair]
    if t.n_pairs < 1:
        raise DomainError(f"intensity pair {pair[0]},{pair[1]} has no emitted pairs")
    count = {"coinc": t.n_coinc, "err": t.n_err, "correct": t.n_coinc - t.n_err}[which]
    return count / t.n_pairs, t.n_pairs


def observable_intervals(
    tallies: TallySet, budget: Optional[SecurityBudget], exact: bool = False
) -> Dict[str, ExpectedRateInterval]:
    out = {}
    for name, (pair, which) in OBSERVABLES.items():
        rate, n = _observed(tallies, pair, which)
        out[name] = exact_interval(rate) if exact else chernoff_interval(rate, n, budget)
    return out


def rectangle_from_intervals(
    iv: Mapping[str, ExpectedRateInterval], profile: IntensityProfile, n_chernoff: int = 0
) -> ScanRectangle:
    p0w = profile.pn("omega", 0)
    h_low = p0w * iv["q_ow"].lower + p0w * iv["q_wo"].lower - p0w**2 * iv["q_oo"].upper
    h_high = p0w * iv["q_ow"].upper + p0w * iv["q_wo"].upper - p0w**2 * iv["q_oo"].lower
    return ScanRectangle(
        h_low=h_low,
        h_high=h_high,
        m_low=iv["m"].lower,
        m_high=iv["m"].upper,
        intervals=dict(iv),
        p0_w=p0w,
        n_chernoff=n_chernoff,
    )


def build_scan_rectangle(
    tallies: TallySet, profile: IntensityProfile, budget: Optional[SecurityBudget], exact: bool = False
) -> ScanRectangle:
    """Chernoff intervals for every observable and the induced ``(H, M)`` rectangle.

    ``exact=True`` uses zero-width intervals at the observed rates (the
    infinite-data limit) and spends no failure probability.
    """
    iv = observable_intervals(tallies, budget, exact=exact)
    return rectangle_from_intervals(iv, profile, n_chernoff=0 if exact else len(iv))


def yield_program(
    rect: ScanRectangle, h: Any, m: Any, profile: IntensityProfile
) -> LinearProgram:
    """The yield-bound LP at scan point(s) ``(h, m)``; arrays give a batch."""
    co = DecoyCoefficients.from_profile(profile)
    den = co.denominator
    iv = rect.intervals
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    p0n, p0w = co.p0_nu, co.p0_w
    c = np.array([co.a, co.g * p0n, co.g * p0n, -co.g, -co.g * p0n**2, 0.0, 0.0]) / den
    lb = np.array([iv[k].lower for k in LP_VARS])
    ub = np.array([iv[k].upper for k in LP_VARS])
    A_eq = np.array([[0.0, 0.0, 0.0, 0.0, -(p0w**2), p0w, p0w]])
    A_rng = np.array([[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]])
    return LinearProgram(
        c=c,
        lb=lb,
        ub=ub,
        A_eq=A_eq,
        b_eq=h[..., None],
        A_rng=A_rng,
        lo=(iv["q_ww"].lower - m)[..., None],
        hi=(iv["q_ww"].upper - m)[..., None],
        c0=co.a * (m - h) / den,
        names=LP_VARS,
        eq_names=("H-tie",),
        rng_names=("omega-gain-split",),
    )


def y11_lower_lp(
    rect: ScanRectangle, h: Any, m: Any, profile: IntensityProfile, solver=None
) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Single-photon-pair yield lower bound at ``(h, m)``, clamped to [0, 1].

    Returns the bound and LP diagnostics (objective value, minimizing vertex,
    active constraints; the last two only for scalar ``h``/``m``).
    """
    lp = yield_program(rect, h, m, profile)
    solver = solver or get_solver()
    sol = solver.solve(lp)
    diag: Dict[str, Any] = {"objective": np.asarray(sol.value).tolist()}
    if not lp.batch_shape:
        diag["vertex"] = dict(zip(LP_VARS, np.asarray(sol.x).tolist()))
        diag["active"] = list(sol.active)
    return np.clip(sol.value, 0.0, 1.0), diag


def e11_upper(
    h: Any, m: Any, y11_lower: Any, profile: IntensityProfile, clamp: bool = True
) -> np.ndarray:
    """Phase-error bound ``(m - h/2) / ((p1^omega)^2 * y11)``.

    A zero yield bound gives 0.5 (no extractable key) instead of dividing.
    """
    p1w = profile.pn("omega", 1)
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    y = np.asarray(y11_lower, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(y > 0, (m - h / 2.0) / (p1w**2 * np.where(y > 0, y, 1.0)), 0.5)
    if clamp:
        e = np.clip(e, 0.0, 0.5)
    return e


def promote_to_z(y11_xx: float, e11_xx: float, diagnostics: Optional[Mapping[str, Any]] = None) -> DecoyBounds:
    """Signal-basis bounds equal the decoy-basis ones."""
    return DecoyBounds(
        y11_xx_lower=y11_xx,
        e11_xx_upper=e11_xx,
        y11_zz_lower=y11_xx,
        e11_ph_upper=e11_xx,
        lp_diagnostics=dict(diagnostics or {}),
    )


def decoy_bounds_at(
    rect: ScanRectangle, h: float, m: float, profile: IntensityProfile, solver=None
) -> DecoyBounds:
    y, diag = y11_lower_lp(rect, h, m, profile, solver)
    e = e11_upper(h, m, y, profile)
    return promote_to_z(float(y), float(e), diag)


def expected_rates(observables: Any) -> Dict[str, float]:
    """Model expected rates keyed like ``OBSERVABLES`` (``observables[pair]`` gives gains)."""
    out = {}
    for name, (pair, which) in OBSERVABLES.items():
        ob = observables[pair]
        out[name] = {"coinc": ob.q_gain, "err": ob.eq_err, "correct": ob.q_gain - ob.eq_err}[which]
    return out


def true_scan_point(expected: Mapping[str, float], profile: IntensityProfile) -> Tuple[float, float]:
    """``(H, M)`` from exact expected rates keyed like ``OBSERVABLES``."""
    p0w = profile.pn("omega", 0)
    h = p0w * expected["q_ow"] + p0w * expected["q_wo"] - p0w**2 * expected["q_oo"]
    return h, expected["m"]


__all__ = [
    "DecoyBounds",
    "DecoyCoefficients",
    "LPInfeasible",
    "ScanRectangle",
    "build_scan_rectangle",
    "decoy_bounds_at",
    "e11_upper",
    "expected_rates",
    "promote_to_z",
    "true_scan_point",
    "y11_lower_lp",
    "yield_program",
]
