"""Key rate over the (H, M) scan rectangle and its minimum."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .core import IntensityProfile, TallySet
from .decoy import DecoyBounds, ScanRectangle, decoy_bounds_at, e11_upper, yield_program
from .lp import get_solver


def binary_entropy_array(x: Any) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x)
    return np.where((x == 0.0) | (x == 1.0), 0.0, h)


@dataclass(frozen=True)
class KeyRateResult:
    r_per_pulse: float
    r_bps: float
    argmin: Tuple[float, float]
    bounds: DecoyBounds
    composed_failure: float
    q_signal: float
    e_signal: float
    method: str = "double-scan"
    margin: float = float("nan")
    surface: Optional[Dict[str, np.ndarray]] = field(default=None, repr=False)

    @property
    def status(self) -> str:
        return "key" if self.r_per_pulse > 0 else "no key"

    def as_dict(self, with_surface: bool = False) -> Dict[str, Any]:
        d = {
            "method": self.method,
            "status": self.status,
            "r_per_pulse": self.r_per_pulse,
            "r_bps": self.r_bps,
            "argmin": {"h": self.argmin[0], "m": self.argmin[1]},
            "q_signal": self.q_signal,
            "e_signal": self.e_signal,
            "composed_failure": self.composed_failure,
            "margin": self.margin,
            "bounds": self.bounds.as_dict(),
        }
        if with_surface and self.surface is not None:
            d["surface"] = {k: np.asarray(v).tolist() for k, v in self.surface.items()}
        return d

    def surface_csv(self) -> str:
        """Rows ``h, m, R`` of every evaluated grid point."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "m", "r_per_pulse"])
        if self.surface is not None:
            for h, m, r in zip(self.surface["h"].ravel(), self.surface["m"].ravel(), self.surface["r"].ravel()):
                w.writerow([repr(float(h)), repr(float(m)), repr(float(r))])
        return buf.getvalue()


def signal_observed(tallies: TallySet) -> Tuple[float, float]:
    """Observed signal gain and QBER of the (mu, mu) pairs."""
    t = tallies[("mu", "mu")]
    return t.gain, t.qber


def rate_formula(
    y11: Any, e11: Any, q_signal: float, e_signal: float, profile: IntensityProfile, f_ec: float
) -> np.ndarray:
    """Key bits per pulse pair, clamped at zero."""
    p1mu = profile.pn("mu", 1)
    y11 = np.asarray(y11, dtype=float)
    e11 = np.asarray(e11, dtype=float)
    positive = p1mu**2 * y11 * (1.0 - binary_entropy_array(e11))
    leak = f_ec * q_signal * float(binary_entropy_array(e_signal))
    r = profile.p_mu**2 * (positive - leak)
    return np.where((y11 > 0) & (e11 < 0.5), np.maximum(r, 0.0), 0.0)


def rate_margin(
    y11_raw: Any, e11_raw: Any, q_signal: float, e_signal: float, profile: IntensityProfile, f_ec: float
) -> np.ndarray:
    """Unclamped rate per signal pair that keeps decreasing past the no-key boundary.

    Equals ``rate / p_mu**2`` wherever the rate is positive. Beyond ``e11 = 1/2`` the
    privacy term ``1 - h(e)`` is continued linearly as ``1 - 2e``, and a
    non-positive yield contributes itself directly.
    """
    p1mu = profile.pn("mu", 1)
    y = np.asarray(y11_raw, dtype=float)
    e = np.asarray(e11_raw, dtype=float)
    s = np.where(e <= 0.5, 1.0 - binary_entropy_array(np.maximum(e, 0.0)), 1.0 - 2.0 * e)
    priv = np.where(y > 0, y * s, y)
    leak = f_ec * q_signal * float(binary_entropy_array(e_signal))
    return p1mu**2 * priv - leak


def _rate_surface(h, m, rect, tallies, profile, f_ec, solver) -> Tuple[np.ndarray, np.ndarray]:
    sol = (solver or get_solver()).solve(yield_program(rect, h, m, profile))
    raw = np.asarray(sol.value, dtype=float)
    y11 = np.clip(raw, 0.0, 1.0)
    q, e = signal_observed(tallies)
    r = rate_formula(y11, e11_upper(h, m, y11, profile), q, e, profile, f_ec)
    margin = rate_margin(raw, e11_upper(h, m, y11, profile, clamp=False), q, e, profile, f_ec)
    return r, margin


def key_rate_at(
    h: Any,
    m: Any,
    rect: ScanRectangle,
    tallies: TallySet,
    profile: IntensityProfile,
    f_ec: float = 1.16,
    solver=None,
) -> np.ndarray:
    """Key rate per pulse at scan point(s) ``(h, m)``; arrays are evaluated as a batch."""
    return _rate_surface(h, m, rect, tallies, profile, f_ec, solver)[0]


def _worst(r: np.ndarray, g: np.ndarray) -> int:
    # lowest rate; among equal rates (typically all zero) the lowest margin
    return int(np.lexsort((g.ravel(), r.ravel()))[0])


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.array([lo]) if lo == hi else np.linspace(lo, hi, n)


def scan_minimum(
    rect: ScanRectangle,
    tallies: TallySet,
    profile: IntensityProfile,
    grid: Tuple[int, int] = (16, 16),
    f_ec: float = 1.16,
    rep_rate_hz: float = 5e7,
    epsilon: float = 0.0,
    refine: bool = True,
    keep_surface: bool = True,
    solver=None,
) -> KeyRateResult:
    """Minimum key rate over a uniform ``n_h x n_m`` grid spanning the rectangle.

    The grid includes all four corners. With ``refine`` the grid is evaluated
    once more at half spacing over the cells adjacent to the coarse argmin.
    """
    n_h, n_m = grid
    if n_h < 2 or n_m < 2:
        raise ValueError("scan grid needs at least 2 points per axis")
    hs = _axis(rect.h_low, rect.h_high, n_h)
    ms = _axis(rect.m_low, rect.m_high, n_m)
    H, M = np.meshgrid(hs, ms, indexing="ij")
    R, G = _rate_surface(H, M, rect, tallies, profile, f_ec, solver)
    margin = float(G.min())
    i, j = np.unravel_index(_worst(R, G), R.shape)
    pts_h, pts_m, pts_r = [H.ravel()], [M.ravel()], [R.ravel()]
    best = (float(R[i, j]), float(H[i, j]), float(M[i, j]))
    best_margin = float(G[i, j])

    if refine and not rect.degenerate:
        lh = np.linspace(hs[max(i - 1, 0)], hs[min(i + 1, len(hs) - 1)], 5) if len(hs) > 1 else hs
        lm = np.linspace(ms[max(j - 1, 0)], ms[min(j + 1, len(ms) - 1)], 5) if len(ms) > 1 else ms
        LH, LM = np.meshgrid(lh, lm, indexing="ij")
        LR, LG = _rate_surface(LH, LM, rect, tallies, profile, f_ec, solver)
        margin = min(margin, float(LG.min()))
        k = np.unravel_index(_worst(LR, LG), LR.shape)
        if (LR[k], LG[k]) < (best[0], best_margin):
            best = (float(LR[k]), float(LH[k]), float(LM[k]))
        pts_h.append(LH.ravel())
        pts_m.append(LM.ravel())
        pts_r.append(LR.ravel())

    r, h_star, m_star = best
    bounds = decoy_bounds_at(rect, h_star, m_star, profile, solver)
    q, e = signal_observed(tallies)
    surface = None
    if keep_surface:
        surface = {"h": np.concatenate(pts_h), "m": np.concatenate(pts_m), "r": np.concatenate(pts_r)}
    return KeyRateResult(
        r_per_pulse=r,
        r_bps=r * rep_rate_hz,
        argmin=(h_star, m_star),
        bounds=bounds,
        composed_failure=min(1.0, rect.n_chernoff * epsilon),
        q_signal=q,
        e_signal=e,
        method="double-scan",
        margin=margin,
        surface=surface,
    )
