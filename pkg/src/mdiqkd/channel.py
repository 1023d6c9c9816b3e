"""Threshold-detector model of a time-bin |psi-> Bell-state measurement.

Charlie's beam splitter maps Alice's input port to ``(c + d)/sqrt(2)`` and
Bob's to ``(c - d)/sqrt(2)``. Each of the two detectors is read out in an
early and a late time bin, giving four click channels ordered
``(c,early), (c,late), (d,early), (d,late)``. An effective event is exactly
two clicks, one per time bin, in different detectors.

Two independent routes evaluate the same optics:

* gains for phase-randomized coherent inputs, averaged in closed form over
  the relative phase (modified Bessel ``I0``);
* yields for Fock inputs ``|n>|m>``, from a combinatorial no-click formula.

Dark counts are independent per channel and factored out of both routes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import special

from .core import (
    PAIRS,
    ChannelParams,
    DomainError,
    IntensityProfile,
    PairTally,
    TallySet,
    basis_label,
    pair_key,
)

N_CHANNELS = 4
FULL = (1 << N_CHANNELS) - 1
# (c,early)+(d,late) and (c,late)+(d,early)
PSI_MINUS_PATTERNS = (0b1001, 0b0110)

_RESOLUTION = 64 * np.finfo(float).eps

_BASIS_OF = {"mu": "Z", "nu": "X", "omega": "X", "o": "Z"}


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _subsets(mask: int):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def mode_vector(side: str, basis: str, bit: int) -> np.ndarray:
    """Amplitudes of one encoded photon on the four click channels."""
    if basis == "Z":
        t = np.array([1.0, 0.0]) if bit == 0 else np.array([0.0, 1.0])
    elif basis == "X":
        t = np.array([1.0, 1.0 if bit == 0 else -1.0]) / math.sqrt(2.0)
    else:
        raise DomainError(f"unknown basis {basis!r}")
    sign = 1.0 if side == "a" else -1.0
    return np.concatenate([t, sign * t]) / math.sqrt(2.0)


def _mask_vector(mask: int) -> np.ndarray:
    return np.array([(mask >> k) & 1 for k in range(N_CHANNELS)], dtype=bool)


def _occupation_to_pattern(no_photon: Mapping[int, float], pattern: int, y0: float) -> float:
    """Probability that exactly the channels in ``pattern`` click.

    ``no_photon[S]`` is the probability that no photon reaches any channel
    in ``S``. Photon occupation is resolved first, then dark counts fill the
    remaining channels of the pattern.
    """
    total = 0.0
    for occupied in _subsets(pattern):
        outside = FULL & ~occupied
        # photons exactly on `occupied`
        exact = 0.0
        scale = 0.0
        for u in _subsets(occupied):
            sign = -1.0 if _popcount(u) % 2 else 1.0
            exact = exact + sign * no_photon[outside | u]
            scale = np.maximum(scale, np.abs(no_photon[outside | u]))
        # anything below the cancellation noise of the alternating sum is zero
        exact = np.where(np.abs(exact) <= _RESOLUTION * scale, 0.0, exact)
        dark_needed = _popcount(pattern & ~occupied)
        total += exact * y0**dark_needed
    return total * (1.0 - y0) ** (N_CHANNELS - _popcount(pattern))


@lru_cache(maxsize=None)
def subset_geometry(basis_a: str, basis_b: str, bit_a: int, bit_b: int) -> Tuple[np.ndarray, ...]:
    """Per channel subset: weight of each input mode inside it and their overlaps.

    Returns ``(weight_a, weight_b, overlap_in, overlap_out)`` indexed by the
    subset bitmask; overlaps are moduli of the inner product restricted to
    the subset and to its complement.
    """
    ua = mode_vector("a", basis_a, bit_a)
    ub = mode_vector("b", basis_b, bit_b)
    wa, wb, ov_in, ov_out = (np.zeros(FULL + 1) for _ in range(4))
    for s in range(FULL + 1):
        sel = _mask_vector(s)
        wa[s] = np.sum(np.abs(ua[sel]) ** 2)
        wb[s] = np.sum(np.abs(ub[sel]) ** 2)
        ov_in[s] = abs(complex(np.vdot(ua[sel], ub[sel])))
        ov_out[s] = abs(complex(np.vdot(ua[~sel], ub[~sel])))
    for arr in (wa, wb, ov_in, ov_out):
        arr.setflags(write=False)
    return wa, wb, ov_in, ov_out


def coherent_no_photon(geometry: Tuple[np.ndarray, ...], xa: float, xb: float) -> np.ndarray:
    """No-photon probability on every channel subset for phase-randomized coherent inputs.

    ``xa``/``xb`` are the mean photon numbers arriving at the beam splitter;
    the relative phase average of the interference term yields ``I0``.
    """
    wa, wb, ov_in, _ = geometry
    return np.exp(-xa * wa - xb * wb) * special.i0(2.0 * math.sqrt(xa * xb) * ov_in)


def fock_no_photon(
    geometry: Tuple[np.ndarray, ...], eta_a: float, eta_b: float, cutoff: int
) -> np.ndarray:
    """No-photon probabilities for Fock inputs ``|n>_A |m>_B``, ``n, m <= cutoff``.

    Result is indexed ``[subset, n, m]``. For a subset ``S`` all photons must
    leave through the complement (loss modes included), which gives
    ``sum_i C(n,i) C(m,i) a^(n-i) b^(m-i) |g|^(2i)`` with ``a``/``b`` the
    complement weights of the two input modes and ``g`` their overlap there.
    """
    wa, wb, _, ov_out = geometry
    nmax = cutoff + 1
    k = np.arange(nmax)
    comb = np.array([[math.comb(n, i) for i in range(nmax)] for n in range(nmax)], dtype=float)
    a = 1.0 - eta_a * wa  # (16,)
    b = 1.0 - eta_b * wb
    g2 = eta_a * eta_b * ov_out**2
    out = np.zeros((FULL + 1, nmax, nmax))
    for i in range(nmax):
        e = np.clip(k - i, 0, None)
        pa = np.where(k >= i, a[:, None] ** e, 0.0) * comb[:, i]  # (16, nmax)
        pb = np.where(k >= i, b[:, None] ** e, 0.0) * comb[:, i]
        out += pa[:, :, None] * pb[:, None, :] * (g2**i)[:, None, None]
    return out


@dataclass(frozen=True)
class PairObservable:
    q_gain: float
    eq_err: float
    basis: str

    @property
    def qber(self) -> float:
        return self.eq_err / self.q_gain if self.q_gain > 0 else 0.0


@dataclass(frozen=True)
class ChannelObservables:
    """Model-side gains for all 16 intensity pairs plus single-photon-pair truth."""

    pairs: Mapping[Tuple[str, str], PairObservable]
    y11_true: float
    e11_true: float
    y11_true_z: float

    def __getitem__(self, pair: Tuple[str, str]) -> PairObservable:
        return self.pairs[pair]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "basis", "q_gain", "eq_err"])
        for pair in PAIRS:
            ob = self.pairs[pair]
            w.writerow([pair_key(pair), ob.basis, repr(ob.q_gain), repr(ob.eq_err)])
        return buf.getvalue()


def _misaligned(wrong: float, right: float, ed: float) -> float:
    return (1.0 - ed) * wrong + ed * right


def _bases(pair: Tuple[str, str]) -> Tuple[str, str]:
    return _BASIS_OF[pair[0]], _BASIS_OF[pair[1]]


def _pair_misalignment(pair: Tuple[str, str], channel: ChannelParams) -> Optional[float]:
    label = basis_label(pair)
    if label == "ZZ":
        return channel.ed_z
    if label == "XX":
        return channel.ed_x
    return None


def pair_gain(
    basis_a: str, basis_b: str, xa: float, xb: float, y0: float
) -> Tuple[float, float]:
    """Bit-averaged |psi-> gain split into (wrong, right) parts for coherent inputs.

    A |psi-> event is correct when Alice's and Bob's bits differ.
    """
    wrong = right = 0.0
    for bit_a, bit_b in product((0, 1), repeat=2):
        nop = coherent_no_photon(subset_geometry(basis_a, basis_b, bit_a, bit_b), xa, xb)
        p = sum(_occupation_to_pattern(nop, c, y0) for c in PSI_MINUS_PATTERNS)
        if bit_a == bit_b:
            wrong += p / 4.0
        else:
            right += p / 4.0
    return wrong, right


def photon_yields(
    basis_a: str, basis_b: str, eta_a: float, eta_b: float, y0: float, cutoff: int = 12
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-photon-number (wrong, right) |psi-> yields, arrays indexed ``[n, m]``."""
    nmax = cutoff + 1
    wrong = np.zeros((nmax, nmax))
    right = np.zeros((nmax, nmax))
    for bit_a, bit_b in product((0, 1), repeat=2):
        nop = fock_no_photon(subset_geometry(basis_a, basis_b, bit_a, bit_b), eta_a, eta_b, cutoff)
        y = np.zeros((nmax, nmax))
        for pattern in PSI_MINUS_PATTERNS:
            y += _occupation_to_pattern(nop, pattern, y0)
        if bit_a == bit_b:
            wrong += y / 4.0
        else:
            right += y / 4.0
    return wrong, right


def model_observables(profile: IntensityProfile, channel: ChannelParams) -> ChannelObservables:
    eta_a, eta_b = channel.arm_efficiencies()
    pairs = {}
    for pair in PAIRS:
        ba, bb = _bases(pair)
        xa = eta_a * profile.intensity(pair[0])
        xb = eta_b * profile.intensity(pair[1])
        wrong, right = pair_gain(ba, bb, xa, xb, channel.y0)
        q = wrong + right
        ed = _pair_misalignment(pair, channel)
        if ed is None:
            # no shared key bit: errors are coin flips
            eq = q / 2.0
        else:
            eq = _misaligned(wrong, right, ed)
        pairs[pair] = PairObservable(q_gain=float(q), eq_err=float(min(eq, q)), basis=basis_label(pair))

    wx, rx = photon_yields("X", "X", eta_a, eta_b, channel.y0, cutoff=1)
    y11 = wx[1, 1] + rx[1, 1]
    e11 = _misaligned(wx[1, 1], rx[1, 1], channel.ed_x) / y11 if y11 > 0 else 0.5
    wz, rz = photon_yields("Z", "Z", eta_a, eta_b, channel.y0, cutoff=1)
    return ChannelObservables(
        pairs=pairs, y11_true=float(y11), e11_true=float(e11), y11_true_z=float(wz[1, 1] + rz[1, 1])
    )


def photon_expansion_gain(
    pair: Tuple[str, str], profile: IntensityProfile, channel: ChannelParams, cutoff: int = 12
) -> float:
    """Gain of ``pair`` rebuilt as ``sum_{n,m} p_n^l p_m^r Y_nm`` up to ``cutoff``."""
    eta_a, eta_b = channel.arm_efficiencies()
    ba, bb = _bases(pair)
    wrong, right = photon_yields(ba, bb, eta_a, eta_b, channel.y0, cutoff)
    pa = np.array([profile.pn(pair[0], n) for n in range(cutoff + 1)])
    pb = np.array([profile.pn(pair[1], m) for m in range(cutoff + 1)])
    return float(pa @ (wrong + right) @ pb)


def _n_pairs(profile: IntensityProfile, channel: ChannelParams, pair: Tuple[str, str]) -> int:
    return int(round(channel.n_total * profile.probability(pair[0]) * profile.probability(pair[1])))


def sample_tallies(
    obs: ChannelObservables,
    profile: IntensityProfile,
    channel: ChannelParams,
    mode: str = "expected",
    seed: Optional[int] = None,
) -> TallySet:
    """Turn model gains into counts.

    ``expected`` rounds ``n_pairs * rate``; ``binomial`` draws coincidences and
    then errors among them from a generator seeded with ``seed``. Pairs are
    drawn in a fixed order so a seed fully determines the result.
    """
    if mode not in ("expected", "binomial"):
        raise DomainError(f"mode must be 'expected' or 'binomial', got {mode!r}")
    rng = None
    if mode == "binomial":
        if seed is None:
            raise DomainError("binomial mode needs a seed")
        rng = np.random.default_rng(seed)
    tallies = {}
    for pair in PAIRS:
        n = _n_pairs(profile, channel, pair)
        ob = obs[pair]
        if mode == "expected":
            nc = int(round(n * ob.q_gain))
            ne = min(int(round(n * ob.eq_err)), nc)
        else:
            nc = int(rng.binomial(n, ob.q_gain)) if n > 0 else 0
            pe = ob.eq_err / ob.q_gain if ob.q_gain > 0 else 0.0
            ne = int(rng.binomial(nc, min(pe, 1.0))) if nc > 0 else 0
        tallies[pair] = PairTally(n, nc, ne)
    return TallySet(tallies)
