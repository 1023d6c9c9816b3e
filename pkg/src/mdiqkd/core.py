"""Domain types and elementary functions shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Tuple

INTENSITIES: Tuple[str, ...] = ("mu", "nu", "omega", "o")
PAIRS: Tuple[Tuple[str, str], ...] = tuple((l, r) for l in INTENSITIES for r in INTENSITIES)
DECOYS = ("nu", "omega")


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


def pair_key(pair: Tuple[str, str]) -> str:
    return f"{pair[0]},{pair[1]}"


def basis_label(pair: Tuple[str, str]) -> str:
    """Basis tag of an intensity pair: ZZ, XX, ZX, XZ, or '' for vacuum pairs."""
    l, r = pair
    if l == "o" or r == "o":
        return ""
    tag = {"mu": "Z", "nu": "X", "omega": "X"}
    return tag[l] + tag[r]


def poisson_pmf(lam: float, n: int) -> float:
    """Probability of ``n`` photons from a phase-randomized source of mean ``lam``."""
    if lam < 0 or n < 0 or int(n) != n:
        raise DomainError(f"poisson_pmf needs lam >= 0 and integer n >= 0, got ({lam}, {n})")
    n = int(n)
    if lam == 0:
        return 1.0 if n == 0 else 0.0
    if n <= 20:
        return lam**n * math.exp(-lam) / math.factorial(n)
    return math.exp(n * math.log(lam) - lam - math.lgamma(n + 1))


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary_entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class IntensityProfile:
    """Source intensities and selection probabilities shared by Alice and Bob.

    The vacuum probability ``p_o`` is derived from the other three so the four
    always sum to one.
    """

    mu: float
    nu: float
    omega: float
    p_mu: float
    p_nu: float
    p_omega: float

    def __post_init__(self) -> None:
        for name in ("mu", "nu", "omega", "p_mu", "p_nu", "p_omega"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite number, got {v!r}")
        if not self.omega > 0:
            raise DomainError(f"omega must be > 0, got {self.omega}")
        if not self.nu > self.omega:
            raise DomainError(f"nu must exceed omega, got nu={self.nu}, omega={self.omega}")
        if not self.mu > self.nu:
            raise DomainError(f"mu must exceed nu, got mu={self.mu}, nu={self.nu}")
        for name in ("p_mu", "p_nu", "p_omega"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")
        if not self.p_mu + self.p_nu + self.p_omega < 1.0:
            raise DomainError("p_mu + p_nu + p_omega must be < 1 (vacuum needs nonzero weight)")

    @property
    def p_o(self) -> float:
        return 1.0 - self.p_mu - self.p_nu - self.p_omega

    def intensity(self, label: str) -> float:
        return {"mu": self.mu, "nu": self.nu, "omega": self.omega, "o": 0.0}[label]

    def probability(self, label: str) -> float:
        return {"mu": self.p_mu, "nu": self.p_nu, "omega": self.p_omega, "o": self.p_o}[label]

    def pn(self, label: str, n: int) -> float:
        """Poisson weight of ``n`` photons for the intensity named ``label``."""
        return poisson_pmf(self.intensity(label), n)

    def as_dict(self) -> Dict[str, float]:
        return {
            "mu": self.mu,
            "nu": self.nu,
            "omega": self.omega,
            "p_mu": self.p_mu,
            "p_nu": self.p_nu,
            "p_omega": self.p_omega,
        }

    def replace(self, **changes: float) -> "IntensityProfile":
        d = self.as_dict()
        d.update(changes)
        return IntensityProfile(**d)


@dataclass(frozen=True)
class ChannelParams:
    """Fiber, detector and finite-size constants of one link configuration.

    ``y0`` is the dark-count probability of one detector in one time-bin
    window. ``split_ratio`` is the fraction of ``distance_km`` on Alice's
    side of the relay; 0.5 places Charlie at the midpoint.
    """

    alpha: float = 0.18
    eta_d: float = 0.60
    y0: float = 4e-8
    ed_z: float = 0.001
    ed_x: float = 0.01
    f_ec: float = 1.16
    epsilon: float = 1e-10
    distance_km: float = 120.0
    rep_rate_hz: float = 5e7
    n_total: float = 1e10
    split_ratio: float = 0.5

    def __post_init__(self) -> None:
        checks = [
            (self.alpha > 0, "alpha must be > 0"),
            (0 < self.eta_d <= 1, "eta_d must lie in (0, 1]"),
            (0 <= self.y0 < 1, "y0 must lie in [0, 1)"),
            (0 <= self.ed_z < 0.5, "ed_z must lie in [0, 0.5)"),
            (0 <= self.ed_x < 0.5, "ed_x must lie in [0, 0.5)"),
            (self.f_ec >= 1, "f_ec must be >= 1"),
            (0 < self.epsilon < 1, "epsilon must lie in (0, 1)"),
            (self.distance_km >= 0, "distance_km must be >= 0"),
            (self.rep_rate_hz > 0, "rep_rate_hz must be > 0"),
            (self.n_total >= 1, "n_total must be >= 1"),
            (0 <= self.split_ratio <= 1, "split_ratio must lie in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise DomainError(msg)

    def arm_efficiencies(self) -> Tuple[float, float]:
        """Overall detection efficiency of Alice's and Bob's arm."""
        la = self.distance_km * self.split_ratio
        lb = self.distance_km - la
        ta = 10.0 ** (-self.alpha * la / 10.0)
        tb = 10.0 ** (-self.alpha * lb / 10.0)
        return self.eta_d * ta, self.eta_d * tb

    def replace(self, **changes) -> "ChannelParams":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return ChannelParams(**d)


@dataclass(frozen=True)
class PairTally:
    n_pairs: int
    n_coinc: int
    n_err: int

    def __post_init__(self) -> None:
        if not 0 <= self.n_err <= self.n_coinc <= self.n_pairs:
            raise DomainError(
                f"tally must satisfy 0 <= n_err <= n_coinc <= n_pairs, got {self}"
            )

    @property
    def gain(self) -> float:
        return self.n_coinc / self.n_pairs if self.n_pairs else 0.0

    @property
    def error_gain(self) -> float:
        return self.n_err / self.n_pairs if self.n_pairs else 0.0

    @property
    def correct_gain(self) -> float:
        return (self.n_coinc - self.n_err) / self.n_pairs if self.n_pairs else 0.0

    @property
    def qber(self) -> float:
        return self.n_err / self.n_coinc if self.n_coinc else 0.0


@dataclass(frozen=True)
class TallySet:
    """Counts per ordered intensity pair ``(l, r)``, Alice's setting first."""

    tallies: Mapping[Tuple[str, str], PairTally] = field(default_factory=dict)

    def __getitem__(self, pair: Tuple[str, str]) -> PairTally:
        try:
            return self.tallies[pair]
        except KeyError:
            raise KeyError(f"no tally for intensity pair {pair_key(pair)}") from None

    def __contains__(self, pair: object) -> bool:
        return pair in self.tallies

    def __iter__(self) -> Iterator[Tuple[str, str]]:
        return iter(self.tallies)

    def basis(self, pair: Tuple[str, str]) -> str:
        return basis_label(pair)

    @property
    def n_total(self) -> int:
        return sum(t.n_pairs for t in self.tallies.values())

    def scaled(self, k: int) -> "TallySet":
        """All counts multiplied by ``k``; observed rates are unchanged."""
        return TallySet(
            {p: PairTally(t.n_pairs * k, t.n_coinc * k, t.n_err * k) for p, t in self.tallies.items()}
        )

    def as_dict(self) -> Dict[str, Dict[str, int]]:
        return {
            pair_key(p): {"n_pairs": t.n_pairs, "n_coinc": t.n_coinc, "n_err": t.n_err}
            for p, t in self.tallies.items()
        }


@dataclass(frozen=True)
class ExpectedRateInterval:
    observed_rate: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower
