"""Decision-dependent uncertainty of the flexible SoC bounds.

Each unit's available SoC range is random in two coupled ways: an incentive
price *expands* it from the identified range toward the physical range, and
accumulated response discomfort *contracts* it back toward the comfort range.
The contraction factor H is a nonnegative random variable whose mean grows
linearly with response discomfort, so the mean of every realized bound is an
affine function of the dispatch decision — which is what keeps the
chance-constrained program a linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .distributions import DistributionSpec
from .errors import InvalidSpec, NonTighteningCoefficient, OrderingViolation
from .ges import GesParams, UnitSchedule

H_FAMILIES = ("lognormal", "beta")
DISCOMFORT_VARIANTS = ("F1", "F2", "F3")

#: contraction means below this are treated as an exact zero contraction
MEAN_FLOOR = 1e-9

#: support cap for the beta-family contraction factor
BETA_CAP = 3.0


@dataclass
class DduSpec:
    """Parameters of the decision-dependent bound model."""

    sigma_g: float = 0.5  # spread of the price-driven expansion factor
    sigma_h: float = 0.1  # spread of the discomfort-driven contraction factor
    beta_up: float = 3.0  # discomfort aversion of the upper bound
    beta_lo: float = 6.0  # discomfort aversion of the lower bound
    lam: float = 0.7  # weight of response intensity vs SoC discomfort
    c_bar: float = 1.5  # price normalizer, currency/kWh
    q_g_level: float = 0.5  # quantile level at which the expansion anchor sits
    h_family: str = "lognormal"
    discomfort_variant: str = "F2"

    def __post_init__(self):
        if not (self.sigma_g > 0 and self.sigma_h > 0):
            raise InvalidSpec("sigma_g and sigma_h must be > 0")
        if not 0.0 <= self.beta_up <= self.beta_lo:
            raise NonTighteningCoefficient(
                f"need 0 <= beta_up <= beta_lo, got ({self.beta_up}, {self.beta_lo})"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidSpec(f"lambda weight must lie in [0, 1], got {self.lam}")
        if not self.c_bar > 0:
            raise InvalidSpec(f"c_bar must be > 0, got {self.c_bar}")
        if not 0.0 < self.q_g_level < 1.0:
            raise InvalidSpec(f"q_g_level must lie in (0, 1), got {self.q_g_level}")
        if self.h_family not in H_FAMILIES:
            raise InvalidSpec(f"unknown h_family {self.h_family!r}")
        if self.discomfort_variant not in DISCOMFORT_VARIANTS:
            raise InvalidSpec(f"unknown discomfort_variant {self.discomfort_variant!r}")

    def beta_side(self, side: str) -> float:
        if side == "upper":
            return self.beta_up
        if side == "lower":
            return self.beta_lo
        raise InvalidSpec(f"side must be 'upper' or 'lower', got {side!r}")


# ---------------------------------------------------------------------------
# Response discomfort


def _rating_refs(params: GesParams) -> tuple[float, float]:
    """Time-averaged power ratings used to normalize response intensity."""
    return float(np.mean(params.p_c_max)), float(np.mean(params.p_d_max))


def response_discomfort(sched: UnitSchedule, params: GesParams, spec: DduSpec, t: int) -> float:
    """Cumulative-intensity / SoC-deviation discomfort at step t."""
    return float(response_discomfort_series(sched, params, spec)[t])


def response_discomfort_series(sched: UnitSchedule, params: GesParams, spec: DduSpec) -> np.ndarray:
    """Vector of discomfort values over the whole horizon."""
    horizon = params.horizon
    pc_ref, pd_ref = _rating_refs(params)
    intensity = np.zeros(horizon)
    if pc_ref > 0:
        intensity += sched.p_c / pc_ref
    if pd_ref > 0:
        intensity += sched.p_d / pd_ref
    cum = np.cumsum(intensity) / horizon

    lam = 1.0 if spec.discomfort_variant == "F1" else spec.lam
    soc = sched.soc[1:]
    if spec.discomfort_variant == "F1":
        dev = np.zeros(horizon)
    elif spec.discomfort_variant == "F2":
        dev = np.maximum(np.abs(soc - params.soc_baseline_avg) - params.deadband / 2.0, 0.0)
    else:  # F3: one-sided shortfall below the baseline average
        dev = np.maximum(params.soc_baseline_avg - soc, 0.0)
    return lam * cum + (1.0 - lam) * dev


# ---------------------------------------------------------------------------
# Expansion anchor and contraction distribution


def expansion_anchor(diu_bound: float, phys_bound: float, price: float, spec: DduSpec) -> float:
    """Price-expanded bound between the identified and physical values.

    The expansion fraction is the q_g_level-quantile of a normal with mean
    price / c_bar, truncated to [0, 1] so the anchor never leaves the
    physical range.
    """
    mu_g = price / spec.c_bar
    g = DistributionSpec.truncated_normal(mu_g, spec.sigma_g, 0.0, 1.0)
    q_g = float(dist.quantile(g, spec.q_g_level))
    return diu_bound + (phys_bound - diu_bound) * q_g


def contraction_distribution(rd: float, side: str, spec: DduSpec) -> DistributionSpec:
    """Distribution of the contraction factor H with mean beta_side * rd.

    The standard deviation is sigma_h regardless of rd; both supported
    families are matched to these two moments.  A mean at or below the
    numeric floor collapses to a point mass (no contraction).
    """
    if rd < -1e-12:
        raise InvalidSpec(f"response discomfort must be >= 0, got {rd}")
    m = spec.beta_side(side) * max(rd, 0.0)
    if m <= MEAN_FLOOR:
        return DistributionSpec.point(m)
    s = spec.sigma_h
    if spec.h_family == "lognormal":
        s2 = math.log1p((s / m) ** 2)
        return DistributionSpec.lognormal(math.log(m) - s2 / 2.0, math.sqrt(s2))
    # beta on [0, BETA_CAP], moments clipped to keep the shapes positive
    mf = min(max(m / BETA_CAP, 1e-9), 1.0 - 1e-6)
    vf = (s / BETA_CAP) ** 2
    vf = min(vf, 0.99 * mf * (1.0 - mf))
    k = mf * (1.0 - mf) / vf - 1.0
    return DistributionSpec.beta(mf * k, (1.0 - mf) * k, 0.0, BETA_CAP)


def contraction_quantile_vec(m: np.ndarray, spec: DduSpec, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse CDF of H over elementwise means `m` at uniforms `u`.

    Equivalent to quantile(contraction_distribution(...), u) evaluated
    entry-by-entry, but without constructing per-entry spec objects.
    """
    from scipy import special, stats as sstats

    m = np.asarray(m, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.broadcast_to(m, np.broadcast_shapes(m.shape, u.shape)).copy()
    live = m > MEAN_FLOOR
    if not np.any(live):
        return out
    s = spec.sigma_h
    mm = np.broadcast_to(m, out.shape)[live]
    uu = np.broadcast_to(u, out.shape)[live]
    if spec.h_family == "lognormal":
        s2 = np.log1p((s / mm) ** 2)
        out[live] = np.exp(np.log(mm) - s2 / 2.0 + np.sqrt(s2) * special.ndtri(uu))
    else:
        mf = np.clip(mm / BETA_CAP, 1e-9, 1.0 - 1e-6)
        vf = np.minimum((s / BETA_CAP) ** 2, 0.99 * mf * (1.0 - mf))
        k = mf * (1.0 - mf) / vf - 1.0
        out[live] = BETA_CAP * sstats.beta.ppf(uu, mf * k, (1.0 - mf) * k)
    return out


def standardized_h_quantile(rd: float, side: str, spec: DduSpec, level: float) -> float:
    """Quantile of (H - mean) / sd; the fixed-point update of the tail factor."""
    h = contraction_distribution(rd, side, spec)
    return dist.normalized_quantile(h, level)


@dataclass
class RealizedBound:
    """Distribution of one realized SoC bound: anchor + (comfort - anchor) * H."""

    side: str
    anchor: float  # price-expanded bound (value at zero contraction)
    comfort: float
    h: DistributionSpec
    mean: float
    sigma: float

    def quantile(self, level) -> np.ndarray | float:
        """Inverse CDF of the realized bound (decreasing in level when upper)."""
        return self.anchor + (self.comfort - self.anchor) * dist.quantile(self.h, level)


def ddu_bound_distribution(
    side: str,
    diu_bound: float,
    phys_bound: float,
    comfort_bound: float,
    price: float,
    rd: float,
    spec: DduSpec,
    tol: float = 1e-9,
) -> RealizedBound:
    """Full distribution of a realized SoC bound at a given discomfort level."""
    if side == "upper":
        ordered = comfort_bound <= diu_bound + tol and diu_bound <= phys_bound + tol
    elif side == "lower":
        ordered = phys_bound <= diu_bound + tol and diu_bound <= comfort_bound + tol
    else:
        raise InvalidSpec(f"side must be 'upper' or 'lower', got {side!r}")
    if not ordered:
        raise OrderingViolation(
            f"{side} bound ordering violated: comfort={comfort_bound}, "
            f"identified={diu_bound}, physical={phys_bound}"
        )
    anchor = expansion_anchor(diu_bound, phys_bound, price, spec)
    h = contraction_distribution(rd, side, spec)
    gap = comfort_bound - anchor
    mu = anchor + gap * dist.mean(h)
    sigma = abs(gap) * dist.std(h)
    return RealizedBound(side=side, anchor=anchor, comfort=comfort_bound, h=h, mean=mu, sigma=sigma)


def comfort_bounds(params: GesParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-step comfort band: baseline average plus/minus half the deadband."""
    half = params.deadband / 2.0
    lo = params.soc_baseline_avg - half
    hi = params.soc_baseline_avg + half
    return np.clip(lo, params.soc_phys_lo, None), np.clip(hi, None, params.soc_phys_hi)
