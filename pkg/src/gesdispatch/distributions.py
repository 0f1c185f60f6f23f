"""Univariate distribution toolkit.

Every stochastic quantity in a scenario is described by a tagged
:class:`DistributionSpec`.  Sampling is deterministic given (spec, n, seed),
which is the reproducibility contract the Monte-Carlo layers rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import EmptySample, InvalidSpec

FAMILIES = (
    "point",
    "normal",
    "truncated_normal",
    "lognormal",
    "beta",
    "student_t",
    "bernoulli",
    "uniform",
)


@dataclass
class DistributionSpec:
    family: str
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        validate_spec(self)

    # -- constructors ------------------------------------------------------

    @classmethod
    def point(cls, value: float) -> "DistributionSpec":
        return cls("point", {"value": float(value)})

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "DistributionSpec":
        return cls("normal", {"mu": float(mu), "sigma": float(sigma)})

    @classmethod
    def truncated_normal(cls, mu, sigma, a, b) -> "DistributionSpec":
        return cls(
            "truncated_normal",
            {"mu": float(mu), "sigma": float(sigma), "a": float(a), "b": float(b)},
        )

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "DistributionSpec":
        """Log-scale parameterization: log X ~ N(mu, sigma)."""
        return cls("lognormal", {"mu": float(mu), "sigma": float(sigma)})

    @classmethod
    def beta(cls, alpha, beta, low=0.0, high=1.0) -> "DistributionSpec":
        return cls(
            "beta",
            {"alpha": float(alpha), "beta": float(beta), "low": float(low), "high": float(high)},
        )

    @classmethod
    def student_t(cls, nu, loc=0.0, scale=1.0) -> "DistributionSpec":
        return cls("student_t", {"nu": float(nu), "loc": float(loc), "scale": float(scale)})

    @classmethod
    def bernoulli(cls, p: float) -> "DistributionSpec":
        return cls("bernoulli", {"p": float(p)})

    @classmethod
    def uniform(cls, low: float, high: float) -> "DistributionSpec":
        return cls("uniform", {"low": float(low), "high": float(high)})


def validate_spec(spec: DistributionSpec) -> None:
    fam, p = spec.family, spec.params
    if fam not in FAMILIES:
        raise InvalidSpec(f"unknown family {fam!r}")
    try:
        if fam == "point":
            _require_finite(p["value"])
        elif fam == "normal":
            if not p["sigma"] > 0:
                raise InvalidSpec(f"normal sigma must be > 0, got {p['sigma']}")
        elif fam == "truncated_normal":
            if not p["sigma"] > 0:
                raise InvalidSpec(f"truncated normal sigma must be > 0, got {p['sigma']}")
            if not p["a"] < p["b"]:
                raise InvalidSpec(f"truncation requires a < b, got [{p['a']}, {p['b']}]")
        elif fam == "lognormal":
            if not p["sigma"] > 0:
                raise InvalidSpec(f"lognormal sigma must be > 0, got {p['sigma']}")
        elif fam == "beta":
            if not (p["alpha"] > 0 and p["beta"] > 0):
                raise InvalidSpec("beta shapes must be > 0")
            if not p["low"] < p["high"]:
                raise InvalidSpec("beta support requires low < high")
        elif fam == "student_t":
            if not p["nu"] > 0:
                raise InvalidSpec(f"student t nu must be > 0, got {p['nu']}")
            if not p["scale"] > 0:
                raise InvalidSpec("student t scale must be > 0")
        elif fam == "bernoulli":
            if not 0.0 <= p["p"] <= 1.0:
                raise InvalidSpec(f"bernoulli p must lie in [0, 1], got {p['p']}")
        elif fam == "uniform":
            if not p["low"] < p["high"]:
                raise InvalidSpec("uniform requires low < high")
    except KeyError as exc:
        raise InvalidSpec(f"family {fam!r} missing parameter {exc}") from exc


def _require_finite(x):
    if not math.isfinite(x):
        raise InvalidSpec(f"non-finite parameter {x}")


# ---------------------------------------------------------------------------
# Sampling


def sample(spec: DistributionSpec, n: int, seed) -> np.ndarray:
    """n i.i.d. draws; bit-identical for identical (spec, n, seed)."""
    if n < 1:
        raise InvalidSpec(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return quantile(spec, u)


def quantile(spec: DistributionSpec, level) -> np.ndarray | float:
    """Inverse CDF, vectorized over `level`; the common-random-number hook."""
    fam, p = spec.family, spec.params
    level = np.asarray(level, dtype=float)
    if fam == "point":
        out = np.full_like(level, p["value"])
    elif fam == "normal":
        out = p["mu"] + p["sigma"] * special.ndtri(level)
    elif fam == "truncated_normal":
        mu, sg, a, b = p["mu"], p["sigma"], p["a"], p["b"]
        al, be = (a - mu) / sg, (b - mu) / sg
        fa, fb = special.ndtr(al), special.ndtr(be)
        out = mu + sg * special.ndtri(fa + level * (fb - fa))
        out = np.clip(out, a, b)
    elif fam == "lognormal":
        out = np.exp(p["mu"] + p["sigma"] * special.ndtri(level))
    elif fam == "beta":
        out = p["low"] + (p["high"] - p["low"]) * special.btdtri(p["alpha"], p["beta"], level)
    elif fam == "student_t":
        out = p["loc"] + p["scale"] * stats.t.ppf(level, p["nu"])
    elif fam == "bernoulli":
        out = (level > 1.0 - p["p"]).astype(float)
    elif fam == "uniform":
        out = p["low"] + (p["high"] - p["low"]) * level
    else:  # pragma: no cover
        raise InvalidSpec(fam)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Analytical moments


def mean(spec: DistributionSpec) -> float:
    fam, p = spec.family, spec.params
    if fam == "point":
        return p["value"]
    if fam == "normal":
        return p["mu"]
    if fam == "truncated_normal":
        return _truncnorm_moments(p)[0]
    if fam == "lognormal":
        return math.exp(p["mu"] + p["sigma"] ** 2 / 2.0)
    if fam == "beta":
        a, b = p["alpha"], p["beta"]
        return p["low"] + (p["high"] - p["low"]) * a / (a + b)
    if fam == "student_t":
        if p["nu"] <= 1:
            raise InvalidSpec("student t mean undefined for nu <= 1")
        return p["loc"]
    if fam == "bernoulli":
        return p["p"]
    if fam == "uniform":
        return 0.5 * (p["low"] + p["high"])
    raise InvalidSpec(fam)  # pragma: no cover


def std(spec: DistributionSpec) -> float:
    fam, p = spec.family, spec.params
    if fam == "point":
        return 0.0
    if fam == "normal":
        return p["sigma"]
    if fam == "truncated_normal":
        return _truncnorm_moments(p)[1]
    if fam == "lognormal":
        s2 = p["sigma"] ** 2
        return math.exp(p["mu"] + s2 / 2.0) * math.sqrt(math.expm1(s2))
    if fam == "beta":
        a, b = p["alpha"], p["beta"]
        return (p["high"] - p["low"]) * math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
    if fam == "student_t":
        if p["nu"] <= 2:
            raise InvalidSpec("student t variance undefined for nu <= 2")
        return p["scale"] * math.sqrt(p["nu"] / (p["nu"] - 2.0))
    if fam == "bernoulli":
        return math.sqrt(p["p"] * (1.0 - p["p"]))
    if fam == "uniform":
        return (p["high"] - p["low"]) / math.sqrt(12.0)
    raise InvalidSpec(fam)  # pragma: no cover


def _truncnorm_moments(p) -> tuple[float, float]:
    mu, sg, a, b = p["mu"], p["sigma"], p["a"], p["b"]
    al, be = (a - mu) / sg, (b - mu) / sg
    z = special.ndtr(be) - special.ndtr(al)
    pa, pb = _phi(al), _phi(be)
    m = mu + sg * (pa - pb) / z
    var = sg * sg * (1.0 + (al * pa - be * pb) / z - ((pa - pb) / z) ** 2)
    return m, math.sqrt(max(var, 0.0))


def _phi(x: float) -> float:
    if math.isinf(x):
        return 0.0
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normalized_quantile(spec: DistributionSpec, level: float) -> float:
    """Quantile of (X - mean) / std; 0 for a degenerate spec."""
    s = std(spec)
    if s <= 0.0:
        return 0.0
    return (float(quantile(spec, level)) - mean(spec)) / s


# ---------------------------------------------------------------------------
# Empirical quantile


def empirical_inverse_cdf(samples, level: float) -> float:
    """Order-statistic quantile by the nearest-rank rule ceil(level * n)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("cannot take a quantile of an empty sample")
    if not 0.0 < level < 1.0:
        raise InvalidSpec(f"quantile level must lie in (0, 1), got {level}")
    rank = int(math.ceil(level * x.size))
    rank = min(max(rank, 1), x.size)
    return float(np.partition(x, rank - 1)[rank - 1])


def lognormal_inverse_cdf_closed_form(mu: float, sigma: float, level: float) -> float:
    """Exact lognormal quantile exp(mu + sqrt(2 sigma^2) erfinv(2 level - 1))."""
    if sigma <= 0:
        raise InvalidSpec(f"sigma must be > 0, got {sigma}")
    if not 0.0 < level < 1.0:
        raise InvalidSpec(f"level must lie in (0, 1), got {level}")
    return math.exp(mu + math.sqrt(2.0 * sigma * sigma) * special.erfinv(2.0 * level - 1.0))
