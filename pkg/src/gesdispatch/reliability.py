"""Ex-post Monte-Carlo evaluation of a dispatch strategy.

For each scenario draw the practical SoC bounds are re-realized under the
full generative model — parameter and baseline noise pushed through the
device mapping, a price-driven expansion draw, and a discomfort-driven
contraction draw — and the day-ahead schedule is scored against them:
violation probability, signed energy not served, and real-time penalty cost.

All draws come from substreams keyed by (master seed, unit, quantity), so two
strategies evaluated with the same seed face identical random worlds.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import distributions as dist
from .ddu import contraction_quantile_vec
from .distributions import DistributionSpec
from .errors import DimensionMismatch
from .diu import baseline_only_fast_path, tcl_baseline_bound_samples
from .ges import map_device_to_ges
from .optimizer import DispatchStrategy, balance_requirements
from .scenario import ScenarioBundle, UnitSpec

#: numeric slack before a bound crossing counts as a violation
VIOLATION_TOL = 1e-9

#: attempts to redraw a crossed (upper, lower) pair before midpoint clipping
MAX_RESAMPLE = 100

#: real-time price multipliers on the ToU price
UNDER_RESPONSE_MULT = 1.3
OVER_RESPONSE_MULT = 0.3


@dataclass
class UnitRealization:
    """Per-draw realized bounds for one unit; arrays are (draws, horizon)."""

    upper: np.ndarray
    lower: np.ndarray
    p_c_max: np.ndarray
    p_d_max: np.ndarray
    crossings: int


@dataclass
class RealizationBatch:
    units: dict[str, UnitRealization]
    draws: int
    seed: int


@dataclass
class ReliabilityReport:
    lorp: float
    erns: np.ndarray  # signed kWh per step
    erns_total_signed: float
    erns_total_abs: float
    cost_da: float
    cost_rt: float
    cost_tc: float
    violation_freq: dict[str, np.ndarray]  # per unit, per step
    crossings: int
    gamma: float
    draws: int
    seed: int


# ---------------------------------------------------------------------------
# Per-unit realization


def _unit_streams(uid: str, seed: int) -> dict[str, np.random.Generator]:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(uid.encode())])
    names = ("diu", "resample")
    return dict(zip(names, (np.random.default_rng(c) for c in ss.spawn(len(names)))))


def _system_uniforms(seed: int, m: int, horizon: int) -> dict[str, np.ndarray]:
    """Fleet-wide expansion/contraction shock uniforms, one per (draw, step).

    The willingness shocks behind bound expansion and contraction are modeled
    as common to the whole fleet in each draw (a shared behavioral/weather
    driver); per-unit independent shocks would make the any-violation draw
    event saturate with fleet size regardless of the per-row confidence.
    """
    ss = np.random.SeedSequence([int(seed), zlib.crc32(b"system")])
    names = ("g_upper", "g_lower", "h_upper", "h_lower")
    return {
        name: np.random.default_rng(c).random((m, horizon))
        for name, c in zip(names, ss.spawn(len(names)))
    }


def _realized_diu(u: UnitSpec, m: int, rng: np.random.Generator, scn: ScenarioBundle):
    """Per-draw storage parameters under identification/baseline noise.

    Returns matrices (m, T) for ratings, identified SoC bounds, comfort
    anchors, and rating references; collapses to nominal rows when the unit
    has no exogenous uncertainty.
    """
    horizon = scn.horizon
    p = u.params
    if not u.unit_dists and u.baseline_dist is None:
        one = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (m, horizon))  # noqa: E731
        return {
            "p_c_max": one(p.p_c_max),
            "p_d_max": one(p.p_d_max),
            "soc_lo": one(p.soc_lo),
            "soc_hi": one(p.soc_hi),
            "avg": one(p.soc_baseline_avg),
            "deadband": one(p.deadband),
            "pc_ref": np.full(m, float(np.mean(p.p_c_max))),
            "pd_ref": np.full(m, float(np.mean(p.p_d_max))),
        }
    names = sorted(u.unit_dists)
    draws = {name: dist.sample(u.unit_dists[name], m, rng.spawn(1)[0]) for name in names}
    if u.baseline_dist is not None:
        base = np.column_stack(
            [dist.sample(u.baseline_dist[t], m, rng.spawn(1)[0]) for t in range(horizon)]
        )
    else:
        base = None
    if base is not None and baseline_only_fast_path(u.dev, u.unit_dists):
        return tcl_baseline_bound_samples(u.dev, base, scn.dt, horizon)
    out = {k: np.empty((m, horizon)) for k in ("p_c_max", "p_d_max", "soc_lo", "soc_hi", "avg", "deadband")}
    pc_ref = np.empty(m)
    pd_ref = np.empty(m)
    for j in range(m):
        kw = {name: float(draws[name][j]) for name in names}
        if base is not None:
            kw["baseline_power"] = base[j]
        params = map_device_to_ges(replace(u.dev, **kw), scn.dt, horizon)
        out["p_c_max"][j] = params.p_c_max
        out["p_d_max"][j] = params.p_d_max
        out["soc_lo"][j] = params.soc_lo
        out["soc_hi"][j] = params.soc_hi
        out["avg"][j] = params.soc_baseline_avg
        out["deadband"][j] = params.deadband
        pc_ref[j] = np.mean(params.p_c_max)
        pd_ref[j] = np.mean(params.p_d_max)
    out["pc_ref"] = pc_ref
    out["pd_ref"] = pd_ref
    return out


def _rd_matrix(strategy: DispatchStrategy, u: UnitSpec, real) -> np.ndarray:
    """Discomfort per draw and step, using each draw's realized references."""
    sched = strategy.schedules[u.unit_id]
    spec = u.ddu
    horizon = sched.p_c.shape[0]
    pc_ref = np.where(real["pc_ref"] > 0, real["pc_ref"], np.inf)[:, None]
    pd_ref = np.where(real["pd_ref"] > 0, real["pd_ref"], np.inf)[:, None]
    intensity = sched.p_c[None, :] / pc_ref + sched.p_d[None, :] / pd_ref
    cum = np.cumsum(intensity, axis=1) / horizon
    lam = 1.0 if spec.discomfort_variant == "F1" else spec.lam
    soc = sched.soc[1:][None, :]
    if spec.discomfort_variant == "F1":
        dev = 0.0
    elif spec.discomfort_variant == "F2":
        dev = np.maximum(np.abs(soc - real["avg"]) - real["deadband"] / 2.0, 0.0)
    else:
        dev = np.maximum(real["avg"] - soc, 0.0)
    return lam * cum + (1.0 - lam) * dev


def _truncnorm_ppf(mu, sigma, u):
    from scipy import special

    fa = special.ndtr((0.0 - mu) / sigma)
    fb = special.ndtr((1.0 - mu) / sigma)
    return np.clip(mu + sigma * special.ndtri(fa + u * (fb - fa)), 0.0, 1.0)


def _side_bound(u: UnitSpec, real, rd, side, u_g, u_h):
    """Realized bound for one side: expansion draw then contraction draw."""
    spec = u.ddu
    p = u.params
    if side == "upper":
        diu = np.minimum(real["soc_hi"], p.soc_phys_hi)
        phys = p.soc_phys_hi
        comfort = np.minimum(real["avg"] + real["deadband"] / 2.0, diu)
        price = np.asarray(u.price_c, dtype=float)
    else:
        diu = np.maximum(real["soc_lo"], p.soc_phys_lo)
        phys = p.soc_phys_lo
        comfort = np.maximum(real["avg"] - real["deadband"] / 2.0, diu)
        price = np.asarray(u.price_d, dtype=float)
    g = _truncnorm_ppf(price[None, :] / spec.c_bar, spec.sigma_g, u_g)
    anchor = diu + (phys - diu) * g
    h = contraction_quantile_vec(spec.beta_side(side) * rd, spec, u_h)
    return anchor + (comfort - anchor) * h


def realize_unit(
    u: UnitSpec, strategy: DispatchStrategy, scn: ScenarioBundle, m: int, seed: int
) -> UnitRealization:
    """Full per-draw realization of one unit's practical bounds."""
    streams = _unit_streams(u.unit_id, seed)
    sysu = _system_uniforms(seed, m, scn.horizon)
    real = _realized_diu(u, m, streams["diu"], scn)
    rd = _rd_matrix(strategy, u, real)
    upper = _side_bound(u, real, rd, "upper", sysu["g_upper"], sysu["h_upper"])
    lower = _side_bound(u, real, rd, "lower", sysu["g_lower"], sysu["h_lower"])

    crossings = 0
    crossed = lower > upper
    if np.any(crossed):
        crossings = int(np.count_nonzero(crossed))
        rng = streams["resample"]
        spec = u.ddu
        for _ in range(MAX_RESAMPLE):
            idx = np.nonzero(crossed)
            if idx[0].size == 0:
                break
            for side, mat in (("upper", upper), ("lower", lower)):
                p = u.params
                if side == "upper":
                    diu = np.minimum(real["soc_hi"], p.soc_phys_hi)[idx]
                    phys = p.soc_phys_hi
                    comfort = np.minimum(real["avg"] + real["deadband"] / 2.0, np.minimum(real["soc_hi"], p.soc_phys_hi))[idx]
                    price = np.asarray(u.price_c, dtype=float)[idx[1]]
                else:
                    diu = np.maximum(real["soc_lo"], p.soc_phys_lo)[idx]
                    phys = p.soc_phys_lo
                    comfort = np.maximum(real["avg"] - real["deadband"] / 2.0, np.maximum(real["soc_lo"], p.soc_phys_lo))[idx]
                    price = np.asarray(u.price_d, dtype=float)[idx[1]]
                g = _truncnorm_ppf(price / spec.c_bar, spec.sigma_g, rng.random(idx[0].size))
                anchor = diu + (phys - diu) * g
                h = contraction_quantile_vec(
                    spec.beta_side(side) * rd[idx], spec, rng.random(idx[0].size)
                )
                mat[idx] = anchor + (comfort - anchor) * h
            crossed = lower > upper
        still = np.nonzero(crossed)
        if still[0].size:
            mid = 0.5 * (upper[still] + lower[still])
            upper[still] = mid
            lower[still] = mid
    return UnitRealization(
        upper=upper,
        lower=lower,
        p_c_max=real["p_c_max"],
        p_d_max=real["p_d_max"],
        crossings=crossings,
    )


def realize_practical_bounds(
    strategy: DispatchStrategy, scn: ScenarioBundle, draws: int, seed: int
) -> RealizationBatch:
    """Realize practical bounds for every unit (held in memory; see
    evaluate_reliability for the streaming variant)."""
    units = {u.unit_id: realize_unit(u, strategy, scn, draws, seed) for u in scn.units}
    return RealizationBatch(units=units, draws=draws, seed=seed)


# ---------------------------------------------------------------------------
# Metrics


def _unit_violations(strategy: DispatchStrategy, uid: str, real: UnitRealization):
    sched = strategy.schedules[uid]
    soc = sched.soc[1:][None, :]
    over = np.maximum(soc - real.upper, 0.0)
    under = np.maximum(real.lower - soc, 0.0)
    violated = (over > VIOLATION_TOL) | (under > VIOLATION_TOL)
    return over, under, violated


def compute_lorp_erns(
    strategy: DispatchStrategy, batch: RealizationBatch, scn: ScenarioBundle
) -> ReliabilityReport:
    """LORP, signed ERNS, and violation frequencies from a realized batch."""
    horizon = scn.horizon
    any_violation = np.zeros(batch.draws, dtype=bool)
    erns = np.zeros(horizon)
    freq = {}
    crossings = 0
    for u in scn.units:
        uid = u.unit_id
        real = batch.units[uid]
        if real.upper.shape != (batch.draws, horizon):
            raise DimensionMismatch(
                f"unit {uid}: batch shape {real.upper.shape} vs ({batch.draws}, {horizon})"
            )
        over, under, violated = _unit_violations(strategy, uid, real)
        any_violation |= violated.any(axis=1)
        erns += (over - under).mean(axis=0) * u.params.S
        freq[uid] = violated.mean(axis=0)
        crossings += real.crossings
    return ReliabilityReport(
        lorp=float(any_violation.mean()),
        erns=erns,
        erns_total_signed=float(erns.sum()),
        erns_total_abs=float(np.abs(erns).sum()),
        cost_da=strategy.objective_value,
        cost_rt=0.0,
        cost_tc=strategy.objective_value,
        violation_freq=freq,
        crossings=crossings,
        gamma=scn.gamma,
        draws=batch.draws,
        seed=batch.seed,
    )


def penalty_cost(strategy: DispatchStrategy, batch: RealizationBatch, scn: ScenarioBundle) -> float:
    """Expected real-time cost: undelivered response is bought back at a
    markup, excess response loses part of its day-ahead revenue."""
    total = 0.0
    for u in scn.units:
        real = batch.units[u.unit_id]
        if real.upper.shape[1] != scn.horizon:
            raise DimensionMismatch(f"unit {u.unit_id}: horizon mismatch")
        over, under, _ = _unit_violations(strategy, u.unit_id, real)
        e_over = over.mean(axis=0) * u.params.S
        e_under = under.mean(axis=0) * u.params.S
        total += float(
            np.dot(scn.tou_price, UNDER_RESPONSE_MULT * e_under + OVER_RESPONSE_MULT * e_over)
        )
    return total


def evaluate_reliability(
    strategy: DispatchStrategy, scn: ScenarioBundle, draws: int, seed: int
) -> ReliabilityReport:
    """Streaming evaluation: one unit realized at a time, then discarded."""
    horizon = scn.horizon
    any_violation = np.zeros(draws, dtype=bool)
    erns = np.zeros(horizon)
    freq = {}
    cost_rt = 0.0
    crossings = 0
    for u in scn.units:
        real = realize_unit(u, strategy, scn, draws, seed)
        over, under, violated = _unit_violations(strategy, u.unit_id, real)
        any_violation |= violated.any(axis=1)
        erns += (over - under).mean(axis=0) * u.params.S
        freq[u.unit_id] = violated.mean(axis=0)
        crossings += real.crossings
        e_over = over.mean(axis=0) * u.params.S
        e_under = under.mean(axis=0) * u.params.S
        cost_rt += float(
            np.dot(scn.tou_price, UNDER_RESPONSE_MULT * e_under + OVER_RESPONSE_MULT * e_over)
        )
    return ReliabilityReport(
        lorp=float(any_violation.mean()),
        erns=erns,
        erns_total_signed=float(erns.sum()),
        erns_total_abs=float(np.abs(erns).sum()),
        cost_da=strategy.objective_value,
        cost_rt=cost_rt,
        cost_tc=strategy.objective_value + cost_rt,
        violation_freq=freq,
        crossings=crossings,
        gamma=scn.gamma,
        draws=draws,
        seed=seed,
    )


def evaluate_many(
    strategies: dict[str, DispatchStrategy], scn: ScenarioBundle, draws: int, seed: int
) -> dict[str, ReliabilityReport]:
    """Evaluate several strategies against the same random worlds.

    The device-noise realization per unit is sampled once and reused, so this
    is both faster than repeated evaluate_reliability calls and guarantees
    common random numbers across strategies.
    """
    horizon = scn.horizon
    acc = {
        name: {
            "any": np.zeros(draws, dtype=bool),
            "erns": np.zeros(horizon),
            "freq": {},
            "cost_rt": 0.0,
            "crossings": 0,
        }
        for name in strategies
    }
    sysu = _system_uniforms(seed, draws, horizon)
    for u in scn.units:
        streams = _unit_streams(u.unit_id, seed)
        real = _realized_diu(u, draws, streams["diu"], scn)
        for name, strategy in strategies.items():
            rd = _rd_matrix(strategy, u, real)
            upper = _side_bound(u, real, rd, "upper", sysu["g_upper"], sysu["h_upper"])
            lower = _side_bound(u, real, rd, "lower", sysu["g_lower"], sysu["h_lower"])
            crossed = lower > upper
            n_cross = int(np.count_nonzero(crossed))
            if n_cross:
                still = np.nonzero(crossed)
                mid = 0.5 * (upper[still] + lower[still])
                upper[still] = mid
                lower[still] = mid
            real_u = UnitRealization(
                upper=upper,
                lower=lower,
                p_c_max=real["p_c_max"],
                p_d_max=real["p_d_max"],
                crossings=n_cross,
            )
            over, under, violated = _unit_violations(strategy, u.unit_id, real_u)
            a = acc[name]
            a["any"] |= violated.any(axis=1)
            a["erns"] += (over - under).mean(axis=0) * u.params.S
            a["freq"][u.unit_id] = violated.mean(axis=0)
            a["crossings"] += n_cross
            e_over = over.mean(axis=0) * u.params.S
            e_under = under.mean(axis=0) * u.params.S
            a["cost_rt"] += float(
                np.dot(scn.tou_price, UNDER_RESPONSE_MULT * e_under + OVER_RESPONSE_MULT * e_over)
            )
    return {
        name: ReliabilityReport(
            lorp=float(a["any"].mean()),
            erns=a["erns"],
            erns_total_signed=float(a["erns"].sum()),
            erns_total_abs=float(np.abs(a["erns"]).sum()),
            cost_da=strategies[name].objective_value,
            cost_rt=a["cost_rt"],
            cost_tc=strategies[name].objective_value + a["cost_rt"],
            violation_freq=a["freq"],
            crossings=a["crossings"],
            gamma=scn.gamma,
            draws=draws,
            seed=seed,
        )
        for name, a in acc.items()
    }


def average_contraction(strategy: DispatchStrategy, scn: ScenarioBundle) -> float:
    """Mean contraction magnitude over units, steps, and sides.

    The contraction factor has mean beta * rd per side; its average is a
    schedule-level measure of how far the practical bounds are pulled toward
    the comfort band by the scheduled response.
    """
    total = 0.0
    count = 0
    for u in scn.units:
        rd = strategy.rd[u.unit_id]
        total += float(np.sum(u.ddu.beta_up * rd) + np.sum(u.ddu.beta_lo * rd))
        count += 2 * rd.size
    return total / count if count else 0.0


# ---------------------------------------------------------------------------
# Per-row ex-post check of the exogenous chance constraints


def expost_row_frequencies(
    strategy: DispatchStrategy, scn: ScenarioBundle, draws: int, seed: int
) -> dict[str, np.ndarray]:
    """Violation frequency of every reformulated exogenous row.

    Keys: "pc:<uid>", "pd:<uid>", "soc_lo:<uid>", "soc_hi:<uid>" (per-step
    arrays) and "balance" (per-step array).
    """
    out: dict[str, np.ndarray] = {}
    for u in scn.units:
        streams = _unit_streams(u.unit_id, seed)
        real = _realized_diu(u, draws, streams["diu"], scn)
        sched = strategy.schedules[u.unit_id]
        soc = sched.soc[1:][None, :]
        out[f"pc:{u.unit_id}"] = (sched.p_c[None, :] > real["p_c_max"] + VIOLATION_TOL).mean(axis=0)
        out[f"pd:{u.unit_id}"] = (sched.p_d[None, :] > real["p_d_max"] + VIOLATION_TOL).mean(axis=0)
        out[f"soc_hi:{u.unit_id}"] = (soc > real["soc_hi"] + VIOLATION_TOL).mean(axis=0)
        out[f"soc_lo:{u.unit_id}"] = (soc < real["soc_lo"] - VIOLATION_TOL).mean(axis=0)

    rng_l = np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(b"load")]))
    rng_r = np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(b"res")]))
    load = np.column_stack([dist.sample(d, draws, rng_l.spawn(1)[0]) for d in scn.load_dist])
    res = np.column_stack([dist.sample(d, draws, rng_r.spawn(1)[0]) for d in scn.res_dist])
    net_supply = strategy.grid_import[None, :] + res
    for u in scn.units:
        s = strategy.schedules[u.unit_id]
        net_supply = net_supply + (s.p_d - s.p_c)[None, :]
    out["balance"] = (net_supply < load - VIOLATION_TOL).mean(axis=0)
    return out
