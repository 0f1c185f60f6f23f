"""Reserve-backed dispatch for fleets with on-off availability risk.

A unit that is on with probability p delivers its response with real-time
security p*(1-gamma); the uncovered share of the response is backed by a
market reserve product.  The reserve is priced either flat (deterministic
product, S1) or by the reliability level actually required of it (S2), which
decreases as the dispatch confidence loosens.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .errors import InvalidProbability, MissingOnProb, ValidationError
from .optimizer import (
    DispatchStrategy,
    SolveMetadata,
    _extract,
    _pc,
    _pd,
    _solve_or_raise,
    build_cco_ddu,
    robust_f_inv,
)
from .scenario import ReserveSpec, ScenarioBundle

#: above this on-probability a unit is treated as always available
ALWAYS_ON = 1.0 - 1e-12


def required_reliability(p_on: float, gamma: float) -> float:
    """Reliability the reserve must supply so that the joint failure rate,
    unavailability times reserve shortfall, stays within gamma."""
    if not 0.0 <= p_on < 1.0:
        raise InvalidProbability(f"p_on must lie in [0, 1), got {p_on}")
    if not 0.0 < gamma < 1.0:
        raise InvalidProbability(f"gamma must lie in (0, 1), got {gamma}")
    return max(0.0, 1.0 - gamma / (1.0 - p_on))


def reserve_price(r: float, a: float, b: float) -> float:
    """Price of reserve capacity at reliability r: a * r**b."""
    if not 0.0 <= r <= 1.0:
        raise InvalidProbability(f"reliability must lie in [0, 1], got {r}")
    return a * r**b


def _coverage_share(p_on: float, gamma: float) -> float:
    """Fraction of a unit's response that reserve must back.

    The unit itself covers p_on*(1-gamma) of the committed response; the
    remainder, 1 - p_on*(1-gamma), is bought as reserve.  Fully available
    units need no reserve at all.
    """
    if p_on >= ALWAYS_ON:
        return 0.0
    return 1.0 - p_on * (1.0 - gamma)


def _unit_reserve_price(p_on: float, scn: ScenarioBundle, spec: ReserveSpec) -> float:
    if spec.mode == "S1":
        return spec.flat_price
    if p_on >= ALWAYS_ON:
        return spec.flat_price  # unused: the coverage share is zero
    return reserve_price(required_reliability(p_on, scn.gamma), spec.a, spec.b)


def solve_with_reserve(scn: ScenarioBundle, spec: ReserveSpec) -> DispatchStrategy:
    """Dispatch with reserve backing, on top of the robust bound model.

    Adds per-unit reserve power variables linked to the net response by the
    coverage share, with reserve power/ramp limits; the objective prices the
    unit-covered share at the unit's incentive and the reserve share at the
    reserve price.
    """
    start = time.perf_counter()
    issues = spec.validate()
    if issues:
        raise ValidationError(issues)
    for u in scn.units:
        if u.params.on_prob is None or np.any(~np.isfinite(u.params.on_prob)):
            raise MissingOnProb(f"unit {u.unit_id} lacks a finite on_prob series")

    prob = build_cco_ddu(scn, robust_f_inv(scn))
    horizon = scn.horizon
    dt = scn.dt
    shares = {}
    prices = {}
    for u in scn.units:
        uid = u.unit_id
        w = np.array([_coverage_share(float(p), scn.gamma) for p in u.params.on_prob])
        c_rs = np.array([_unit_reserve_price(float(p), scn, spec) for p in u.params.on_prob])
        shares[uid] = w
        prices[uid] = c_rs
        for t in range(horizon):
            rs = f"rs:{uid}:{t}"
            rp = f"rs+:{uid}:{t}"
            rn = f"rs-:{uid}:{t}"
            prob.add_var(rs, max(spec.p_lo, -1e12), min(spec.p_hi, 1e12))
            prob.add_var(rp, 0.0, math.inf)
            prob.add_var(rn, 0.0, math.inf)
            # reserve covers the w-share of the unit's net response
            prob.add_eq(
                {rs: 1.0, _pd(uid, t): -w[t], _pc(uid, t): w[t]}, 0.0, f"rslink:{uid}:{t}"
            )
            prob.add_eq({rs: 1.0, rp: -1.0, rn: 1.0}, 0.0, f"rssplit:{uid}:{t}")
            # the reserve premium is an additional insurance cost on top of
            # the unit incentives, priced per backed kWh
            prob.set_objective_coeff(rp, float(c_rs[t]) * dt)
            prob.set_objective_coeff(rn, float(c_rs[t]) * dt)
        if math.isfinite(spec.ramp_up) or math.isfinite(spec.ramp_dn):
            for t in range(1, horizon):
                d = {f"rs:{uid}:{t}": 1.0, f"rs:{uid}:{t - 1}": -1.0}
                if math.isfinite(spec.ramp_up):
                    prob.add_leq(dict(d), spec.ramp_up, f"rsru:{uid}:{t}")
                if math.isfinite(spec.ramp_dn):
                    prob.add_geq(dict(d), -spec.ramp_dn, f"rsrd:{uid}:{t}")

    sol = _solve_or_raise(prob, f"reserve-{spec.mode}")
    meta = SolveMetadata(
        mode="M3", reformulation="R1", gamma=scn.gamma, wall_time=time.perf_counter() - start
    )
    strategy = _extract(scn, sol, meta)
    strategy.reserve_schedule = {
        u.unit_id: np.array([sol[f"rs:{u.unit_id}:{t}"] for t in range(horizon)])
        for u in scn.units
    }
    reserve_energy = 0.0
    ges_energy = 0.0
    reserve_cost = 0.0
    for u in scn.units:
        uid = u.unit_id
        s = strategy.schedules[uid]
        resp = s.p_c + s.p_d
        reserve_energy += float(np.dot(shares[uid], resp)) * dt
        ges_energy += float(np.dot(1.0 - shares[uid], resp)) * dt
        reserve_cost += float(np.dot(prices[uid] * shares[uid], resp)) * dt
    strategy.reserve_diag = {
        "mode": spec.mode,
        "reserve_energy_kwh": reserve_energy,
        "ges_energy_kwh": ges_energy,
        "reserve_cost": reserve_cost,
    }
    strategy.objective_value = sol.objective
    return strategy
