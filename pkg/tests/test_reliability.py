"""Ex-post Monte-Carlo scoring: realized bounds, LORP/ERNS, penalties."""

from dataclasses import replace

import numpy as np
import pytest

from gesdispatch.ddu import DduSpec
from gesdispatch.errors import DimensionMismatch
from gesdispatch.ges import UnitSchedule
from gesdispatch.optimizer import DispatchStrategy, SolveMetadata, solve_cco_diu
from gesdispatch.reliability import (
    RealizationBatch,
    UnitRealization,
    average_contraction,
    compute_lorp_erns,
    evaluate_many,
    evaluate_reliability,
    penalty_cost,
    realize_practical_bounds,
)

from util import bes_device, make_scenario, make_unit

T = 8


def ddu_scenario(sigma_g=0.5, sigma_h=0.1, beta_up=3.0, beta_lo=6.0, **kw):
    spec = DduSpec(sigma_g=sigma_g, sigma_h=sigma_h, beta_up=beta_up,
                   beta_lo=beta_lo, q_g_level=0.05)
    dev = bes_device(soc_lo=0.1, soc_hi=0.9, deadband=0.4)
    return make_scenario([make_unit(dev, T, ddu=spec)], T, load=15.0, **kw)


def strategy_with(scn, soc=None, p_c=None, p_d=None):
    horizon = scn.horizon
    schedules = {}
    for u in scn.units:
        s = np.full(horizon + 1, u.params.soc_init) if soc is None else np.asarray(soc, float)
        schedules[u.unit_id] = UnitSchedule(
            p_c=np.zeros(horizon) if p_c is None else np.asarray(p_c, float),
            p_d=np.zeros(horizon) if p_d is None else np.asarray(p_d, float),
            soc=s.copy(),
        )
    from gesdispatch.ddu import response_discomfort_series

    return DispatchStrategy(
        schedules=schedules, grid_import=np.zeros(horizon),
        rd={u.unit_id: response_discomfort_series(schedules[u.unit_id], u.params, u.ddu)
            for u in scn.units},
        objective_value=0.0, metadata=SolveMetadata(mode="M2"),
    )


# --- realization -----------------------------------------------------------


def test_degenerate_bounds_equal_anchors():
    # no parameter noise, (nearly) no expansion/contraction spread, zero
    # response: every draw must sit at the deterministic anchor
    scn = ddu_scenario(sigma_g=1e-12, sigma_h=1e-12)
    strat = strategy_with(scn)  # rest at baseline: rd = 0
    batch = realize_practical_bounds(strat, scn, draws=64, seed=0)
    real = batch.units["bes"]
    from gesdispatch.optimizer import ddu_row_data

    rows = ddu_row_data(scn.units[0], T)
    assert np.allclose(real.upper, rows.q_up[None, :], atol=1e-6)
    assert np.allclose(real.lower, rows.q_lo[None, :], atol=1e-6)


def test_beta_doubling_contracts_bounds():
    scn1 = ddu_scenario()
    scn2 = ddu_scenario(beta_up=6.0, beta_lo=12.0)
    strat = strategy_with(scn1, p_d=np.full(T, 3.0))  # positive rd
    b1 = realize_practical_bounds(strat, scn1, draws=500, seed=7)
    b2 = realize_practical_bounds(strat, scn2, draws=500, seed=7)
    up1 = b1.units["bes"].upper.mean(axis=0)
    up2 = b2.units["bes"].upper.mean(axis=0)
    lo1 = b1.units["bes"].lower.mean(axis=0)
    lo2 = b2.units["bes"].lower.mean(axis=0)
    # doubling the aversion pulls the mean bounds comfort-ward at every step
    assert np.all(up2 <= up1 + 1e-9)
    assert np.all(lo2 >= lo1 - 1e-9)


def test_rd_zero_strategy_independence():
    scn = ddu_scenario()
    a = strategy_with(scn)
    soc = np.full(T + 1, 0.55)  # inside the deadband: still rd = 0
    b = strategy_with(scn, soc=soc)
    assert np.all(a.rd["bes"] == 0.0) and np.all(b.rd["bes"] == 0.0)
    ba = realize_practical_bounds(a, scn, draws=100, seed=3)
    bb = realize_practical_bounds(b, scn, draws=100, seed=3)
    assert np.array_equal(ba.units["bes"].upper, bb.units["bes"].upper)
    assert np.array_equal(ba.units["bes"].lower, bb.units["bes"].lower)


# --- metrics on constructed batches ----------------------------------------


def fixed_batch(scn, upper, lower, draws=4):
    horizon = scn.horizon
    units = {
        u.unit_id: UnitRealization(
            upper=np.tile(np.asarray(upper, float), (draws, 1)),
            lower=np.tile(np.asarray(lower, float), (draws, 1)),
            p_c_max=np.tile(u.params.p_c_max, (draws, 1)),
            p_d_max=np.tile(u.params.p_d_max, (draws, 1)),
            crossings=0,
        )
        for u in scn.units
    }
    return RealizationBatch(units=units, draws=draws, seed=0)


def test_inside_bounds_zero_metrics():
    scn = ddu_scenario()
    strat = strategy_with(scn)
    batch = fixed_batch(scn, np.full(T, 0.9), np.full(T, 0.1))
    rep = compute_lorp_erns(strat, batch, scn)
    assert rep.lorp == 0.0
    assert np.all(rep.erns == 0.0)
    assert penalty_cost(strat, batch, scn) == 0.0


def test_erns_arithmetic():
    scn = ddu_scenario()  # S = 50
    scn.units[0].params.S = 10.0
    strat = strategy_with(scn)  # soc 0.5 everywhere
    upper = np.full(T, 0.9)
    upper[3] = 0.45  # exceeded by exactly 0.05 in every draw
    batch = fixed_batch(scn, upper, np.full(T, 0.1))
    rep = compute_lorp_erns(strat, batch, scn)
    assert rep.lorp == 1.0
    assert rep.erns[3] == pytest.approx(0.5, abs=1e-12)
    assert rep.erns_total_signed == pytest.approx(0.5, abs=1e-12)


def test_penalty_under_response():
    scn = ddu_scenario(tou=0.9)
    scn.units[0].params.S = 10.0
    strat = strategy_with(scn)
    lower = np.full(T, 0.1)
    lower[2] = 0.6  # soc 0.5 sits 0.1 below the lower bound: 1 kWh under
    batch = fixed_batch(scn, np.full(T, 0.9), lower)
    assert penalty_cost(strat, batch, scn) == pytest.approx(1.3 * 0.9, abs=1e-9)


def test_penalty_over_response():
    scn = ddu_scenario(tou=1.4)
    scn.units[0].params.S = 10.0
    strat = strategy_with(scn)
    upper = np.full(T, 0.9)
    upper[2] = 0.4  # soc 0.5 sits 0.1 above the upper bound: 1 kWh over
    batch = fixed_batch(scn, upper, np.full(T, 0.1))
    assert penalty_cost(strat, batch, scn) == pytest.approx(0.3 * 1.4, abs=1e-9)


def test_erns_sign_contract():
    scn = ddu_scenario()
    up = strategy_with(scn, soc=np.full(T + 1, 0.95))
    dn = strategy_with(scn, soc=np.full(T + 1, 0.05))
    batch = fixed_batch(scn, np.full(T, 0.9), np.full(T, 0.1))
    assert compute_lorp_erns(up, batch, scn).erns_total_signed > 0
    assert compute_lorp_erns(dn, batch, scn).erns_total_signed < 0


def test_dimension_mismatch():
    scn = ddu_scenario()
    strat = strategy_with(scn)
    batch = fixed_batch(scn, np.full(T, 0.9), np.full(T, 0.1))
    batch.draws = 99
    with pytest.raises(DimensionMismatch):
        compute_lorp_erns(strat, batch, scn)


# --- end-to-end evaluation -------------------------------------------------


def test_evaluation_deterministic(smoke3, smoke3_m2):
    a = evaluate_reliability(smoke3_m2, smoke3, draws=300, seed=11)
    b = evaluate_reliability(smoke3_m2, smoke3, draws=300, seed=11)
    assert a.lorp == b.lorp
    assert np.array_equal(a.erns, b.erns)
    assert a.cost_rt == b.cost_rt


def test_evaluate_many_matches_single(smoke3, smoke3_m2):
    many = evaluate_many({"m2": smoke3_m2}, smoke3, draws=300, seed=11)["m2"]
    one = evaluate_reliability(smoke3_m2, smoke3, draws=300, seed=11)
    assert many.lorp == one.lorp
    assert np.allclose(many.erns, one.erns)
    assert many.cost_rt == pytest.approx(one.cost_rt, rel=1e-12)


def test_lorp_weakly_increases_with_gamma(smoke3):
    lorps = []
    for g in (0.05, 0.25, 0.45):
        scn = replace(smoke3, gamma=g, gamma_balance=g)
        strat = solve_cco_diu(scn)
        lorps.append(evaluate_reliability(strat, scn, draws=2000, seed=5).lorp)
    assert all(a <= b + 0.02 for a, b in zip(lorps, lorps[1:]))


def test_cost_accounting(smoke3, smoke3_m2):
    rep = evaluate_reliability(smoke3_m2, smoke3, draws=200, seed=1)
    assert rep.cost_tc == pytest.approx(rep.cost_da + rep.cost_rt, abs=1e-9)
    assert 0.0 <= rep.lorp <= 1.0


def test_average_contraction_zero_at_rest():
    scn = ddu_scenario()
    assert average_contraction(strategy_with(scn), scn) == 0.0
    active = strategy_with(scn, p_d=np.full(T, 3.0))
    assert average_contraction(active, scn) > 0.0
