"""Scenario directory loading and serialization.

A scenario lives in a directory:

* ``scenario.yaml`` — horizon, dt, gamma(s), grid cap, solver configuration,
  sampling configuration, optional reserve block;
* ``units.csv`` — one row per unit: device kind, physical parameters,
  incentive prices, and uncertainty knobs;
* ``ddu.csv`` — one row per unit: decision-dependent-uncertainty parameters;
* ``timeseries.csv`` — one row per step: ToU price and load/renewable
  forecast distributions;
* ``unit_series.csv`` (optional) — long-format per-unit trajectories
  (baseline power, baseline indoor temperature, EV profiles).

Floats are written with 17 significant digits so a load/serialize round trip
is bit-exact.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import yaml

from .cantelli import parse_shape
from .ddu import DduSpec
from .diu import propagate_diu
from .distributions import DistributionSpec
from .errors import ParseError, ValidationError
from .ges import DeviceDescription, map_device_to_ges
from .scenario import ReserveSpec, ScenarioBundle, UnitSpec

_DEV_FIELDS = (
    "thermal_resistance", "thermal_capacity", "conversion_efficiency",
    "t_comfort_lo", "t_comfort_hi", "p_min", "p_max", "baseline_power",
    "s_capacity", "eta_c", "eta_d", "eps", "p_c_rating", "p_d_rating",
    "soc_lo", "soc_hi", "soc_init", "soc_phys_lo", "soc_phys_hi",
    "soc_ramp_up", "soc_ramp_dn", "deadband", "on_prob",
)
_UNC_FIELDS = ("baseline_sigma", "ident_sigma_frac")
_DDU_FIELDS = (
    "sigma_g", "sigma_h", "beta_up", "beta_lo", "lam", "c_bar",
    "q_g_level", "h_family", "discomfort_variant",
)
_SERIES_FIELDS = (
    "baseline_power", "t_in_baseline", "ev_base_p_c", "ev_base_p_d", "ev_dsoc",
    "t_comfort_lo", "t_comfort_hi", "on_prob", "deadband",
)


def fmt(x) -> str:
    """Serialize a float with a 17-significant-digit round trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _parse_float(text, where, issues):
    try:
        return float(text)
    except (TypeError, ValueError):
        issues.append(f"{where}: not a number: {text!r}")
        return math.nan


def _read_csv(path: Path) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _dist_from_row(family: str, mean: float, sigma: float, where: str, issues):
    family = (family or "normal").strip().lower()
    if sigma <= 0 or family == "point":
        return DistributionSpec.point(mean)
    if family == "normal":
        return DistributionSpec.normal(mean, sigma)
    if family == "lognormal":
        if mean <= 0:
            issues.append(f"{where}: lognormal mean must be > 0, got {mean}")
            return DistributionSpec.point(max(mean, 0.0))
        s2 = math.log1p((sigma / mean) ** 2)
        return DistributionSpec.lognormal(math.log(mean) - s2 / 2.0, math.sqrt(s2))
    if family == "truncated_normal":
        return DistributionSpec.truncated_normal(mean, sigma, mean - 3 * sigma, mean + 3 * sigma)
    issues.append(f"{where}: unknown distribution family {family!r}")
    return DistributionSpec.point(mean)


def load_scenario(path, compute_stats: bool = True) -> ScenarioBundle:
    """Load and fully validate a scenario directory."""
    root = Path(path)
    issues: list[str] = []
    cfg_path = root / "scenario.yaml"
    try:
        cfg = yaml.safe_load(cfg_path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {cfg_path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse {cfg_path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ParseError(f"{cfg_path}: top level must be a mapping")

    horizon = int(cfg.get("horizon", 24))
    dt = float(cfg.get("dt", 1.0))

    ts_rows = _read_csv(root / "timeseries.csv")
    if len(ts_rows) != horizon:
        issues.append(f"timeseries.csv: expected {horizon} rows, found {len(ts_rows)}")
    tou = np.zeros(horizon)
    load_dist: list[DistributionSpec] = []
    res_dist: list[DistributionSpec] = []
    for k, row in enumerate(ts_rows[:horizon]):
        where = f"timeseries.csv row {k}"
        tou[k] = _parse_float(row.get("tou_price"), where + " tou_price", issues)
        load_dist.append(_dist_from_row(
            row.get("load_family"),
            _parse_float(row.get("load_mean"), where + " load_mean", issues),
            _parse_float(row.get("load_sigma", "0") or "0", where + " load_sigma", issues),
            where, issues))
        res_dist.append(_dist_from_row(
            row.get("res_family"),
            _parse_float(row.get("res_mean", "0") or "0", where + " res_mean", issues),
            _parse_float(row.get("res_sigma", "0") or "0", where + " res_sigma", issues),
            where, issues))
    while len(load_dist) < horizon:
        load_dist.append(DistributionSpec.point(0.0))
        res_dist.append(DistributionSpec.point(0.0))

    series: dict[tuple[str, str], dict[int, float]] = {}
    sp = root / "unit_series.csv"
    if sp.exists():
        for k, row in enumerate(_read_csv(sp)):
            where = f"unit_series.csv row {k}"
            fieldname = (row.get("field") or "").strip()
            if fieldname not in _SERIES_FIELDS:
                issues.append(f"{where}: unknown field {fieldname!r}")
                continue
            t = int(_parse_float(row.get("t"), where + " t", issues))
            series.setdefault((row.get("unit_id", ""), fieldname), {})[t] = _parse_float(
                row.get("value"), where + " value", issues)

    ddu_by_unit: dict[str, DduSpec] = {}
    for k, row in enumerate(_read_csv(root / "ddu.csv")):
        uid = row.get("unit_id", "")
        kw = {}
        for f in _DDU_FIELDS:
            raw = row.get(f)
            if raw in (None, ""):
                continue
            kw[f] = raw.strip() if f in ("h_family", "discomfort_variant") else _parse_float(
                raw, f"ddu.csv row {k} {f}", issues)
        try:
            ddu_by_unit[uid] = DduSpec(**kw)
        except Exception as exc:
            issues.append(f"ddu.csv row {k} (unit {uid}): {exc}")

    diu_cfg = cfg.get("diu") or {}
    n_samples = int(diu_cfg.get("samples", 10_000))
    diu_seed = int(diu_cfg.get("seed", 0))
    gamma = float(cfg.get("gamma", 0.05))

    units: list[UnitSpec] = []
    for k, row in enumerate(_read_csv(root / "units.csv")):
        uid = row.get("unit_id", f"row{k}")
        where = f"units.csv row {k} (unit {uid})"
        kw: dict = {"kind": (row.get("kind") or "").strip(), "unit_id": uid}
        for f in _DEV_FIELDS:
            raw = row.get(f)
            if raw not in (None, ""):
                kw[f] = _parse_float(raw, f"{where} {f}", issues)
        for f in _SERIES_FIELDS:
            vals = series.get((uid, f))
            if vals:
                arr = np.full(horizon, math.nan)
                for t, v in vals.items():
                    if 0 <= t < horizon:
                        arr[t] = v
                    else:
                        issues.append(f"unit_series.csv: unit {uid} {f}: t={t} out of range")
                if np.any(np.isnan(arr)):
                    issues.append(f"unit_series.csv: unit {uid} {f}: incomplete series")
                else:
                    kw[f] = arr
        try:
            dev = DeviceDescription(**kw)
            params = map_device_to_ges(dev, dt, horizon)
        except Exception as exc:
            issues.append(f"{where}: {exc}")
            continue

        unit_dists: dict[str, DistributionSpec] = {}
        frac = _parse_float(row.get("ident_sigma_frac") or "0", where, issues)
        if frac > 0:
            target = "thermal_resistance" if dev.kind.startswith("TCL") else "s_capacity"
            center = getattr(dev, target)
            unit_dists[target] = DistributionSpec.truncated_normal(
                center, frac * center, center * (1 - 2 * frac), center * (1 + 2 * frac))
        bsig = _parse_float(row.get("baseline_sigma") or "0", where, issues)
        baseline_dist = None
        if bsig > 0:
            base = kw.get("baseline_power")
            if base is None:
                issues.append(f"{where}: baseline_sigma given without baseline_power")
            else:
                base = np.broadcast_to(np.asarray(base, dtype=float), (horizon,))
                baseline_dist = [
                    _dist_from_row("lognormal", float(b), bsig * max(float(b), 1e-9), where, issues)
                    for b in base
                ]

        price_c = _parse_float(row.get("price_c") or "0.3", where + " price_c", issues)
        price_d = _parse_float(row.get("price_d") or "0.6", where + " price_d", issues)
        ddu = ddu_by_unit.get(uid)
        if ddu is None:
            issues.append(f"ddu.csv: no row for unit {uid}")
            ddu = DduSpec()
        stats = None
        if compute_stats and (unit_dists or baseline_dist is not None):
            stats = propagate_diu(
                unit_dists, dev, baseline_dist, dt, horizon,
                n=n_samples, seed=diu_seed, gamma=gamma)
        units.append(UnitSpec(
            dev=dev, params=params, ddu=ddu,
            price_c=np.full(horizon, price_c), price_d=np.full(horizon, price_d),
            unit_dists=unit_dists, baseline_dist=baseline_dist, stats=stats))

    window = None
    if cfg.get("dispatch_window") is not None:
        window = np.zeros(horizon, dtype=bool)
        for t in cfg["dispatch_window"]:
            if 0 <= int(t) < horizon:
                window[int(t)] = True
            else:
                issues.append(f"scenario.yaml: dispatch_window step {t} out of range")

    reserve = None
    if cfg.get("reserve"):
        try:
            reserve = ReserveSpec(**{k: v for k, v in cfg["reserve"].items()})
        except TypeError as exc:
            issues.append(f"scenario.yaml reserve: {exc}")

    try:
        shape = parse_shape(str(cfg.get("shape_class", "unimodal")), cfg.get("shape_nu"))
    except Exception as exc:
        issues.append(f"scenario.yaml shape_class: {exc}")
        shape = parse_shape("unimodal")

    bundle = ScenarioBundle(
        units=units,
        horizon=horizon,
        dt=dt,
        tou_price=tou,
        load_dist=load_dist,
        res_dist=res_dist,
        grid_cap=float(cfg.get("grid_cap", 1e6)),
        gamma=gamma,
        gamma_balance=(float(cfg["gamma_balance"]) if cfg.get("gamma_balance") is not None else None),
        dispatch_window=window,
        model_mode=str(cfg.get("model_mode", "M3")),
        shape_class=shape,
        reserve=reserve,
    )
    try:
        bundle.validate()
    except ValidationError as exc:
        issues.extend(exc.issues)
    if issues:
        raise ValidationError(issues)
    return bundle


# ---------------------------------------------------------------------------
# Serialization


def serialize(bundle: ScenarioBundle, path, diu_samples: int = 10_000, diu_seed: int = 0) -> None:
    """Write a scenario directory that load_scenario reads back equal."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    cfg = {
        "horizon": int(bundle.horizon),
        "dt": float(bundle.dt),
        "gamma": float(bundle.gamma),
        "gamma_balance": float(bundle.gamma_balance),
        "grid_cap": float(bundle.grid_cap),
        "model_mode": bundle.model_mode,
        "shape_class": bundle.shape_class.kind,
        "diu": {"samples": diu_samples, "seed": diu_seed},
    }
    if bundle.shape_class.nu is not None:
        cfg["shape_nu"] = float(bundle.shape_class.nu)
    if bundle.dispatch_window is not None:
        cfg["dispatch_window"] = [int(t) for t in np.flatnonzero(bundle.dispatch_window)]
    if bundle.reserve is not None:
        r = bundle.reserve
        cfg["reserve"] = {
            "mode": r.mode, "a": r.a, "b": r.b,
            **({"s1_price": r.s1_price} if r.s1_price is not None else {}),
        }
    (root / "scenario.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))

    with open(root / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "tou_price", "load_family", "load_mean", "load_sigma",
                    "res_family", "res_mean", "res_sigma"])
        from . import distributions as dist
        for t in range(bundle.horizon):
            ld, rd_ = bundle.load_dist[t], bundle.res_dist[t]
            w.writerow([t, fmt(bundle.tou_price[t]),
                        _family_out(ld), fmt(dist.mean(ld)), fmt(dist.std(ld)),
                        _family_out(rd_), fmt(dist.mean(rd_)), fmt(dist.std(rd_))])

    unit_rows = []
    series_rows = []
    for u in bundle.units:
        dev = u.dev
        row = {"unit_id": dev.unit_id, "kind": dev.kind,
               "price_c": fmt(u.price_c[0]), "price_d": fmt(u.price_d[0])}
        for f in _DEV_FIELDS:
            v = getattr(dev, f, None)
            if v is None:
                continue
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            if arr.size == 1:
                if math.isfinite(arr[0]):
                    row[f] = fmt(arr[0])
            else:
                for t in range(arr.size):
                    series_rows.append([dev.unit_id, f, t, fmt(arr[t])])
        for f in ("t_in_baseline", "ev_base_p_c", "ev_base_p_d", "ev_dsoc"):
            v = getattr(dev, f, None)
            if v is not None:
                arr = np.broadcast_to(np.asarray(v, dtype=float), (bundle.horizon,))
                for t in range(bundle.horizon):
                    series_rows.append([dev.unit_id, f, t, fmt(arr[t])])
        if "ident_sigma_frac" not in row and u.unit_dists:
            target = "thermal_resistance" if dev.kind.startswith("TCL") else "s_capacity"
            spec = u.unit_dists.get(target)
            if spec is not None and spec.family == "truncated_normal":
                row["ident_sigma_frac"] = fmt(spec.params["sigma"] / spec.params["mu"])
        if u.baseline_dist is not None:
            first = u.baseline_dist[0]
            if first.family == "lognormal":
                import math as _m
                mean0 = _m.exp(first.params["mu"] + first.params["sigma"] ** 2 / 2)
                sd0 = mean0 * _m.sqrt(_m.expm1(first.params["sigma"] ** 2))
                row["baseline_sigma"] = fmt(sd0 / mean0)
        unit_rows.append(row)

    cols = ["unit_id", "kind"] + [f for f in _DEV_FIELDS] + list(_UNC_FIELDS) + ["price_c", "price_d"]
    with open(root / "units.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in unit_rows:
            w.writerow(row)

    with open(root / "ddu.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id"] + list(_DDU_FIELDS))
        for u in bundle.units:
            d = u.ddu
            w.writerow([u.unit_id] + [
                d.h_family if f == "h_family" else
                d.discomfort_variant if f == "discomfort_variant" else
                fmt(getattr(d, f)) for f in _DDU_FIELDS])

    if series_rows:
        with open(root / "unit_series.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["unit_id", "field", "t", "value"])
            w.writerows(series_rows)


def _family_out(spec: DistributionSpec) -> str:
    return {"point": "point", "normal": "normal", "lognormal": "lognormal",
            "truncated_normal": "truncated_normal"}.get(spec.family, spec.family)
