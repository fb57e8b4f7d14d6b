"""Experiment presets: one pipeline per named statement.

Each preset has a parameter schema, a short anchor naming the statement
it exercises, and a ``run`` function that turns a resolved parameter
dict into a :class:`PresetOutput` (checks, scalar metrics, tables).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import euler2d as E
from . import stability as S
from .config import Param
from .errors import ConfigError, DomainError
from .flow import BahouriChemin, Hyperbolic, RigidRotation, bahouri_chemin_axis_table, certify_pairs
from .modulus import ModulusSpec
from .profile import SingularProfile
from .seminorm import iterated_log_lp_growth, relative_changes
from .transport import InitialData, local_structure_run, seminorm_transport_check, sharpness_experiment


@dataclass
class PresetOutput:
    """What a preset pipeline produces."""

    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)
    steps: int = 0


@dataclass(frozen=True)
class Preset:
    name: str
    anchor: str
    schema: dict
    run: object
    summary: str = ""


FIELDS = {"hyperbolic": Hyperbolic, "rigid": RigidRotation}


def _field(name):
    try:
        return FIELDS[name]()
    except KeyError:
        raise DomainError(f"unknown field {name!r}; choose from {sorted(FIELDS)}") from None


# ---------------------------------------------------------------------------
# flow


def run_osgood_certificate(p, rng):
    start = time.perf_counter()
    spec = ModulusSpec.lipschitz()
    u = Hyperbolic()
    n, box, t = p["n_pairs"], p["box"], p["t"]
    stable = np.array([1.0, -1.0]) / math.sqrt(2)
    a = rng.uniform(-box, box, n)
    b = a + rng.choice([-1.0, 1.0], n) * rng.uniform(0.05 * box, box, n)
    on = certify_pairs(u, spec, a[:, None] * stable, b[:, None] * stable, t, tol=p["tol"])
    xs = rng.uniform(-box, box, (n, 2))
    ys = rng.uniform(-box, box, (n, 2))
    off = certify_pairs(u, spec, xs, ys, t, tol=p["tol"])
    elapsed = time.perf_counter() - start
    target = math.exp(-t)
    on_err = max(abs(c.ratio - target) for c in on)
    off_slack = min(c.slack for c in off)
    out = PresetOutput(steps=2 * n)
    out.checks = {
        "stable_line_ratio": on_err <= p["ratio_tol"],
        "off_line_slack": off_slack >= 0.0 and all(c.passed for c in off),
        "runtime": elapsed < p["max_runtime"],
    }
    out.metrics = {"stable_line_max_error": on_err, "off_line_min_slack": off_slack,
                   "mu": on[0].mu, "runtime_s": elapsed}
    keys = ("sep0", "sep_t", "ratio", "lower", "upper", "slack", "passed")
    rows = []
    for kind, certs in (("stable", on), ("random", off)):
        for c in certs:
            rows.append({"set": kind, "x1": c.x[0], "x2": c.x[1], "y1": c.y[0], "y2": c.y[1],
                         **{k: getattr(c, k) for k in keys}})
    out.tables["certificates"] = rows
    return out


# ---------------------------------------------------------------------------
# transport


def run_seminorm_propagation(p, rng):
    spec = ModulusSpec.log_lipschitz()
    x = (p["x1"], p["x2"])
    prof = SingularProfile(x, spec, gamma=p["amplitude"], r_cut=p["r_cut"], r_end=p["r_end"])
    radii = np.geomspace(p["r_max"], p["r_max"] / p["radius_span"], p["n_radii"])
    res = seminorm_transport_check(_field(p["field"]), spec, InitialData(prof), x, p["gamma"], p["t"],
                                   radii, n=p["n"], tolerance=p["tolerance"])
    out = PresetOutput(steps=2 * p["n"] ** 2)
    out.checks = {"seminorm_agreement": res.passed}
    out.metrics = {"initial_limit": res.initial.limit, "transported_limit": res.transported.limit,
                   "agreement": res.agreement, "mu": res.mu,
                   "max_sampled_value": float(np.max(res.transported.values))}
    out.tables["seminorm"] = [
        {"r": r0, "initial": v0, "r_mapped": r1, "transported": v1, "bracket_low": lo, "bracket_high": hi}
        for r0, v0, r1, v1, lo, hi in zip(res.initial.radii, res.initial.values, res.mapped_radii,
                                          res.transported.values, res.bracket_low, res.bracket_high)
    ]
    return out


def run_local_structure(p, rng):
    spec = ModulusSpec.log_lipschitz()
    amp = p["background_amplitude"]

    def background(x):
        return amp * np.cos(x[..., 0] + 2 * x[..., 1])

    rows = []
    for fname in p["fields"]:
        for shape in p["shapes"]:
            param = p["sin_param"] if shape == "sin" else 1.0
            prof = SingularProfile((p["x1"], p["x2"]), spec, shape=shape, shape_param=param)
            for t in p["times"]:
                rec = local_structure_run(_field(fname), prof, background, t, n=p["n"],
                                          bound_slack=p["bound_slack"])
                rows.append({"field": fname, "shape": shape, "t": t, "r": rec.r, "sup_b": rec.sup_b,
                             "b0_sup": rec.b0_sup, "F_slope": rec.F_slope, "lint": rec.log_mu,
                             "bound": rec.bound, "margin": rec.margin, "passed": rec.passed})
    out = PresetOutput(steps=len(rows) * p["n"] ** 2)
    out.checks = {"remainder_bound": all(r["passed"] for r in rows)}
    out.metrics = {"max_sup_b": max(r["sup_b"] for r in rows),
                   "min_margin": min(r["margin"] for r in rows), "cases": len(rows)}
    out.tables["remainder"] = rows
    return out


def _sharpness(kind, p):
    radii = tuple(2.0 ** -k for k in range(p["k_min"], p["k_max"] + 1))
    kw = {"K": p["K"]} if "K" in p else {}
    main = sharpness_experiment(kind, p["shape"], p["t"], radii, **kw)
    ctrl = sharpness_experiment(kind, "identity", p["t"], radii, **kw)
    rows = []
    for m, c in zip(main.rows(), ctrl.rows()):
        rows.append({**m, "control_sup_b": c["sup_b"]})
    return main, ctrl, rows


def run_sharpness_lipschitz(p, rng):
    main, ctrl, rows = _sharpness("lipschitz_superlinear", p)
    out = PresetOutput(steps=2 * len(rows))
    out.checks = {
        "divergence_slope": abs(main.slope - p["slope_target"]) <= p["slope_tol"],
        "control_bounded": float(np.max(ctrl.sup_b)) <= p["t"] + p["control_slack"],
    }
    out.metrics = {"slope": main.slope, "intercept": main.intercept,
                   "control_max": float(np.max(ctrl.sup_b)), "control_slope": ctrl.slope}
    out.tables["divergence"] = rows
    return out


def run_sharpness_loglipschitz(p, rng):
    main, ctrl, rows = _sharpness("loglipschitz_superlinear", p)
    axis = bahouri_chemin_axis_table(p["K"], p["t"], np.geomspace(1e-1, 1e-8, 8))
    # the identity control obeys the linear bound with the field's own constant
    lint = BahouriChemin(p["K"]).modulus_constant(ModulusSpec.log_lipschitz()) * p["t"]
    out = PresetOutput(steps=2 * len(rows) + 8)
    out.checks = {
        "divergence_ratio": main.min_ratio >= p["ratio_floor"] * p["t"],
        "control_bounded": float(np.max(ctrl.sup_b)) <= lint * (1 + p["control_slack"]),
    }
    out.metrics = {"slope": main.slope, "min_ratio": main.min_ratio, "lint": lint,
                   "control_max": float(np.max(ctrl.sup_b)),
                   "axis_C1": axis["C1"], "axis_C2": axis["C2"]}
    out.tables["divergence"] = rows
    out.tables["axis"] = [{"a": a, "exponent_ratio": e, "normalized": z}
                          for a, e, z in zip(axis["positions"], axis["exponent_ratio"], axis["normalized"])]
    return out


# ---------------------------------------------------------------------------
# seminorm lemma


def run_lemma_lp(p, rng):
    p_grid = [2.0 ** k for k in range(1, int(round(math.log2(p["p_max"]))) + 1)]
    rows, in_range, plateau = [], True, True
    for n in p["depths"]:
        growth = iterated_log_lp_growth(n, p_grid)
        change = np.concatenate([relative_changes(growth), [np.nan]])
        for g, c in zip(growth, change):
            ok = p["ratio_low"] <= g.ratio <= p["ratio_high"]
            in_range &= ok
            if g.p >= p["plateau_from"] and np.isfinite(c):
                plateau &= bool(c < p["change_tol"])
            rows.append({"n": n, "p": g.p, "norm": g.norm, "reference": g.reference, "ratio": g.ratio,
                         "change_to_next": c, "in_range": ok})
    out = PresetOutput(steps=len(rows))
    out.checks = {"ratio_range": bool(in_range), "ratio_plateau": bool(plateau)}
    out.metrics = {"min_ratio": min(r["ratio"] for r in rows), "max_ratio": max(r["ratio"] for r in rows),
                   "out_of_range": sum(not r["in_range"] for r in rows)}
    out.tables["lp_growth"] = rows
    return out


# ---------------------------------------------------------------------------
# Euler


def _center(p):
    return (p["cx"], p["cy"])


def taylor_green_drift(n, T=1.0, cfl_fraction=0.5):
    """Relative energy and enstrophy drift for a smooth mode mixture."""
    solver = E.EulerSolver(n)
    X, Y = solver.grid.mesh()
    w = np.cos(X) * np.cos(Y) + 0.3 * np.sin(2 * X + Y) + 0.2 * np.cos(X - 3 * Y)
    st = E.SpectralState.from_vorticity(w - w.mean())
    e0, z0 = E.energy(st), E.enstrophy(st)
    end = solver.run(st, T, cfl_fraction * solver.cfl_dt(st))
    return abs(E.energy(end) / e0 - 1), abs(E.enstrophy(end) / z0 - 1), solver.n_steps


def _euler_tables(run):
    return {"norms": run.norm_rows(), "centers": run.center_rows()}


def run_euler_steady(p, rng):
    system = E.VortexSystem([E.loglog_vortex(_center(p), p["gamma"], p["radius"])])
    run = E.run_singular_vortex(system, p["T"], p["dt"], n=p["n"], monitor_every=p["monitor_every"])
    drift = float(np.max(run.column("drift_l2")))
    shift = float(np.max(np.abs(run.center_path - np.asarray(_center(p)))))
    tg_e, tg_z, tg_steps = taylor_green_drift(p["n_control"])
    out = PresetOutput(steps=run.meta["steps"] + tg_steps)
    out.checks = {"vorticity_drift": drift < p["drift_tol"],
                  "control_energy": tg_e < p["control_tol"],
                  "control_enstrophy": tg_z < p["control_tol"]}
    out.metrics = {"drift_l2": drift, "center_shift": shift, "max_sup_b": float(np.max(run.column("sup_b"))),
                   "control_energy_drift": tg_e, "control_enstrophy_drift": tg_z}
    out.tables.update(_euler_tables(run))
    return out


def run_euler_perturbed(p, rng):
    c = np.asarray(_center(p))
    bg = E.patch_background(c + (p["patch_dx"], p["patch_dy"]), p["patch_half_width"], p["patch_edge"],
                            p["patch_amplitude"])
    system = E.VortexSystem([E.loglog_vortex(tuple(c), p["gamma"], p["radius"])], bg)
    run = E.run_singular_vortex(system, p["T"], p["dt"], n=p["n"], monitor_every=p["monitor_every"],
                                p_grid=p["p_grid"], theta_name=p["theta"])
    bound = run.bound_check(p["theta"], p["p_grid"], p["slack"])
    out = PresetOutput(steps=run.meta["steps"])
    out.checks = {"lp_remainder_bound": all(r[4] for r in bound)}
    out.metrics = {"max_sup_b": float(np.max(run.column("sup_b"))),
                   "max_source_const": float(np.max(run.column("source_const"))),
                   "max_bound_usage": max(r[2] / r[3] for r in bound)}
    out.tables.update(_euler_tables(run))
    out.tables["bound"] = [{"t": t, "p": q, "lhs": a, "rhs": b, "passed": ok} for t, q, a, b, ok in bound]
    return out


def run_euler_two_vortex(p, rng):
    system = E.two_vortex_system(p["d"], p["gamma"], p["radius"], _center(p))
    solver = E.EulerSolver(p["n"])
    eps = E.EPS_CELLS * solver.h
    # half period from the initial oracle angular velocity
    ts, path = E.reduced_vortex_ode(system, 1.0, eps=eps)
    T = p["periods"] * 0.5 * E.rotation_period(ts, path)
    ts, path = E.reduced_vortex_ode(system, T, eps=eps)
    oracle = E.rotation_period(ts, path)
    w0, _ = system.initial_vorticity(solver.grid, eps)
    dt = p["cfl_fraction"] * solver.cfl_dt(E.SpectralState.from_vorticity(w0))
    run = E.run_singular_vortex(system, T, dt, n=p["n"], monitor_every=p["monitor_every"])
    period = E.rotation_period(run.times, run.center_path)
    err = abs(period / oracle - 1)
    out = PresetOutput(steps=run.meta["steps"])
    out.checks = {"rotation_period": err <= p["period_tol"]}
    out.metrics = {"period": period, "oracle_period": oracle, "relative_error": err, "T": T, "dt": dt}
    out.tables.update(_euler_tables(run))
    out.tables["oracle"] = [{"t": float(t), "x0": a[0], "y0": a[1], "x1": b[0], "y1": b[1]}
                            for t, (a, b) in zip(ts, path)]
    return out


def run_euler_breakdown(p, rng):
    rows, trend, steps = [], [], 0
    for n in p["grids"]:
        run = E.breakdown_experiment(p["T"], n=n, monitor_every=p["monitor_every"], theta_name=p["theta"],
                                     with_background=p["with_background"])
        steps += run.meta["steps"]
        for r in run.norm_rows():
            rows.append({"n": n, **r})
        trend.append({"n": n, "final_sup_b": float(run.monitors[-1].sup_b),
                      "max_sup_b": float(np.max(run.column("sup_b"))),
                      "final_yudovich": float(run.monitors[-1].yudovich)})
    out = PresetOutput(steps=steps)
    out.checks = {"completed": len(trend) == len(p["grids"])}
    out.metrics = {f"final_sup_b_n{r['n']}": r["final_sup_b"] for r in trend}
    out.tables["norms"] = rows
    out.tables["trend"] = trend
    return out


# ---------------------------------------------------------------------------
# stability


def run_lightcone(p, rng):
    n = p["n"]
    h = E.TWO_PI / n
    c = _center(p)
    fam = S.RegularizedFamily(E.loglog_vortex(c, p["gamma"], p["radius"]),
                              S.smooth_background(p["background_amplitude"], c, p["quiet_radius"]),
                              (p["eps1_cells"] * h, p["eps2_cells"] * h), n)
    res = S.light_cone_experiment(fam, *fam.eps_list, T=p["T"], speeds=p["speeds"],
                                  monitor_every=p["monitor_every"])
    solver = E.EulerSolver(p["n_gronwall"])
    X, Y = solver.grid.mesh()
    w = np.cos(X) * np.cos(Y) + 0.3 * np.sin(2 * X + Y)
    w -= w.mean()
    a = E.SpectralState.from_vorticity(w)
    b = E.SpectralState.from_vorticity(w + p["gronwall_perturbation"] * np.cos(3 * X - Y))
    tg, dg = S.velocity_difference_series(a, b, solver, p["T_gronwall"], 0.5 * solver.cfl_dt(a), every=2)
    gron = S.gronwall_log_bound_check(tg, dg)
    c_star = max(r.c_star for r in res.rows)
    out = PresetOutput(steps=len(res.rows) * p["monitor_every"] + len(tg))
    out.checks = {"exterior_ratio": res.exterior_ratio_ok(p["exterior_factor"]),
                  "front_speed": res.front_speed_ok(p["front_cells"]),
                  "gronwall_bound": gron.passed}
    out.metrics = {"max_exterior_ratio": max(r.exterior_sup / r.interior_inf for r in res.rows),
                   "front_speed": res.front_speed(), "allowed_speed": 2 * c_star + p["front_cells"] * h,
                   "delta": res.delta, "truncated": res.truncated, "gronwall_K": gron.K}
    out.tables["lightcone"] = [dict(r.__dict__) for r in res.rows]
    out.tables["gronwall"] = [{"t": float(t), "difference": float(d)} for t, d in zip(tg, dg)]
    return out


def run_interp(p, rng):
    rows = S.interpolation_trials(p["n_trials"], p["exponents"], p["k_max"], p["n"], seed=p["seed"])
    table = [dict(zip(("s", "k", "trials", "violations", "min_slack"), r)) for r in rows]
    out = PresetOutput(steps=p["n_trials"])
    out.checks = {"no_violations": all(r["violations"] == 0 for r in table)}
    out.metrics = {"violations": sum(r["violations"] for r in table),
                   "min_slack": min(r["min_slack"] for r in table)}
    out.tables["interpolation"] = table
    return out


# ---------------------------------------------------------------------------
# registry

PI = math.pi
CENTER = {"cx": Param("float", PI, "vortex centre x"), "cy": Param("float", PI, "vortex centre y")}

PRESETS = {}


def _register(name, anchor, run, schema, summary):
    PRESETS[name] = Preset(name, anchor, schema, run, summary)


_register("osgood-certificate", "Osgood two-point separation bracket", run_osgood_certificate, {
    "n_pairs": Param("int", 100, "pairs per set"),
    "t": Param("float", 1.0, "flow time"),
    "box": Param("float", 0.1, "sampling half-width"),
    "tol": Param("float", 1e-12, "trajectory tolerance"),
    "ratio_tol": Param("float", 1e-6, "stable-line ratio tolerance"),
    "max_runtime": Param("float", 5.0, "runtime budget in seconds"),
}, "hyperbolic pairs on and off the stable line")

_register("seminorm-propagation", "Propagation of the local singular seminorm", run_seminorm_propagation, {
    "field": Param("str", "hyperbolic", "hyperbolic or rigid"),
    "x1": Param("float", 0.3), "x2": Param("float", 0.1),
    "amplitude": Param("float", 1.0, "profile strength"),
    "r_cut": Param("float", 0.04), "r_end": Param("float", 0.06),
    "r_max": Param("float", 0.02, "largest seminorm radius"),
    "radius_span": Param("float", 16.0, "largest over smallest radius"),
    "n_radii": Param("int", 5),
    "gamma": Param("float", 1.0, "seminorm exponent"),
    "t": Param("float", 0.5),
    "n": Param("int", 1024, "local grid side"),
    "tolerance": Param("float", 0.10, "relative agreement"),
}, "loglog cusp seminorm before and after transport")

_register("local-structure", "Bounded remainder for transported singular structure", run_local_structure, {
    "fields": Param("strs", ("rigid", "hyperbolic")),
    "shapes": Param("strs", ("identity", "sin")),
    "sin_param": Param("float", 0.3),
    "times": Param("floats", (0.25, 0.5, 1.0)),
    "x1": Param("float", 0.3), "x2": Param("float", 0.1),
    "background_amplitude": Param("float", 0.3),
    "n": Param("int", 256),
    "bound_slack": Param("float", 0.05),
}, "remainder sup bound over a field/shape/time matrix")

_SHARP = {
    "shape": Param("str", "square"),
    "t": Param("float", 1.0),
    "k_min": Param("int", 4, "largest radius is 2^-k_min"),
    "k_max": Param("int", 10, "smallest radius is 2^-k_max"),
    "control_slack": Param("float", 0.05),
}
_register("sharpness-lipschitz", "Sharpness of the linear-growth shape condition (Lipschitz)",
          run_sharpness_lipschitz, {**_SHARP, "slope_target": Param("float", 2.0),
                                    "slope_tol": Param("float", 0.2)},
          "remainder divergence for F(z) = z^2 under a hyperbolic flow")
_register("sharpness-loglipschitz", "Sharpness of the linear-growth shape condition (log-Lipschitz)",
          run_sharpness_loglipschitz, {**_SHARP, "K": Param("int", 64, "Fourier truncation"),
                                       "ratio_floor": Param("float", 0.25, "min sup|b|/M as a fraction of t")},
          "remainder divergence under the cellular log-Lipschitz flow")

_register("lemma-lp", "Iterated-logarithm L^p growth lemma", run_lemma_lp, {
    "depths": Param("ints", (1, 2, 3)),
    "p_max": Param("float", 256.0),
    "ratio_low": Param("float", 0.1), "ratio_high": Param("float", 10.0),
    "plateau_from": Param("float", 64.0, "first p whose doubling change is tested"),
    "change_tol": Param("float", 0.15),
}, "L^p norms of log_n(1/|x|) on the unit ball")

_EULER = {**CENTER, "gamma": Param("float", 1.0), "radius": Param("float", PI / 4),
          "n": Param("int", 256), "T": Param("float", 1.0), "dt": Param("float", 0.02)}
_register("euler-steady", "Stationary singular vortex", run_euler_steady, {
    **_EULER, "monitor_every": Param("int", 10),
    "drift_tol": Param("float", 1e-3), "n_control": Param("int", 128), "control_tol": Param("float", 1e-6),
}, "isolated mollified loglog vortex plus smooth control")
_register("euler-perturbed", "Propagation of singular structure for 2D Euler", run_euler_perturbed, {
    **_EULER, "monitor_every": Param("int", 5),
    "patch_dx": Param("float", 0.6), "patch_dy": Param("float", 0.2),
    "patch_half_width": Param("float", 0.25), "patch_edge": Param("float", 0.06),
    "patch_amplitude": Param("float", 1.0),
    "p_grid": Param("floats", (2.0, 4.0, 8.0, 16.0)),
    "theta": Param("str", "const", "const or log"),
    "slack": Param("float", 0.1),
}, "loglog vortex with a bounded patch; L^p remainder bound")
_register("euler-two-vortex", "Interacting singular vortices follow point-vortex dynamics",
          run_euler_two_vortex, {
              **CENTER, "d": Param("float", PI / 4), "gamma": Param("float", 2.25),
              "radius": Param("float", 0.2), "n": Param("int", 256),
              "periods": Param("float", 1.0, "multiples of a half period"),
              "cfl_fraction": Param("float", 0.8), "monitor_every": Param("int", 100),
              "period_tol": Param("float", 0.05),
          }, "equal pair against the reduced centre ODE")
_register("euler-breakdown", "Breakdown candidate for superlinear shapes", run_euler_breakdown, {
    "grids": Param("ints", (256, 512)), "T": Param("float", 1.0), "monitor_every": Param("int", 10),
    "theta": Param("str", "log*loglog"), "with_background": Param("bool", True),
}, "M log M vortex in a sign field; resolution trend only")

_register("lightcone", "Exterior regularity and finite propagation of differences", run_lightcone, {
    **CENTER, "n": Param("int", 512), "gamma": Param("float", 1.0), "radius": Param("float", PI / 4),
    "background_amplitude": Param("float", 0.1), "quiet_radius": Param("float", 1.2),
    "eps1_cells": Param("float", 16.0), "eps2_cells": Param("float", 24.0),
    "T": Param("float", 0.5), "speeds": Param("float", 2.0), "monitor_every": Param("int", 5),
    "exterior_factor": Param("float", 1e-3), "front_cells": Param("float", 3.0),
    "n_gronwall": Param("int", 64), "T_gronwall": Param("float", 4.0),
    "gronwall_perturbation": Param("float", 1e-3),
}, "two regularizations differing near the singular point")
_register("interp", "Homogeneous Sobolev interpolation inequality", run_interp, {
    "n_trials": Param("int", 10_000), "exponents": Param("floats", (0.25, 0.5, 1.0)),
    "k_max": Param("int", 4), "n": Param("int", 32),
}, "random band-limited fields")


def names():
    return list(PRESETS)


def get(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
