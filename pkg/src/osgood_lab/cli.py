"""Command-line entry point ``osgood-lab``.

Preset runs::

    osgood-lab list
    osgood-lab euler-steady --set n=128 --out runs/steady
    osgood-lab compare runs/a runs/b

Tools::

    osgood-lab modulus eval --modulus log-lipschitz --z 1e-3 1e-2
    osgood-lab lemma-lp --n 2 --pmax 256
    osgood-lab seminorm --gamma 1 --n 512
    osgood-lab flow trace --field hyperbolic --x 1 -1 --t 1
    osgood-lab flow certify --field hyperbolic --pairs 10
    osgood-lab transport run --set shape=sin --out runs/transport
    osgood-lab euler run --set n=128 --set T=0.5 --out runs/euler
    osgood-lab stability interp --s 0.5
    osgood-lab stability lightcone --set n=256 --out runs/cone

Preset runs exit with status 0 exactly when every check passes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import euler2d as E
from . import harness as H
from . import modulus as mod
from . import presets as P
from .errors import ConfigError
from .fields import Grid, ScalarField2D, save_field


def _spec(name, path=None):
    if path:
        return mod.ModulusSpec.from_file(path)
    if name == "lipschitz":
        return mod.ModulusSpec.lipschitz()
    if name in ("log-lipschitz", "loglip"):
        return mod.ModulusSpec.log_lipschitz()
    if name.startswith("chain:"):
        return mod.ModulusSpec.iterated_log_chain(int(name.split(":", 1)[1]))
    raise ConfigError(f"unknown modulus {name!r}; use lipschitz, log-lipschitz, chain:N or --file")


def _emit(text, out=None, name=None):
    if out is None:
        sys.stdout.write(text)
    else:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


def _report(manifest, out):
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {manifest.preset}.{name}")
    if out:
        print(f"outputs written to {out}")
    return 0 if manifest.passed else 1


# ---------------------------------------------------------------------------
# presets


def cmd_list(args):
    for name, anchor, summary in H.list_presets():
        print(f"{name:24s} {anchor}  ({summary})")
    return 0


def cmd_preset(args):
    raw = cfgmod.parse_text(Path(args.config).read_text()) if args.config else {}
    raw.update(cfgmod.parse_overrides(args.set))
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    config = cfgmod.resolve(args.preset, P.get(args.preset).schema, raw)
    out = args.out or config.out
    return _report(H.run_preset(config, out), out)


def cmd_compare(args):
    report = H.compare_runs(args.a, args.b)
    print("metric,a,b,rel_diff")
    for k, v in report.items():
        print(f"{k},{v['a']!r},{v['b']!r},{v['rel_diff']!r}")
    return 0


def cmd_describe(args):
    for key, kind, default, doc in cfgmod.describe_schema(P.get(args.preset).schema):
        value = ", ".join(map(str, default)) if isinstance(default, tuple) else default
        print(f"{key} = {value}    # {kind}{': ' + doc if doc else ''}")
    return 0


# ---------------------------------------------------------------------------
# tools


def cmd_modulus_eval(args):
    spec = _spec(args.modulus, args.file)
    if args.z:
        z = np.asarray(args.z, dtype=float)
    else:
        z = np.geomspace(args.zmin, args.zmax or 0.999 * spec.m_L, args.count)
    rows = [{"z": a, "L": b, "M": c, "R": d} for a, b, c, d in
            zip(z, mod.eval_L(spec, z), mod.eval_M(spec, z), mod.eval_R(spec, z))]
    _emit(H.format_csv(rows), args.out, "modulus.csv")
    return 0


def cmd_lemma_lp(args):
    if args.n is None:
        args.preset = "lemma-lp"
        args.config = None
        args.seed = None
        return cmd_preset(args)
    from .seminorm import iterated_log_lp_growth

    p_grid = [2.0**k for k in range(1, int(round(math.log2(args.pmax))) + 1)]
    rows = [{"p": r.p, "norm": r.norm, "ratio": r.ratio} for r in iterated_log_lp_growth(args.n, p_grid)]
    _emit(H.format_csv(rows), args.out, "lemma_lp.csv")
    return 0


def cmd_seminorm(args):
    from .profile import SingularProfile
    from .seminorm import local_seminorm

    spec = _spec(args.modulus)
    prof = SingularProfile((0.0, 0.0), spec, gamma=args.amplitude, shape=args.shape,
                           shape_param=args.shape_param, r_cut=2 * args.r_max, r_end=3 * args.r_max)
    grid = Grid.box((0.0, 0.0), 1.02 * args.r_max, args.n)
    f = ScalarField2D.from_function(grid, prof)
    radii = np.geomspace(args.r_max, args.r_max / args.span, args.n_radii)
    tab = local_seminorm(f, spec, (0.0, 0.0), args.gamma, radii, center_value=0.0)
    rows = [{"r": r, "value": v} for r, v in tab.rows()]
    _emit(H.format_csv(rows), args.out, "seminorm.csv")
    print(f"# limit {tab.limit!r} ({tab.trend})", file=sys.stderr)
    return 0


def _velocity(name, K=64):
    from .flow import BahouriChemin, Hyperbolic, RigidRotation

    table = {"hyperbolic": Hyperbolic, "rigid": RigidRotation, "bahouri-chemin": lambda: BahouriChemin(K)}
    if name not in table:
        raise ConfigError(f"unknown field {name!r}; choose from {sorted(table)}")
    return table[name]()


def cmd_flow_trace(args):
    from .flow import integrate_flow

    tr = integrate_flow(_velocity(args.field, args.K), np.asarray(args.x, dtype=float), args.t, tol=args.tol)
    pos = tr.positions.reshape(len(tr.times), -1)
    rows = [{"t": t, "x1": x[0], "x2": x[1]} for t, x in zip(tr.times, pos)]
    _emit(H.format_csv(rows), args.out, "trajectory.csv")
    return 0


def cmd_flow_certify(args):
    from .flow import certify_pairs

    rng = np.random.default_rng(args.seed)
    xs = rng.uniform(-args.box, args.box, (args.pairs, 2))
    ys = rng.uniform(-args.box, args.box, (args.pairs, 2))
    certs = certify_pairs(_velocity(args.field, args.K), _spec(args.modulus), xs, ys, args.t, tol=args.tol)
    lines = "".join(json.dumps(H._plain(c.as_dict()), sort_keys=True) + "\n" for c in certs)
    _emit(lines, args.out, "certificates.jsonl")
    return 0 if all(c.passed for c in certs) else 1


TRANSPORT_SCHEMA = {
    "field": cfgmod.Param("str", "hyperbolic"),
    "profile": cfgmod.Param("str", "log-lipschitz", "modulus of the profile"),
    "shape": cfgmod.Param("str", "identity"),
    "shape_param": cfgmod.Param("float", 1.0),
    "x1": cfgmod.Param("float", 0.3), "x2": cfgmod.Param("float", 0.1),
    "background_amplitude": cfgmod.Param("float", 0.3),
    "t": cfgmod.Param("float", 0.5),
    "n": cfgmod.Param("int", 256),
    "tol": cfgmod.Param("float", 1e-12),
    "bound_slack": cfgmod.Param("float", 0.05),
}


def cmd_transport_run(args):
    from .flow import flow_map
    from .profile import SingularProfile
    from .transport import InitialData, local_structure_run, solve_transport

    p = cfgmod.resolve("transport", TRANSPORT_SCHEMA, cfgmod.parse_overrides(args.set)).params
    u = _velocity(p["field"])
    spec = _spec(p["profile"])
    prof = SingularProfile((p["x1"], p["x2"]), spec, shape=p["shape"], shape_param=p["shape_param"])
    amp = p["background_amplitude"]

    def background(x):
        return amp * np.cos(x[..., 0] + 2 * x[..., 1])

    rec = local_structure_run(u, prof, background, p["t"], n=p["n"], tol=p["tol"],
                              bound_slack=p["bound_slack"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "remainder.json").write_text(json.dumps(H._plain(rec.as_dict()), indent=2, sort_keys=True) + "\n")
    c = flow_map(u, np.asarray(prof.center), p["t"], tol=p["tol"])
    grid = Grid.box(c, prof.r_end, p["n"])
    save_field(out / "theta", solve_transport(u, InitialData(prof, background), p["t"], grid, tol=p["tol"]))
    print(f"{'PASS' if rec.passed else 'FAIL'}  sup|b| = {rec.sup_b:.6g} <= {rec.bound:.6g}")
    return 0 if rec.passed else 1


EULER_SCHEMA = {
    "n": cfgmod.Param("int", 256), "dt": cfgmod.Param("float", 0.02), "T": cfgmod.Param("float", 1.0),
    "vortices": cfgmod.Param("strs", ("1.0@3.141592653589793:3.141592653589793",),
                             "gamma@x:y entries, comma separated"),
    "radius": cfgmod.Param("float", math.pi / 4),
    "shape": cfgmod.Param("str", "identity"),
    "background": cfgmod.Param("str", "none", "none, patch or sign"),
    "theta": cfgmod.Param("str", "const"),
    "monitor_every": cfgmod.Param("int", 10),
}


def _vortex(entry, radius, shape):
    try:
        g, pos = entry.split("@")
        x, y = pos.split(":")
        return E.loglog_vortex((float(x), float(y)), float(g), radius, shape=shape)
    except ValueError:
        raise ConfigError(f"vortex entry {entry!r} is not gamma@x:y") from None


def cmd_euler_run(args):
    p = cfgmod.resolve("euler", EULER_SCHEMA, cfgmod.parse_overrides(args.set)).params
    vortices = [_vortex(v, p["radius"], p["shape"]) for v in p["vortices"]]
    c = np.asarray(vortices[0].center)
    bg = {"none": lambda: None,
          "patch": lambda: E.patch_background(c + (0.6, 0.2), 0.25, 0.06),
          "sign": lambda: E.sign_background(c, 3 * E.TWO_PI / p["n"])}
    if p["background"] not in bg:
        raise ConfigError(f"unknown background {p['background']!r}")
    system = E.VortexSystem(vortices, bg[p["background"]]())
    run = E.run_singular_vortex(system, p["T"], p["dt"], n=p["n"], monitor_every=p["monitor_every"],
                                theta_name=p["theta"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "centers.csv").write_text(H.format_csv(run.center_rows()))
    (out / "norms.csv").write_text(H.format_csv(run.norm_rows()))
    save_field(out / "vorticity", run.state.field())
    print(f"completed {run.meta['steps']} steps; final sup|b| = {run.monitors[-1].sup_b:.6g}")
    return 0


def cmd_stability_interp(args):
    from .stability import random_band_limited, sobolev_interpolation_check

    f = random_band_limited(args.trials, args.n, seed=args.seed)
    rows = []
    for s in args.s:
        for r in sobolev_interpolation_check(f, s, args.k_max):
            rows.append({"s": s, "k": r.k, "lhs": float(np.max(r.lhs)), "rhs": float(np.max(r.rhs)),
                         "slack": float(np.min(r.slack)), "violations": r.violations})
    _emit(H.format_csv(rows), args.out, "interpolation.csv")
    return 0 if all(r["violations"] == 0 for r in rows) else 1


def cmd_stability_lightcone(args):
    args.preset, args.config, args.seed = "lightcone", None, None
    return cmd_preset(args)


# ---------------------------------------------------------------------------


def _add_preset_args(sp):
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a parameter")
    sp.add_argument("--out", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="osgood-lab", description="Osgood flow and singular Euler laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list presets").set_defaults(func=cmd_list)
    sp = sub.add_parser("describe", help="print a preset's parameters as a config file")
    sp.add_argument("preset")
    sp.set_defaults(func=cmd_describe)
    sp = sub.add_parser("compare", help="relative metric differences of two runs")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(func=cmd_compare)

    for name in P.names():
        if name == "lemma-lp":
            continue
        sp = sub.add_parser(name, help=P.get(name).anchor)
        _add_preset_args(sp)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--seed", type=int)
        sp.set_defaults(func=cmd_preset, preset=name)

    sp = sub.add_parser("lemma-lp", help="iterated-log L^p table (or the preset without --n)")
    sp.add_argument("--n", type=int, help="iterated-log depth")
    sp.add_argument("--pmax", type=float, default=256.0)
    _add_preset_args(sp)
    sp.set_defaults(func=cmd_lemma_lp)

    mp = sub.add_parser("modulus").add_subparsers(dest="action", required=True)
    sp = mp.add_parser("eval", help="tabulate L, M and R")
    sp.add_argument("--modulus", default="log-lipschitz")
    sp.add_argument("--file", help="two-column z, L(z) table")
    sp.add_argument("--z", type=float, nargs="+")
    sp.add_argument("--zmin", type=float, default=1e-8)
    sp.add_argument("--zmax", type=float)
    sp.add_argument("--count", type=int, default=17)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_modulus_eval)

    sp = sub.add_parser("seminorm", help="local seminorm table of a singular profile")
    sp.add_argument("--modulus", default="log-lipschitz")
    sp.add_argument("--shape", default="identity")
    sp.add_argument("--shape-param", type=float, default=1.0)
    sp.add_argument("--amplitude", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--r-max", type=float, default=0.02)
    sp.add_argument("--span", type=float, default=16.0)
    sp.add_argument("--n-radii", type=int, default=5)
    sp.add_argument("--n", type=int, default=512)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_seminorm)

    fp = sub.add_parser("flow").add_subparsers(dest="action", required=True)
    for action, func in (("trace", cmd_flow_trace), ("certify", cmd_flow_certify)):
        sp = fp.add_parser(action)
        sp.add_argument("--field", default="hyperbolic")
        sp.add_argument("--K", type=int, default=64)
        sp.add_argument("--t", type=float, default=1.0)
        sp.add_argument("--tol", type=float, default=1e-12)
        sp.add_argument("--out")
        sp.set_defaults(func=func)
        if action == "trace":
            sp.add_argument("--x", type=float, nargs=2, required=True)
        else:
            sp.add_argument("--modulus", default="lipschitz")
            sp.add_argument("--pairs", type=int, default=100)
            sp.add_argument("--box", type=float, default=0.1)
            sp.add_argument("--seed", type=int, default=0)

    tp = sub.add_parser("transport").add_subparsers(dest="action", required=True)
    sp = tp.add_parser("run")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_transport_run)

    ep = sub.add_parser("euler").add_subparsers(dest="action", required=True)
    sp = ep.add_parser("run")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_euler_run)

    st = sub.add_parser("stability").add_subparsers(dest="action", required=True)
    sp = st.add_parser("interp")
    sp.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    sp.add_argument("--k-max", type=int, default=4)
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stability_interp)
    sp = st.add_parser("lightcone")
    _add_preset_args(sp)
    sp.set_defaults(func=cmd_stability_lightcone)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"osgood-lab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
