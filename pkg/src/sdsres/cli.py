"""Command-line entry point: one subcommand per module plus ``verify``.

Artifacts go to ``output_dir`` from the config, or to ``$SDSRES_OUTPUT_DIR``
when set. CSV files carry a header row; JSON files carry ``schema_version``.
Floats are written with ``repr`` so they round-trip exactly, and nothing
time-dependent is written into data files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import traceback
import warnings

import numpy as np

from .config import ConfigError, RunConfig, describe_schema, parse_config

SCHEMA_VERSION = "1"
OUTPUT_ENV = "SDSRES_OUTPUT_DIR"


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": _jsonable(v.real), "im": _jsonable(v.imag)}
    return v


class Output:
    """Writes artifacts under one directory and remembers what it wrote."""

    def __init__(self, cfg: RunConfig, sub: str, quiet: bool = False):
        root = os.environ.get(OUTPUT_ENV) or cfg.output_dir
        self.dir = os.path.join(root, sub)
        os.makedirs(self.dir, exist_ok=True)
        self.quiet = quiet
        self.written: list[str] = []

    def _done(self, path):
        self.written.append(path)
        if not self.quiet:
            print(path)

    def csv(self, name: str, header: list[str], rows) -> str:
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
        self._done(path)
        return path

    def json(self, name: str, payload: dict) -> str:
        path = os.path.join(self.dir, name)
        body = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
        with open(path, "w") as fh:
            json.dump(body, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        self._done(path)
        return path


def _config_dict(cfg: RunConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def _complex_list(text: str) -> list[complex]:
    try:
        return [complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse complex list {text!r}") from None


def polyline(vertices: list[complex], n: int) -> np.ndarray:
    """``n`` samples per segment, endpoints included once."""
    if len(vertices) == 1:
        return np.array(vertices, dtype=complex)
    pts = []
    for a, b in zip(vertices, vertices[1:]):
        pts.extend(a + (b - a) * np.arange(n) / n)
    pts.append(vertices[-1])
    return np.array(pts, dtype=complex)


def _solver(cfg: RunConfig):
    from .background import MetricParams
    from .jost import JostSolver

    return JostSolver(MetricParams(cfg.M, cfg.Lam), strip_safety=cfg.strip_safety)


# subcommands

def cmd_background(cfg, args, out):
    from .background import Background, MetricParams

    p = MetricParams(cfg.M, cfg.Lam)
    bg = Background(p)
    x = np.linspace(-args.extent, args.extent, args.n)
    r, a2, V, W = bg.r(x), bg.alpha2(x), bg.V(x), bg.W(x)
    out.csv("background.csv", ["x", "r", "alpha2", "V", "W"], zip(x, r, a2, V, W))
    out.json("background.json", {
        "config": _config_dict(cfg), "r_minus": p.r_minus, "r_plus": p.r_plus, "r_third": p.r_third,
        "kappa_minus": p.kappa_minus, "kappa_plus": p.kappa_plus, "z0": p.z0,
        "lattice_constant": p.lattice_constant, "sqrt_V0": math.sqrt(float(bg.V(np.array([0.0]))[0])),
    })
    return 0


def cmd_wronskian(cfg, args, out):
    s = _solver(cfg)
    pts = polyline(args.path, args.n)
    rows = []
    for z in pts:
        w = s.w(z, args.ell)
        rows.append((z.real, z.imag, w.real, w.imag, abs(w)))
    out.csv(f"wronskian_l{args.ell}.csv", ["re_lambda", "im_lambda", "re_w", "im_w", "abs_w"], rows)
    return 0


def cmd_gamma(cfg, args, out):
    from .jost import gamma_constant

    s = _solver(cfg)
    g, wp = gamma_constant(s, args.radius)
    g2, _ = gamma_constant(s, args.radius / 2)
    out.json("gamma.json", {"gamma": g, "w_prime_0": wp, "radius": args.radius,
                            "gamma_half_radius": g2, "w0_ell0": s.w(0.0, 0)})
    return 0


def cmd_resonances(cfg, args, out):
    from .spectrum import ResonanceFinder, nearest_lattice, zone_classify

    s = _solver(cfg)
    f = ResonanceFinder(s, newton_tol=cfg.newton_tol, floor=cfg.winding_floor)
    im0 = args.im_min if args.im_min is not None else -0.99 * s.strip_limit
    box = (args.re_min, args.re_max, im0, args.im_max)
    found = f.find_resonances(args.ell, box)
    rows = []
    for r in found:
        mu, d = nearest_lattice(s.params, r.lam, args.ell)
        rows.append((r.lam.real, r.lam.imag, r.order, r.residual, int(r.converged),
                     zone_classify(r.lam, max(args.ell, 1), args.zone_R), d))
    out.csv(f"resonances_l{args.ell}.csv",
            ["re_lambda", "im_lambda", "order", "abs_w", "converged", "zone", "lattice_distance"], rows)
    out.json(f"resonances_l{args.ell}.json", {"ell": args.ell, "box": list(box),
                                               "resonances": [r.as_dict() for r in found]})
    return 0


def cmd_resolvent_scan(cfg, args, out):
    from .resolvent import NearResonanceWarning, Resolvent
    from .spectrum import zone_classify

    res = Resolvent(_solver(cfg), a=args.chi_a or cfg.a, points=cfg.resolvent_points)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearResonanceWarning)
        for z in polyline(args.path, args.n):
            rows.append((z.real, z.imag, res.cutoff_resolvent_norm(z, args.ell),
                         zone_classify(z, max(args.ell, 1), args.zone_R)))
    out.csv(f"resolvent_scan_l{args.ell}.csv", ["re_lambda", "im_lambda", "norm", "zone"], rows)
    return 0


def cmd_projector(cfg, args, out):
    from .resolvent import Resolvent

    res = Resolvent(_solver(cfg), a=cfg.a, points=cfg.resolvent_points)
    lam = complex(args.lam)
    blocks = res.projector(lam, args.ell, radius=args.radius)
    files = {}
    header = ["x_row"] + [repr(float(x)) for x in res.grid]
    for k, B in blocks.items():
        for part, M in (("re", B.real), ("im", B.imag)):
            name = f"projector_l{args.ell}_{k}_{part}.csv"
            out.csv(name, header, ([x, *row] for x, row in zip(res.grid, M)))
            files[f"{k}_{part}"] = name
    sv = {k: np.linalg.svd(B, compute_uv=False)[:3] for k, B in blocks.items()}
    out.json(f"projector_l{args.ell}.json", {"lambda": lam, "ell": args.ell, "radius": args.radius,
                                             "grid_points": len(res.grid), "a": cfg.a, "files": files,
                                             "singular_values": sv})
    return 0


def _initial(grid, kind, width, center, ell):
    from .evolve import FieldState

    g = np.exp(-((grid - center) ** 2) / (2 * width**2))
    z = np.zeros_like(grid)
    return FieldState(grid, g, z, 0.0, ell) if kind == "u" else FieldState(grid, z, g, 0.0, ell)


def _run_evolution(cfg, args):
    from .evolve import WaveEvolver

    ev = WaveEvolver(args.ell, cfg.X, cfg.points, _solver(cfg).bg)
    st = _initial(ev.grid, args.data, args.width, args.center, args.ell)
    fin, tr = ev.evolve(st, args.T or cfg.T, cfg.dt, probe=args.probe)
    return ev, st, fin, tr


def cmd_evolve(cfg, args, out):
    ev, st, fin, tr = _run_evolution(cfg, args)
    k = max(1, args.every)
    out.csv(f"evolve_l{args.ell}.csv", ["t", "probe_u", "probe_ut"],
            zip(tr.t[::k], tr.probe_u[::k], tr.probe_ut[::k]))
    e0, e1 = ev.energies(st), ev.energies(fin)
    out.json(f"evolve_l{args.ell}.json", {"ell": args.ell, "probe_x": tr.probe_x, "dt": cfg.dt,
                                          "E_initial": e0.E, "E_final": e1.E,
                                          "E_mod_initial": e0.E_mod, "E_mod_final": e1.E_mod})
    return 0


def cmd_ringdown(cfg, args, out):
    from .evolve import ringdown_fit

    _, _, _, tr = _run_evolution(cfg, args)
    modes = ringdown_fit(tr.t, tr.probe_u, tuple(args.window), n_modes=args.modes)
    out.json(f"ringdown_l{args.ell}.json", {
        "ell": args.ell, "window": args.window, "probe_x": tr.probe_x,
        "modes": [{"lambda": m.lam, "amplitude": m.amplitude, "residual": m.residual} for m in modes]})
    return 0


def cmd_expand_compare(cfg, args, out):
    from .evolve import WaveEvolver
    from .expand import build_terms, cutoff_grid, residual_decay
    from .resolvent import Resolvent
    from .spectrum import ResonanceFinder, lattice_pseudo_poles

    s = _solver(cfg)
    ev = WaveEvolver(args.ell, cfg.X, cfg.points, s.bg)
    kind = "ut" if args.ell == 0 else "u"
    st = _initial(ev.grid, kind, 1.0, 0.0, args.ell)
    idx = cutoff_grid(ev.grid, cfg.a)
    res = Resolvent(s, a=cfg.a, grid=ev.grid[idx])
    notes = []
    if args.ell == 0:
        lams, sources = [0.0], ["searched"]
    else:
        f = ResonanceFinder(s, newton_tol=cfg.newton_tol, floor=cfg.winding_floor)
        c = s.params.lattice_constant
        mu0 = lattice_pseudo_poles(s.params, args.ell, 0)[0].mu
        found = f.find_resonances(args.ell, (mu0.real - c, mu0.real + c, -0.99 * s.strip_limit, 0.0))
        lams, sources = [r.lam for r in found], ["searched"] * len(found)
        if args.terms == "searched+lattice":
            for lp in lattice_pseudo_poles(s.params, args.ell, 3)[1:]:
                if lp.mu.imag <= -s.strip_limit:
                    notes.append(f"lattice point j={lp.j} at {lp.mu!r} lies outside the Jost strip")
                    continue
                z, ok = f.newton(args.ell, lp.mu, (lp.mu.real - c, lp.mu.real + c, lp.mu.imag, 0.0))
                if ok:
                    lams.append(z)
                    sources.append("lattice")
    mu = args.mu if args.mu is not None else (0.03 if args.ell == 0 else
                                               max((abs(z.imag) for z in lams), default=0.03))
    terms = build_terms(res, args.ell, lams, mu=None, sources=sources)
    T = min(cfg.T, 2 * cfg.X)
    _, tr = ev.evolve(st, T, cfg.dt, snapshot_times=np.arange(0.0, T + 1e-9, args.every))
    rep = residual_decay(tr, terms, res, st, mu=mu)
    out.csv(f"expand_l{args.ell}.csv", ["t", "chi_u_norm", "residual_norm"],
            zip(rep.times, rep.signal, rep.residual))
    out.json(f"expand_l{args.ell}.json", {
        "ell": args.ell, "terms": [{"lambda": t.lam, "source": t.source} for t in terms],
        "fitted_rate": rep.fitted_rate, "mu_target": mu, "signal_rate": -rep.signal_slope,
        "r2": rep.r2, "window": rep.window, "floor": rep.floor, "floor_limited": rep.floor_limited,
        "pass": rep.passes, "notes": notes + rep.notes})
    return 0


def verify_plan(cfg: RunConfig, only=None) -> list[str]:
    from .acceptance import DESCRIPTIONS

    keys = sorted(only or DESCRIPTIONS)
    return [f"criterion {k}: {DESCRIPTIONS[k]}" for k in keys]


def verify_pipeline(cfg: RunConfig, only=None, out: Output | None = None, quiet: bool = False):
    """Run the acceptance criteria in order; returns (exit status, report dict)."""
    from .acceptance import CRITERIA, Check, Context

    ctx = Context(cfg)
    checks: list[Check] = []
    for k in sorted(only or CRITERIA):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                got = CRITERIA[k](ctx)
        except Exception as exc:  # recorded, later criteria still run
            got = [Check(k, "criterion raised", type(exc).__name__, "no error", False,
                         "".join(traceback.format_exception_only(type(exc), exc)).strip())]
        for c in got:
            if not quiet:
                print(c.line(), flush=True)
        checks.extend(got)
    report = {"config": _config_dict(cfg), "checks": [c.as_dict() for c in checks],
              "passed": sum(c.passed for c in checks), "failed": sum(not c.passed for c in checks)}
    if out is not None:
        out.json("report.json", report)
        out.csv("report.csv", ["criterion", "name", "measured", "tolerance", "passed"],
                ([c.criterion, c.name, json.dumps(c.as_dict()["measured"]), c.tolerance, c.passed]
                 for c in checks))
    return (0 if report["failed"] == 0 else 1), report


def cmd_verify(cfg, args, out_factory):
    only = [int(s) for s in args.only.split(",")] if args.only else None
    if args.dry_run:
        print("verify plan (nothing executed):")
        for line in verify_plan(cfg, only):
            print("  " + line)
        root = os.environ.get(OUTPUT_ENV) or cfg.output_dir
        print(f"  report -> {os.path.join(root, 'verify', 'report.json')}")
        return 0
    t0 = time.perf_counter()
    status, report = verify_pipeline(cfg, only, out_factory(), quiet=args.quiet)
    if not args.quiet:
        print(f"{report['passed']} passed, {report['failed']} failed "
              f"in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return status


def _path_arg(p, default):
    p.add_argument("--path", type=_complex_list, default=_complex_list(default),
                   help="comma-separated polyline vertices in the lambda plane, e.g. '0.5-0.05j,3-0.05j'")
    p.add_argument("--n", type=int, default=20, help="samples per polyline segment")


def _evolve_args(p):
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--T", type=float, default=None, help="end time (config T by default)")
    p.add_argument("--data", choices=("u", "ut"), default="u", help="which component holds the Gaussian")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--probe", type=float, default=8.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdsres", description=__doc__.splitlines()[0])
    ap.add_argument("--schema", action="store_true", help="print the config schema and exit")
    sub = ap.add_subparsers(dest="cmd")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        return p

    p = add("background", "metric, coordinate and potentials on an x grid")
    p.add_argument("--extent", type=float, default=30.0)
    p.add_argument("--n", type=int, default=601)
    p = add("wronskian", "w(lambda) along a polyline")
    p.add_argument("--ell", type=int, default=0)
    _path_arg(p, "-1-0.05j,1-0.05j")
    p = add("gamma", "zero-resonance constant for ell = 0")
    p.add_argument("--radius", type=float, default=0.01)
    p = add("resonances", "zeros of w in a box")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--re-min", type=float, default=0.0)
    p.add_argument("--re-max", type=float, default=2.0)
    p.add_argument("--im-min", type=float, default=None, help="defaults to just inside the strip")
    p.add_argument("--im-max", type=float, default=0.0)
    p.add_argument("--zone-R", type=float, default=5.0)
    p = add("resolvent-scan", "cut-off resolvent norms along a polyline")
    p.add_argument("--ell", type=int, default=1)
    _path_arg(p, "0.5j,3+0.5j")
    p.add_argument("--chi-a", type=float, default=None)
    p.add_argument("--zone-R", type=float, default=5.0)
    p = add("projector", "residue projector blocks at a resonance")
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--lam", type=str, default="0")
    p.add_argument("--radius", type=float, default=0.01)
    p = add("evolve", "time-domain evolution; probe series and energies")
    _evolve_args(p)
    p.add_argument("--every", type=int, default=1, help="keep every k-th probe sample")
    p = add("ringdown", "fit damped modes to the probe signal")
    _evolve_args(p)
    p.add_argument("--window", type=float, nargs=2, default=(30.0, 100.0))
    p.add_argument("--modes", type=int, default=1)
    p = add("expand-compare", "resonance expansion against the evolved field")
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--terms", choices=("searched", "searched+lattice"), default="searched")
    p.add_argument("--every", type=float, default=1.0, help="snapshot spacing in time")
    p = add("verify", "run the acceptance criteria")
    p.add_argument("--dry-run", action="store_true", help="print the plan without running it")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    p.add_argument("--quiet", action="store_true")
    return ap


COMMANDS = {
    "background": cmd_background, "wronskian": cmd_wronskian, "gamma": cmd_gamma,
    "resonances": cmd_resonances, "resolvent-scan": cmd_resolvent_scan, "projector": cmd_projector,
    "evolve": cmd_evolve, "ringdown": cmd_ringdown, "expand-compare": cmd_expand_compare,
}


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    text = ""
    if path:
        with open(path) as fh:
            text = fh.read()
    if overrides:
        head = text.rstrip("\n")
        text = (head + "\n" if head else "") + "\n".join(overrides) + "\n"
    return parse_config(text)


def main(argv=None, quiet: bool = False) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.schema:
        print(describe_schema())
        return 0
    if not args.cmd:
        ap.print_help()
        return 2
    try:
        cfg = load_config(args.config, args.set)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sub = args.cmd.replace("-", "_")
    if args.cmd == "verify":
        return cmd_verify(cfg, args, lambda: Output(cfg, "verify", quiet=quiet or args.quiet))
    return COMMANDS[args.cmd](cfg, args, Output(cfg, sub, quiet=quiet))


if __name__ == "__main__":
    sys.exit(main())
