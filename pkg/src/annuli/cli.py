"""Command-line front end.

Every subcommand writes one report (JSON by default, or CSV/text) to stdout or
``--out``.  Exit codes: 0 success, 1 usage, 2 precondition or regime error,
3 accuracy or evaluation failure.

CSV columns
  report  : r, regime, c, K_rho, lower_bound, gap
  minseq  : n, s_n, n_offset, n_half_sq, K_rho_n, gap
  profile : s, phi, q, sPhiPrime, K   (``--dump-profile``)
  verify radial-min : n_nodes, value, rel_err, slope_err
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import AccuracyError, AnnuliError, ConfigError, EvaluationError, PreconditionError
from .functionals import (
    classify_regime,
    energy_radial,
    fikin_bound_check,
    functional_report,
    mean_distortion_radial,
    regime_verdict,
)
from .maps import derivatives, evaluate, harmonicity_residual, nitsche_map, power_map
from .metric import check_regularity, gauss_curvature, metric_from_spec, monotonicity_of_h
from .minseq import DEFAULT_LADDER, limit_study
from .nitsche import (
    AnnulusGeometry,
    NitscheProfile,
    critical_profile,
    nitsche_bound,
    solve_c,
)
from .numerics import QuadratureConfig

SCHEMA_VERSION = 1
SIG = 12

log = logging.getLogger("annuli")

CONFIG_KEYS = {
    "metric", "tau", "sigma", "r", "rel_tol", "abs_tol", "max_levels", "format", "out",
    "seed", "mesh", "iters", "n_list", "n_nodes", "n_maps", "sweep", "map", "grid_n", "s",
    "lo", "hi", "at", "inverse", "dump_profile", "profile",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- formatting

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG}g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    return x


def _cell(x):
    x = _num(x)
    if x is None:
        return "nan"
    if isinstance(x, float):
        return f"{x:.{SIG}g}"
    return str(x)


def render(payload: dict, fmt: str, rows_key: str | None = None) -> str:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    if fmt == "json":
        return json.dumps(_num(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    if fmt == "csv":
        if rows_key and payload.get(rows_key):
            rows = payload[rows_key]
            cols = list(rows[0].keys())
        else:
            rows = [{k: v for k, v in payload.items() if not isinstance(v, (list, dict))}]
            cols = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_cell(row[c]) for c in cols])
        return buf.getvalue()
    for k in sorted(payload):
        v = payload[k]
        if isinstance(v, list) and v and isinstance(v[0], dict):
            buf.write(f"{k}:\n")
            for row in v:
                buf.write("  " + ", ".join(f"{c}={_cell(row[c])}" for c in row) + "\n")
        elif isinstance(v, dict):
            buf.write(f"{k}: " + ", ".join(f"{c}={_cell(x)}" for c, x in v.items()) + "\n")
        else:
            buf.write(f"{k}: {_cell(v)}\n")
    return buf.getvalue()


# ---------------------------------------------------------------- config

def _parse_list(text, cast=float):
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    return [cast(v) for v in str(text).split(",") if v.strip()]


def _parse_mesh(text):
    if isinstance(text, (list, tuple)):
        return int(text[0]), int(text[1])
    try:
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise UsageError(f"mesh must look like 64x128, got {text!r}") from None


def _parse_sweep(text):
    name, _, rng = str(text).partition("=")
    if name.strip() != "r" or not rng:
        raise UsageError("sweep must look like r=START:STOP:STEP")
    try:
        a, b, st = (float(v) for v in rng.split(":"))
    except ValueError:
        raise UsageError(f"bad sweep range {rng!r}") from None
    if st <= 0 or b < a:
        raise UsageError("sweep needs STEP > 0 and STOP >= START")
    n = int(math.floor((b - a) / st + 1e-9)) + 1
    return [round(a + i * st, 12) for i in range(n)]


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _merge(args) -> dict:
    cfg = _load_config(args.config) if args.config else {}
    merged = dict(cfg)
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    # metric flags
    if args.metric_table is not None:
        try:
            with open(args.metric_table, encoding="utf-8") as fh:
                table = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read metric table: {exc}") from None
        merged["metric"] = {"table": table}
    elif args.metric is not None:
        spec = {"name": args.metric}
        if args.metric_params is not None:
            spec["params"] = _parse_list(args.metric_params)
        merged["metric"] = spec
    elif isinstance(merged.get("metric"), str):
        merged["metric"] = {"name": merged["metric"]}
    merged.setdefault("format", "json")
    if merged["format"] not in ("json", "csv", "text"):
        raise UsageError(f"unknown format {merged['format']!r}")
    return merged


def _quad(cfg) -> QuadratureConfig:
    kw = {}
    for key in ("rel_tol", "abs_tol", "max_levels"):
        if key in cfg:
            kw[key] = cfg[key]
    return QuadratureConfig(**kw)


def _metric(cfg):
    if "metric" not in cfg:
        raise UsageError("a metric is required (--metric NAME or config 'metric')")
    return metric_from_spec(cfg["metric"])


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"--{k.replace('_', '-')} is required")
    return [float(cfg[k]) for k in keys]


def _geom(cfg, with_r=True):
    tau, sigma = _need(cfg, "tau", "sigma")
    r = _need(cfg, "r")[0] if with_r else cfg.get("r")
    return AnnulusGeometry(tau, sigma, None if r is None else float(r))


def _base(cfg, geom=None):
    out = {"metric": cfg["metric"]}
    if geom is not None:
        out.update(tau=geom.tau, sigma=geom.sigma)
        if geom.r is not None:
            out["r"] = geom.r
    return out


def _profile_rows(prof: NitscheProfile):
    rows = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for s, phi, q, sp in prof.nodes():
            K = 0.5 * (sp + 1.0 / sp)
            rows.append({"s": s, "phi": phi, "q": q, "sPhiPrime": sp, "K": K})
    return rows


def _write_profile_csv(path, prof):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "phi", "q", "sPhiPrime", "K"])
        for row in _profile_rows(prof):
            w.writerow([_cell(row[c]) for c in ("s", "phi", "q", "sPhiPrime", "K")])


# ---------------------------------------------------------------- commands

def cmd_bound(cfg):
    m = _metric(cfg)
    g = _geom(cfg, with_r=False)
    b = nitsche_bound(m, g, _quad(cfg))
    return {**_base(cfg, g), "r_star": b.r_star, "r_star_err": b.err, "degenerate": b.degenerate}


def _solved(cfg, m, g):
    prof = solve_c(m, g, _quad(cfg))
    return prof


def cmd_solve_c(cfg):
    m = _metric(cfg)
    g = _geom(cfg)
    prof = _solved(cfg, m, g)
    b = nitsche_bound(m, g, _quad(cfg), check=False)
    if cfg.get("dump_profile"):
        _write_profile_csv(cfg["dump_profile"], prof)
    return {
        **_base(cfg, g),
        "c": prof.c,
        "c_err": max(prof.quad_err, 1e-16) * (1 + abs(prof.c)),
        "dc": prof.dc,
        "r_star": b.r_star,
        "r_star_err": b.err,
        "r_achieved": prof.r_achieved,
        "r_achieved_err": prof.r_achieved * (prof.quad_err + prof.interp_err),
        "is_critical": prof.is_critical,
        "nodes": _profile_rows(prof),
    }, "nodes"


def _profile_from_file(path, quad):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read profile {path}: {exc}") from None
    for key in ("metric", "tau", "sigma", "dc"):
        if key not in data:
            raise UsageError(f"profile file lacks {key!r}; write it with solve-c --format json")
    m = metric_from_spec(data["metric"])
    prof = NitscheProfile(m, data["tau"], data["sigma"], data["dc"],
                          is_critical=bool(data.get("is_critical", False)), quad=quad)
    return data, m, prof


def cmd_map_eval(cfg):
    quad = _quad(cfg)
    if cfg.get("profile"):
        data, m, prof = _profile_from_file(cfg["profile"], quad)
        base = {"metric": data["metric"], "tau": data["tau"], "sigma": data["sigma"]}
    else:
        m = _metric(cfg)
        g = _geom(cfg)
        prof = _solved(cfg, m, g)
        base = _base(cfg, g)
    if not cfg.get("at"):
        raise UsageError("--at s,t is required")
    direction = "inverse" if cfg.get("inverse") else "forward"
    fmap = nitsche_map(prof, direction)
    points = []
    for spec in cfg["at"]:
        s, t = _parse_list(spec)
        z = s * complex(math.cos(t), math.sin(t))
        w = evaluate(fmap, z)
        row = {"s": s, "t": t, "re": w.real, "im": w.imag, "modulus": abs(w)}
        lo, hi = fmap.source
        if lo < s < hi:
            d = derivatives(fmap, z)
            row.update(J=d.J, K=d.K, K_polar=d.K_polar)
            if direction == "inverse":
                row["ode_residual"] = harmonicity_residual(fmap, m, s)
        points.append(row)
    return {**base, "direction": direction, "c": prof.c, "points": points}, "points"


def _map_for(cfg, m, g, quad):
    kind = str(cfg.get("map", "nitsche"))
    if kind == "nitsche":
        return nitsche_map(solve_c(m, g, quad)), kind
    if kind == "critical":
        return nitsche_map(critical_profile(m, g, quad)), kind
    if kind.startswith("power:"):
        try:
            alpha = float(kind.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad power exponent in {kind!r}") from None
        return power_map(alpha, (g.tau, g.sigma)), kind
    raise UsageError(f"unknown map {kind!r}; use nitsche, critical or power:ALPHA")


def cmd_distortion(cfg):
    m = _metric(cfg)
    kind = str(cfg.get("map", "nitsche"))
    g = _geom(cfg, with_r=not kind.startswith("power:"))
    quad = _quad(cfg)
    f, kind = _map_for(cfg, m, g, quad)
    K = mean_distortion_radial(f, m, quad)
    return {**_base(cfg, g), "map": kind, "K_rho": K.value, "K_rho_err": K.err,
            "r_target": f.target[0]}


def cmd_energy(cfg):
    m = _metric(cfg)
    kind = str(cfg.get("map", "nitsche"))
    g = _geom(cfg, with_r=not kind.startswith("power:"))
    quad = _quad(cfg)
    f, kind = _map_for(cfg, m, g, quad)
    E = energy_radial(f.inverse(), m, quad)
    return {**_base(cfg, g), "map": kind, "E_rho": E.value, "E_rho_err": E.err,
            "r_source": f.target[0]}


def cmd_report(cfg):
    m = _metric(cfg)
    quad = _quad(cfg)
    if cfg.get("sweep"):
        rs = _parse_sweep(cfg["sweep"])
    else:
        rs = [_need(cfg, "r")[0]]
    tau, sigma = _need(cfg, "tau", "sigma")
    rows = []
    for r in rs:
        g = AnnulusGeometry(tau, sigma, r)
        rep = functional_report(m, g, quad)
        rows.append({"r": r, "regime": rep.regime.value, "c": rep.c, "K_rho": rep.K_rho,
                     "lower_bound": rep.lower_bound, "gap": rep.gap,
                     "quadrature_err": rep.quadrature_err,
                     "E_rho": rep.E_rho, "r_star": rep.r_star})
    return {"metric": cfg["metric"], "tau": tau, "sigma": sigma, "rows": rows}, "rows"


def cmd_minseq(cfg):
    m = _metric(cfg)
    g = _geom(cfg)
    n_list = _parse_list(cfg.get("n_list", DEFAULT_LADDER), int)
    st = limit_study(m, g, n_list, _quad(cfg))
    rows = [{"n": row.n, "s_n": row.s_n, "n_offset": row.n_offset, "n_half_sq": row.n_half_sq,
             "K_rho_n": row.K_rho_n, "gap": row.gap} for row in st.rows]
    return {**_base(cfg, g), "bound": st.bound, "offset_limit": st.offset_limit,
            "half_sq_limit": st.half_sq_limit, "rate_constant": st.rate_constant,
            "gaps_decreasing": st.gaps_decreasing, "rows": rows}, "rows"


def cmd_curvature(cfg):
    m = _metric(cfg)
    if cfg.get("s") is None:
        raise UsageError("--s is required")
    ss = _parse_list(cfg["s"])
    rows = [{"s": s, "K": gauss_curvature(m, s)} for s in ss]
    out = {"metric": cfg["metric"], "rows": rows}
    if cfg.get("lo") is not None and cfg.get("hi") is not None:
        out["monotonicity"] = monotonicity_of_h(m, float(cfg["lo"]), float(cfg["hi"])).value
    return out, "rows"


def cmd_regularity(cfg):
    m = _metric(cfg)
    g = _geom(cfg, with_r=False)
    rep = check_regularity(m, g.tau, g.sigma, int(cfg.get("grid_n", 64)))
    return {**_base(cfg, g), "inf_s_rho": rep.inf_s_rho, "inf_location": rep.inf_location,
            "boundary_limit": rep.boundary_limit, "curvature_bound": rep.curvature_bound,
            "is_regular": rep.is_regular}


def cmd_verify(cfg, what):
    from . import verify as V

    m = _metric(cfg)
    g = _geom(cfg)
    quad = _quad(cfg)
    seed = int(cfg.get("seed", 0))
    base = {**_base(cfg, g), "check": what, "seed": seed}
    if what == "lepo":
        prof = solve_c(m, g, quad) if classify_regime(m, g, quad).value == "nitsche_range" \
            else critical_profile(m, g, quad)
        fmap = nitsche_map(prof)
        own = V.lepo_check(V.radial_test_map(fmap), prof.phi_prime)
        n_maps = int(cfg.get("n_maps", 20))
        rows = []
        for k in range(n_maps):
            tm = V.random_test_map(seed + k, fmap.source, fmap.target, analytic=(k % 2 == 0))
            rep = V.lepo_check(tm, prof.phi_prime)
            rows.append({"seed": seed + k, "derivatives": "analytic" if k % 2 == 0 else "fd",
                         "n_points": rep.n_points, "n_violations": rep.n_violations,
                         "max_violation": rep.max_violation, "min_slack": rep.min_slack_ine,
                         "identity_err": rep.max_identity_err, "disc_err": rep.disc_err})
        ok = own.max_abs_slack <= 1e-8 and all(r["n_violations"] == 0 for r in rows)
        return {**base, "equality_max_slack": own.max_abs_slack, "passed": ok, "maps": rows}, "maps"
    if what == "radial-min":
        n = int(cfg.get("n_nodes", 200))
        prof = solve_c(m, g, quad)
        K = mean_distortion_radial(nitsche_map(prof), m, quad).value
        rows = []
        for k in (n // 4, n // 2, n):
            if k < 2:
                continue
            res = V.radial_discrete_minimize(m, g, k)
            rows.append({"n_nodes": k, "value": res.value, "rel_err": (res.value - K) / K,
                         "slope_err": res.slope_error(prof)})
        errs = [r["rel_err"] for r in rows]
        rate = math.log(errs[-2] / errs[-1]) / math.log(2) if len(errs) > 1 and errs[-1] > 0 else None
        return {**base, "analytic": K, "observed_order": rate,
                "passed": all(e >= -1e-9 for e in errs) and errs[-1] < 1e-4, "rows": rows}, "rows"
    if what == "mesh-min":
        n_r, n_t = _parse_mesh(cfg.get("mesh", "64x128"))
        iters = int(cfg.get("iters", 5000))
        state = V.mesh_energy_minimize(m, g, V.initial_mesh(g, n_r, n_t), iters)
        hist = np.asarray(state.history)
        verdict = regime_verdict(m, g, quad)
        out = {**base, "mesh": f"{n_r}x{n_t}", "energy": state.energy,
               "iterations": state.iterations, "converged": state.converged,
               "stagnated": state.stagnated, "monotone": bool(np.all(np.diff(hist) <= 0)),
               "boundary_error": state.boundary_error(),
               "jacobian_positive_fraction": state.jacobian_positive_fraction(),
               "regime": verdict.regime.value}
        if verdict.regime.value == "nitsche_range":
            h = nitsche_map(solve_c(m, g, quad), "inverse")
            exact = h.radial(np.clip(state.s, *h.source))[0]
            out["profile_sup_err"] = float(np.max(np.abs(state.radial_profile() - exact)))
            out["exact_energy"] = energy_radial(h, m, quad).value
        else:
            from .functionals import fat_lower_bound
            bound = fat_lower_bound(m, g, quad).lower_bound
            lay = V.inner_layer(state)
            out.update(bound=bound, above_bound=bool(state.energy > bound),
                       plateau_fraction=lay.plateau_fraction, layer_width=lay.layer_width)
        return out
    if what == "rotation":
        prof = solve_c(m, g, quad)
        rep = V.rotation_invariance_check(nitsche_map(prof), m, seed)
        return {**base, "invariant": rep.invariant, "K_values": list(rep.K_values),
                "E_values": list(rep.E_values), "residuals": list(rep.residuals),
                "angles": [list(a) for a in rep.angles]}
    if what == "fikin":
        rep = fikin_bound_check(m, g, quad)
        return {**base, "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.holds,
                "curvature_sign": rep.curvature_sign}
    raise UsageError(f"unknown verify check {what!r}")


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="JSON run file; flags override its keys")
    p.add_argument("--metric", help="builtin metric name")
    p.add_argument("--metric-params", help="comma separated metric parameters")
    p.add_argument("--metric-table", help="JSON file with [[s, rho], ...] pairs")
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--max-levels", dest="max_levels", type=int)
    p.add_argument("--format", choices=("json", "csv", "text"))
    p.add_argument("--out", help="write the report here instead of stdout")


def build_parser():
    parser = _Parser(prog="annuli", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"annuli {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    specs = {
        "bound": "smallest admissible inner radius r*",
        "solve-c": "solve for c and tabulate the profile",
        "map-eval": "evaluate the Nitsche map at polar points",
        "distortion": "weighted mean distortion of a forward map",
        "energy": "weighted energy of the inverse map",
        "report": "functional report, optionally swept over r",
        "minseq": "spliced minimising sequence in the fat regime",
        "verify": "independent checks",
        "curvature": "Gauss curvature of a metric",
        "regularity": "regularity test of a metric on a ring",
    }
    ps = {}
    for name, help_ in specs.items():
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        ps[name] = p
    ps["solve-c"].add_argument("--dump-profile", dest="dump_profile",
                               help="CSV with columns s, phi, q, sPhiPrime, K")
    ps["map-eval"].add_argument("--profile", help="JSON written by solve-c")
    ps["map-eval"].add_argument("--at", action="append", help="polar point s,t (repeatable)")
    ps["map-eval"].add_argument("--inverse", action="store_true", default=None)
    for name in ("distortion", "energy"):
        ps[name].add_argument("--map", help="nitsche | critical | power:ALPHA")
    ps["report"].add_argument("--sweep", help="r=START:STOP:STEP")
    ps["minseq"].add_argument("--n-list", dest="n_list", help="comma separated n values")
    ps["verify"].add_argument("check", choices=("lepo", "radial-min", "mesh-min", "rotation", "fikin"))
    ps["verify"].add_argument("--mesh", help="NRxNT, e.g. 64x128")
    ps["verify"].add_argument("--seed", type=int)
    ps["verify"].add_argument("--iters", type=int)
    ps["verify"].add_argument("--n-nodes", dest="n_nodes", type=int)
    ps["verify"].add_argument("--n-maps", dest="n_maps", type=int)
    ps["curvature"].add_argument("--s", help="comma separated radii")
    ps["curvature"].add_argument("--lo", type=float, help="monotonicity range start")
    ps["curvature"].add_argument("--hi", type=float, help="monotonicity range end")
    ps["regularity"].add_argument("--grid-n", dest="grid_n", type=int)
    return parser


COMMANDS = {
    "bound": cmd_bound,
    "solve-c": cmd_solve_c,
    "map-eval": cmd_map_eval,
    "distortion": cmd_distortion,
    "energy": cmd_energy,
    "report": cmd_report,
    "minseq": cmd_minseq,
    "curvature": cmd_curvature,
    "regularity": cmd_regularity,
}


def _setup_logging():
    level = os.environ.get("ANNULI_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _emit(text, cfg):
    if cfg.get("out"):
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        cfg = _merge(args)
        if args.command == "verify":
            result = cmd_verify(cfg, args.check)
        else:
            result = COMMANDS[args.command](cfg)
        payload, rows_key = result if isinstance(result, tuple) else (result, None)
        payload = {"command": args.command, **payload}
        _emit(render(payload, cfg["format"], rows_key), cfg)
        return 0
    except UsageError as exc:
        sys.stderr.write(f"annuli: usage error: {exc}\n")
        return 1
    except (PreconditionError, ConfigError) as exc:
        sys.stderr.write(f"annuli: {type(exc).__name__}: {exc}\n")
        return 2
    except (AccuracyError, EvaluationError) as exc:
        sys.stderr.write(f"annuli: {type(exc).__name__}: {exc}\n")
        return 3
    except AnnuliError as exc:
        sys.stderr.write(f"annuli: {type(exc).__name__}: {exc}\n")
        return 2


def main(argv=None):
    sys.exit(run(argv))
