"""``polymet`` command-line interface.

Exit status: 0 when every check passes, 1 when a check fails, 2 on an
error (bad configuration, unreadable input, numerical failure).
"""

import argparse
import configparser
import contextlib
import os
import sys

import numpy as np

from . import chern_weil as cw
from . import cone, gauge, geodesic, scales, spectral
from . import recipes as R
from .config import SUITES, SuiteConfig, load_config, validate_suite
from .connection import curvature, curvature_residuals
from .errors import ConfigInvalid, IoFailure, PolymetError
from .fieldio import load_field, load_polymetric, save_field, save_polymetric
from .grid import TensorField
from .report import emit_report, load_report, to_json
from .rng import generator
from .suites import run_suite


def _threads():
    value = os.environ.get("POLYMET_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError as exc:
        raise ConfigInvalid(f"POLYMET_THREADS must be an integer, got {value!r}") from exc
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(n, 1))


def _floats(text):
    return np.array([float(v) for v in text.split(",")])


def _metric(path):
    f = load_field(path)
    if not isinstance(f, TensorField) or f.covariant_rank != 2:
        raise IoFailure(f"{path} does not hold a covariant 2-tensor")
    return cone.MetricField(f.chart, f.components)


def _metrics(path):
    """A polymetric file or a single metric field, as a list of MetricFields."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"PMP1":
        fields, inertias = load_polymetric(path)
        return [cone.MetricField(f.chart, f.components, cone.Inertia(p, q)) for f, (p, q) in zip(fields, inertias)]
    return [_metric(path)]


def _emit(obj, out):
    text = to_json(obj)
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# suite runs


def _write_run(report, out, fmt, figures):
    data = report.to_dict()
    if out:
        emit_report(report, out, fmt)
        if figures:
            from .plotting import render_report

            render_report(data, os.path.splitext(out)[0])
    if fmt != "text" or not out:
        sys.stdout.write(emit_report(report, None, "text"))
    return 0 if report.overall_pass else 1


def _apply_overrides(cfg, sets):
    from .config import PARAMETERS, TOLERANCES

    for item in sets or []:
        key, _, value = item.partition("=")
        key = key.strip().lower()
        if key in TOLERANCES:
            v = float(value)
            if not v > 0:
                raise ConfigInvalid(f"--set {key}: tolerance must be > 0")
            cfg.tolerances[key] = v
            continue
        suite, _, param = key.partition(".")
        if suite not in PARAMETERS or param not in PARAMETERS[suite]:
            raise ConfigInvalid(f"--set {key}: unknown parameter or tolerance")
        default = PARAMETERS[suite][param]
        v = type(default)(float(value)) if isinstance(default, int) else float(value)
        if not v > 0:
            raise ConfigInvalid(f"--set {key}: parameter must be > 0")
        cfg.parameters.setdefault(suite, {})[param] = v
    return cfg


def cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or cfg.output
    report = run_suite(cfg, args.timestamp)
    return _write_run(report, out, args.format, not args.no_figures)


def cmd_suite(args):
    cfg = _apply_overrides(SuiteConfig(validate_suite(args.command), args.seed), args.set)
    report = run_suite(cfg, args.timestamp)
    return _write_run(report, args.out, args.format, not args.no_figures)


def cmd_report(args):
    data = load_report(args.input)
    text = emit_report(data, args.out, args.format)
    if not args.out:
        sys.stdout.write(text)
    if args.figures:
        from .plotting import render_report

        for p in render_report(data, os.path.join(args.figures, os.path.splitext(os.path.basename(args.input))[0])):
            print(p)
    return 0


# ---------------------------------------------------------------------------
# tools


def tool_cone(args):
    if args.action == "validate":
        fields = [load_field(args.metric)] if args.metric else load_polymetric(args.polymetric)[0]
        declared = [cone.Inertia(*map(int, s.split(","))) for s in args.inertia] if args.inertia else None
        if args.polymetric and not declared:
            declared = [cone.Inertia(p, q) for p, q in load_polymetric(args.polymetric)[1]]
        if declared is None:
            declared = [cone.Inertia.riemannian(fields[0].chart.dim)]
        try:
            cone.validate_polymetric(fields, declared)
            _emit({"valid": True, "components": len(fields)}, args.out)
            return 0
        except cone.InertiaMismatch as exc:
            _emit({"valid": False, "report": exc.report}, args.out)
            return 1
    if args.action == "john":
        pts = np.loadtxt(args.samples, ndmin=2)
        cert = cone.john_metric(pts)
        _emit({"matrix": cert.matrix, "bilipschitz_factor": cert.bilipschitz_factor, "iterations": cert.iterations}, args.out)
        return 0
    return None


def tool_curvature(args):
    if not args.metric:
        return None
    g = _metric(args.metric)
    c = curvature(g, args.scheme)
    s = c.scalar.values
    _emit({"scalar": {"min": s.min(), "max": s.max(), "mean": s.mean()},
           "residuals": curvature_residuals(c), "resolution": list(g.chart.resolution)}, args.report)
    return 0


def tool_gauge(args):
    if args.action == "adjoint":
        rng = generator(args.seed, "gauge", "adjoint")
        from .suites import adjoint_trials

        rows = adjoint_trials(rng, args.trials, args.resolution)
        worst = max(r["residual"] for r in rows)
        _emit({"trials": rows, "max_residual": worst, "pass": worst < 1e-6}, args.out)
        return 0 if worst < 1e-6 else 1
    if args.action == "slice":
        g = _metric(args.metric)
        h = load_field(args.tensor)
        d = gauge.slice_decompose(g, h)
        rec = {k: getattr(d, k) for k in ("residual", "divergence_defect", "bianchi_defect", "orthogonality_defect",
                                           "orthogonality_cosine", "degenerate", "iterations")}
        rec["lie_norm"] = gauge.l2_norm(g, d.lie_part)
        rec["divfree_norm"] = gauge.l2_norm(g, d.divfree_part)
        _emit(rec, args.out)
        return 0
    return None


def tool_geodesic(args):
    if not args.metric:
        return None
    g = _metric(args.metric)
    st = geodesic.exp_map(g, _floats(args.x), _floats(args.v), args.t, args.dt, record=True)
    n = g.dim
    header = ",".join(["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)] + ["speed"])
    buf = [header] + [",".join("%.17g" % v for v in row) for row in st.trajectory]
    text = "\n".join(buf) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


FAMILY_RECIPES = {
    "bumpy_torus": lambda p, res: R.bumpy_torus(p, res),
    "round_sphere": lambda p, res: R.round_sphere((res, 32), radius=p),
}


def load_family_spec(path):
    """``[family]`` section with recipe, parameter values, resolution and functional."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not parser.has_section("family"):
        raise ConfigInvalid(f"{path}: missing [family] section")
    sec = parser["family"]
    allowed = {"recipe", "values", "resolution", "functional"}
    for key in sec:
        if key not in allowed:
            raise ConfigInvalid(f"{path} [family] {key}: unknown key")
    recipe = sec.get("recipe", "bumpy_torus")
    if recipe not in ("bumpy_torus", "round_sphere"):
        raise ConfigInvalid(f"{path} [family] recipe: unknown recipe {recipe!r}")
    values = [float(v) for v in sec.get("values", "0").split(",")]
    res = int(sec.get("resolution", "32"))
    fam = [FAMILY_RECIPES[recipe](v, res) for v in values]
    return fam, values, sec.get("functional", "euler_integral")


def tool_chern(args):
    if args.action == "gauss-bonnet":
        g = _metric(args.metric)
        _emit({"euler_integral": cw.euler_integral(g, args.scheme)}, args.out)
        return 0
    if args.action == "family":
        fam, values, functional = load_family_spec(args.spec)
        fn = (lambda g: cw.euler_integral(g, "spectral")) if functional == "euler_integral" else functional
        r = cw.family_constancy(fam, fn, values)
        _emit(r, args.out)
        return 0 if r["max_deviation"] <= 1e-4 else 1
    return None


def tool_index(args):
    if args.action == "derham":
        g = _metric(args.metric)
        d = spectral.de_rham_index(g)
        cap = args.spectrum_cap
        _emit({"index": d.index, "betti": list(d.betti),
               "spectra": [s[s <= cap] if cap is not None else s[:0] for s in d.spectra]}, args.out)
        return 0
    if args.action == "callias":
        pots = {"tanh": np.tanh, "minus-tanh": lambda x: -np.tanh(x), "constant": lambda x: np.ones_like(x)}
        if args.potential not in pots:
            raise ConfigInvalid(f"unknown potential {args.potential!r}; choose from {', '.join(pots)}")
        r = spectral.callias_index_1d(pots[args.potential], args.L, args.N)
        _emit({"index": r.index, "kernel": r.kernel, "cokernel": r.cokernel, "sign_count": r.sign_count,
               "dirichlet": list(r.dirichlet), "smallest_singular_values": np.sort(r.singular_values)[:6]}, args.out)
        return 0 if r.index == r.sign_count else 1
    if args.action == "family":
        fam, values, _ = load_family_spec(args.spec)
        r = cw.family_constancy(fam, lambda g: spectral.de_rham_index(g).index, values)
        _emit(r, args.out)
        return 0 if r["max_deviation"] == 0 else 1
    return None


def tool_scales(args):
    if args.action == "qi":
        g0, g1 = _metric(args.g0), _metric(args.g1)
        rng = generator(args.seed, "scales", "qi-cli")
        nodes = rng.choice(g0.chart.size, min(args.pairs, g0.chart.size), replace=False)
        pairs = [(int(a), int(b)) for i, a in enumerate(nodes) for b in nodes[i + 1 :]]
        fit = scales.qi_fit(scales.graph_distances(g0, pairs), scales.graph_distances(g1, pairs), args.c_budget)
        _emit({"C": fit.C, "c": fit.c, "violations": fit.residual_violations, "pairs": len(pairs)}, args.out)
        return 0
    if args.action == "warped":
        r = scales.end_growth_diagnostic(args.a, [float(t) for t in args.T.split(",")])
        _emit(r, args.out)
        return 0
    if args.action == "sobolev":
        G, H = _metrics(args.G), _metrics(args.H)
        chart = G[0].chart
        fields = R.band_limited(generator(args.seed, "scales", "sobolev-cli"), chart, count=args.fields)
        r = scales.sobolev_equivalence_constants(G, H, list(fields), args.k)
        _emit({"C1": r["C1"], "C2": r["C2"], "envelope": r["envelope"]}, args.out)
        return 0
    return None


TOOLS = {"cone": tool_cone, "curvature": tool_curvature, "gauge": tool_gauge, "geodesic": tool_geodesic,
         "chern": tool_chern, "index": tool_index, "scales": tool_scales}


def _parse_resolution(text):
    parts = [int(v) for v in str(text).split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


RECIPES = {
    "flat_torus": lambda a: R.flat_torus(_parse_resolution(a.resolution or 32)),
    "bumpy_torus": lambda a: R.bumpy_torus(a.eps, _parse_resolution(a.resolution or 32)),
    "round_sphere": lambda a: R.round_sphere(_parse_resolution(a.resolution or "128,32"), radius=a.radius),
    "half_plane": lambda a: R.half_plane(_parse_resolution(a.resolution or "16,257")),
    "polar_plane": lambda a: R.polar_plane(_parse_resolution(a.resolution or "64,32")),
    "warped_cylinder": lambda a: R.warped_cylinder(a.a, a.length, _parse_resolution(a.resolution or "65,32")),
    "random_torus": lambda a: R.random_smooth_metric(generator(a.seed, "metric", "random_torus"),
                                                     R.torus_chart(_parse_resolution(a.resolution or 32))),
}


def cmd_metric(args):
    if args.recipe == "random_tensor":
        chart = R.torus_chart(_parse_resolution(args.resolution or 32))
        from .suites import _symmetric_field

        save_field(_symmetric_field(generator(args.seed, "metric", "random_tensor"), chart, 3), args.out)
        return 0
    g = RECIPES[args.recipe](args)
    if args.copies > 1:
        save_polymetric([g.tensor] * args.copies, [(g.declared_inertia.positive, g.declared_inertia.negative)] * args.copies, args.out)
    else:
        save_field(g.tensor, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="polymet", description="Numerical geometry of metrics and polymetrics on charts.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the suite(s) named in a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="report path (overrides [run] output)")
    r.add_argument("--format", choices=["json", "csv", "text"], default="json")
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--timestamp", help="fixed timestamp string (for byte-identical reruns)")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="re-render a JSON report")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--format", choices=["json", "csv", "text"], default="text")
    rep.add_argument("--out")
    rep.add_argument("--figures", metavar="DIR", help="also render figures into DIR")
    rep.set_defaults(func=cmd_report)

    m = sub.add_parser("metric", help="write a named metric (or test tensor) to a field file")
    m.add_argument("--recipe", required=True, choices=sorted(list(RECIPES) + ["random_tensor"]))
    m.add_argument("--out", required=True)
    m.add_argument("--resolution")
    m.add_argument("--eps", type=float, default=0.3)
    m.add_argument("--radius", type=float, default=1.0)
    m.add_argument("--a", type=float, default=1.0)
    m.add_argument("--length", type=float, default=5.0)
    m.add_argument("--seed", type=int, default=42)
    m.add_argument("--copies", type=int, default=1, help="write a polymetric of identical components")
    m.set_defaults(func=cmd_metric)

    actions = {
        "cone": ["validate", "john"],
        "curvature": [],
        "gauge": ["adjoint", "slice"],
        "geodesic": [],
        "chern": ["gauss-bonnet", "family"],
        "index": ["derham", "callias", "family"],
        "scales": ["qi", "warped", "sobolev"],
        "all": [],
    }
    for name in list(SUITES) + ["all"]:
        s = sub.add_parser(name, help=f"run the {name} suite, or one of its tools")
        if actions[name]:
            s.add_argument("action", nargs="?", choices=actions[name])
        s.add_argument("--seed", type=int, default=42)
        s.add_argument("--out")
        s.add_argument("--format", choices=["json", "csv", "text"], default="json")
        s.add_argument("--no-figures", action="store_true")
        s.add_argument("--timestamp")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a suite parameter or tolerance")
        s.add_argument("--scheme", default="central4", choices=["central2", "central4", "spectral"])
        if name == "cone":
            s.add_argument("--metric")
            s.add_argument("--polymetric")
            s.add_argument("--inertia", action="append", metavar="P,Q")
            s.add_argument("--samples")
        if name == "curvature":
            s.add_argument("--metric")
            s.add_argument("--report")
        if name == "gauge":
            s.add_argument("--trials", type=int, default=20)
            s.add_argument("--resolution", type=int, default=32)
            s.add_argument("--metric")
            s.add_argument("--tensor")
        if name == "geodesic":
            s.add_argument("--metric")
            s.add_argument("--x", default="0,0")
            s.add_argument("--v", default="1,0")
            s.add_argument("--t", type=float, default=1.0)
            s.add_argument("--dt", type=float, default=1e-3)
        if name == "chern":
            s.add_argument("--metric")
            s.add_argument("--spec")
        if name == "index":
            s.add_argument("--metric")
            s.add_argument("--spec")
            s.add_argument("--potential", default="tanh")
            s.add_argument("--L", type=float, default=20.0)
            s.add_argument("--N", type=int, default=2000)
            s.add_argument("--spectrum-cap", type=float, default=None)
        if name == "scales":
            s.add_argument("--g0")
            s.add_argument("--g1")
            s.add_argument("--pairs", type=int, default=24)
            s.add_argument("--c-budget", type=float, default=0.0)
            s.add_argument("--a", type=float, default=1.0)
            s.add_argument("--T", default="5,10,20")
            s.add_argument("--G")
            s.add_argument("--H")
            s.add_argument("--k", type=int, default=1)
            s.add_argument("--fields", type=int, default=50)
        s.set_defaults(func=_suite_or_tool)
    return p


def _suite_or_tool(args):
    tool = TOOLS.get(args.command)
    if tool is not None:
        if not hasattr(args, "action"):
            args.action = None
        rc = tool(args)
        if rc is not None:
            return rc
    return cmd_suite(args)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _threads():
            return args.func(args)
    except PolymetError as exc:
        print(f"polymet: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"polymet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
