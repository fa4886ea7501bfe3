"""Command line entry point.

Exit codes: 0 success, 2 hypothesis violation or bound not met,
3 numerical failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import critical, energy, orbit
from .poly import MAX_K, SpecError, SystemSpec

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64

PRESETS = ("example1", "example2", "fig2", "fig4")
FAMILY_CHOICES = ("potential", "separable") + tuple(
    f"{k}-{p}" for k in ("potential", "separable") for p in ("odd", "even"))

# Keys a JSON config may carry besides "spec"; each maps to a flag dest.
RUN_KEYS = {
    "epsilon_start", "max_halvings", "global_points", "cluster_points",
    "cluster_decades", "n_jobs", "out_dir", "h", "h_min", "h_max", "n",
    "n_points", "method", "tol", "k", "preset",
}

log = logging.getLogger("critperiods")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    if text is None or text.strip() == "":
        return ()
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _spec_args(p):
    g = p.add_argument_group("system")
    g.add_argument("--config", type=Path, help="JSON file; flags override it")
    g.add_argument("--family", choices=FAMILY_CHOICES)
    g.add_argument("--parity", choices=("odd", "even"))
    g.add_argument("--k", type=int)
    g.add_argument("--betas", type=_floats)
    g.add_argument("--alphas", type=_floats)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--saddle-beta", type=float, dest="saddle_beta")
    g.add_argument("--e-scaled", action="store_true", default=None, dest="e_scaled")
    g.add_argument("--preset", choices=PRESETS)
    p.add_argument("--out-dir", type=Path, dest="out_dir",
                   help="directory for reports and the manifest (default: critperiods_out)")
    p.add_argument("-v", "--verbose", action="store_true")


def _grid_args(p):
    p.add_argument("--global-points", type=int, dest="global_points")
    p.add_argument("--cluster-points", type=int, dest="cluster_points")
    p.add_argument("--cluster-decades", type=int, dest="cluster_decades")
    p.add_argument("--n-jobs", type=int, dest="n_jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="critperiods",
                     description="Critical periods of planar polynomial Hamiltonian centers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="singular points, energy ledger, linearized period")
    _spec_args(p)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("hypothesis", help="check that the critical energies are distinct")
    _spec_args(p)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("period-curve", help="sample T(h) and write CSV")
    _spec_args(p)
    _grid_args(p)
    p.add_argument("--h-min", type=float, dest="h_min")
    p.add_argument("--h-max", type=float, dest="h_max")
    p.add_argument("--n", type=int, help="log-spaced points between --h-min and --h-max")
    p.add_argument("--method", choices=("return-time", "quadrature"))

    p = sub.add_parser("critical-points", help="locate extrema of T(h) at the given epsilon")
    _spec_args(p)
    _grid_args(p)

    p = sub.add_parser("verify", help="check the lower bound on critical periods")
    _spec_args(p)
    _grid_args(p)
    p.add_argument("--epsilon-start", type=float, dest="epsilon_start")
    p.add_argument("--max-halvings", type=int, dest="max_halvings")

    p = sub.add_parser("trace", help="write one closed orbit as CSV")
    _spec_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--n-points", type=int, dest="n_points")

    p = sub.add_parser("reproduce", help="run a preset end to end")
    p.add_argument("preset_name", choices=PRESETS, metavar="preset")
    p.add_argument("--k", type=int)
    p.add_argument("--out-dir", type=Path, dest="out_dir")
    p.add_argument("-v", "--verbose", action="store_true")
    _grid_args(p)
    return parser


# configuration -----------------------------------------------------------

def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    extra = set(doc) - RUN_KEYS - {"spec"}
    if extra:
        raise UsageError(f"unknown config keys: {sorted(extra)}")
    spec = doc.get("spec", {})
    if not isinstance(spec, dict):
        raise UsageError("config 'spec' must be an object")
    return doc


def _resolve(args) -> dict:
    """Merge config file and flags (flags win) into one flat dict."""
    cfg = _load_config(getattr(args, "config", None))
    spec_doc = dict(cfg.pop("spec", {}))
    for key in ("family", "betas", "alphas", "epsilon", "saddle_beta", "e_scaled"):
        v = getattr(args, key, None)
        if v is not None:
            spec_doc[key] = list(v) if isinstance(v, tuple) else v
    for key in RUN_KEYS | {"parity"}:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = str(v) if isinstance(v, Path) else v
    cfg["spec"] = spec_doc
    return cfg


def _grid(m):
    return [float(i) for i in range(1, m + 1)]


def preset_spec(preset: str, k: int | None = None) -> SystemSpec:
    if preset == "example1":
        k = 1 if k is None else k
        _check_k("separable", k, 1)
        return SystemSpec("separable-odd", _grid(k), _grid(k), 0.0, None, True)
    if preset == "example2":
        k = 2 if k is None else k
        _check_k("separable", k, 1)
        return SystemSpec("separable-even", _grid(k - 1), _grid(k - 1), 0.0,
                          float(k * k), True)
    if preset == "fig2":
        return SystemSpec("potential-odd", (1.0, 2.0, 3.0))
    if preset == "fig4":
        return SystemSpec("separable-odd", (2.0,), (4.0,))
    raise UsageError(f"unknown preset {preset!r}")


def _check_k(kind, k, lo):
    if not lo <= k <= MAX_K[kind]:
        raise UsageError(f"k={k} outside the supported range {lo}..{MAX_K[kind]} "
                         f"for {kind} families")


def spec_from_config(cfg: dict) -> SystemSpec:
    doc = dict(cfg["spec"])
    k = cfg.get("k")
    preset = cfg.get("preset")
    if preset is not None:
        base = preset_spec(preset, k)
        fam = doc.get("family")
        if fam is not None and not base.family.startswith(fam):
            raise UsageError(f"preset {preset} is a {base.family} system, not {fam}")
        eps = doc.get("epsilon", 0.0)
        return base.with_epsilon(eps)
    fam = doc.get("family")
    if fam is None:
        raise UsageError("a family (or preset) is required")
    if fam in ("potential", "separable"):
        fam = f"{fam}-{cfg.get('parity') or 'odd'}"
    elif cfg.get("parity") and not fam.endswith(cfg["parity"]):
        raise UsageError(f"family {fam} conflicts with parity {cfg['parity']}")
    doc["family"] = fam
    kind, parity = fam.split("-")
    if k is not None:
        _check_k(kind, k, 0 if kind == "potential" else 1)
        m = k - 1 if parity == "even" else k
        if "betas" not in doc:
            doc["betas"] = _grid(m)
        if kind == "separable" and "alphas" not in doc:
            doc["alphas"] = _grid(m)
        if parity == "even" and doc.get("saddle_beta") is None:
            doc["saddle_beta"] = float(max(k * k, 2))
    spec = SystemSpec.from_dict(doc)
    if k is not None and spec.k != k:
        raise UsageError(f"--k {k} does not match the {len(spec.betas)} betas given "
                         f"(k = {spec.k})")
    return spec


def _grid_kwargs(cfg):
    out = {}
    for key in ("global_points", "cluster_points", "cluster_decades", "n_jobs"):
        if cfg.get(key) is not None:
            if cfg[key] < 1:
                raise UsageError(f"{key} must be positive")
            out[key] = int(cfg[key])
    return out


# output ------------------------------------------------------------------

class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, command, cfg, out_dir):
        self.command = command
        self.cfg = cfg
        self.dir = Path(out_dir or "critperiods_out")
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.t0 = time.perf_counter()
        self.timings = {}

    def path(self, name):
        self.files.append(name)
        return self.dir / name

    def write_json(self, name, doc):
        self.path(name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def lap(self, label, start):
        self.timings[label] = round(time.perf_counter() - start, 6)

    def finish(self, status):
        self.timings["total"] = round(time.perf_counter() - self.t0, 6)
        manifest = {
            "command": self.command,
            "config": self.cfg,
            "exit_code": status,
            "outputs": sorted(self.files),
            "versions": _versions(),
            "timings_seconds": self.timings,
        }
        (self.dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
        return status


def _versions():
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba", "scikit-learn"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _fmt(x):
    return "inf" if math.isinf(x) else f"{x:.12g}"


# commands ----------------------------------------------------------------

def cmd_analyze(cfg, run: Run) -> int:
    spec = spec_from_config(cfg)
    base = spec.with_epsilon(0.0)
    tol = cfg.get("tol", energy.DEFAULT_TOL)
    sing = energy.singular_points(base)
    ledger = energy.critical_energy_ledger(base, strict=False, tol=tol)
    verdict = energy.check_hypothesis_numeric(ledger, tol)
    T0 = orbit.linearized_period(spec)
    print(f"system: {spec.family} k={spec.k} epsilon={spec.epsilon:g}")
    print("singular points (eps = 0):")
    for s in sing:
        print(f"  ({_fmt(s.x)}, {_fmt(s.y)})  {s.kind:<10} H = {s.energy_exact}")
    print("critical energies: " + ", ".join(str(e.h_exact) for e in ledger.entries))
    if spec.even:
        print(f"saddle-loop level: {ledger.upper_exact}")
    print(f"hypothesis: {'distinct' if verdict.distinct else 'VIOLATED'} "
          f"(min gap {verdict.min_gap:.3g})")
    print(f"linearized period: {T0:.15g}")
    run.write_json("analyze.json", {
        "spec": spec.to_dict(),
        "singular_points": [s.to_dict() for s in sing],
        "ledger": ledger.to_dict(),
        "hypothesis": verdict.to_dict(),
        "linearized_period": T0,
    })
    if not verdict.distinct or verdict.dominance_ok is False:
        print(f"witness: {verdict.witness}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_hypothesis(cfg, run: Run) -> int:
    spec = spec_from_config(cfg).with_epsilon(0.0)
    tol = cfg.get("tol", energy.DEFAULT_TOL)
    ledger = energy.critical_energy_ledger(spec, strict=False, tol=tol)
    verdict = energy.check_hypothesis_numeric(ledger, tol)
    doc = {"spec": spec.to_dict(), "ledger": ledger.to_dict(), "numeric": verdict.to_dict()}
    ok = verdict.distinct and verdict.dominance_ok is not False
    if spec.e_scaled and spec.kind == "separable":
        exact = energy.certify(spec)
        doc["exact"] = exact.to_dict()
        ok = ok and exact.distinct and exact.dominance_ok is not False
        print(f"exact certification: {'pass' if exact.distinct else 'FAIL'}")
    print(f"numeric check: {'pass' if verdict.distinct else 'FAIL'} "
          f"(min gap {verdict.min_gap:.3g})")
    if not ok:
        print(f"witness: {verdict.witness}", file=sys.stderr)
    run.write_json("hypothesis.json", doc)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_period_curve(cfg, run: Run) -> int:
    spec = spec_from_config(cfg)
    method = cfg.get("method", "return-time")
    if cfg.get("h_min") is not None or cfg.get("h_max") is not None:
        lo, hi, n = cfg.get("h_min"), cfg.get("h_max"), cfg.get("n", 200)
        if lo is None or hi is None or not 0 < lo < hi or n < 2:
            raise UsageError("need 0 < --h-min < --h-max and --n >= 2")
        grid = np.geomspace(lo, hi, n)
    else:
        gk = _grid_kwargs(cfg)
        gk.pop("n_jobs", None)
        ledger = energy.critical_energy_ledger(spec.with_epsilon(0.0), strict=False)
        extra = critical.perturbed_centers(spec) if spec.epsilon > 0 else ()
        grid = critical.build_h_grid(ledger, **gk, extra_centers=extra,
                                     upper=orbit.annulus_upper(spec))
    t = time.perf_counter()
    if method == "quadrature":
        if spec.kind != "potential":
            raise UsageError("quadrature needs a potential family")
        samples, failures = [], []
        for h in grid:
            try:
                samples.append(orbit.period_quadrature_potential(spec, h))
            except orbit.OrbitError as exc:
                failures.append({"h": float(h), "error": str(exc)})
        curve = critical.PeriodCurve(samples, {}, failures)
    else:
        curve = critical.sample_curve(spec, grid, n_jobs=cfg.get("n_jobs", 1))
    run.lap("sampling", t)
    curve.write_csv(run.path("curve.csv"))
    print(f"{len(curve.samples)} samples written, {len(curve.failures)} dropped")
    return EXIT_OK


def cmd_critical_points(cfg, run: Run) -> int:
    spec = spec_from_config(cfg)
    t = time.perf_counter()
    curve = critical.curve_for(spec, **_grid_kwargs(cfg))
    points = critical.detect_critical_points(curve, spec)
    run.lap("detection", t)
    for p in points:
        print(f"{p.kind:<8} h* = {p.h_star:.12g}  T* = {p.T_star:.12g}")
    run.write_json("critical_points.json", {
        "spec": spec.to_dict(),
        "critical_points": [p.to_dict() for p in points],
        "dropped": curve.failures,
    })
    return EXIT_OK


def _verify(spec, cfg, run: Run, name="report.json") -> int:
    kw = _grid_kwargs(cfg)
    for key in ("epsilon_start", "max_halvings"):
        if cfg.get(key) is not None:
            kw[key] = cfg[key]
    t = time.perf_counter()
    report = critical.verify_bound(spec.with_epsilon(0.0), **kw)
    run.lap("verify", t)
    run.write_json(name, report.to_dict())
    print(f"{report.family_tag} k={report.k}: found {report.found} critical periods, "
          f"required {report.required}, epsilon {report.epsilon_used:g} -> "
          f"{'pass' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify(cfg, run: Run) -> int:
    return _verify(spec_from_config(cfg), cfg, run)


def cmd_trace(cfg, run: Run) -> int:
    spec = spec_from_config(cfg)
    h = cfg.get("h")
    if h is None:
        raise UsageError("--h is required")
    tr = orbit.trace_orbit(spec, h, cfg.get("n_points", 256))
    tr.write_csv(run.path("trace.csv"))
    print(f"period {tr.period:.15g}, {len(tr.points)} points written")
    return EXIT_OK


def cmd_reproduce(cfg, run: Run) -> int:
    preset = cfg["preset"]
    spec = preset_spec(preset, cfg.get("k"))
    run.write_json("spec.json", spec.to_dict())
    ledger = energy.critical_energy_ledger(spec)
    run.write_json("ledger.json", ledger.to_dict())
    status = EXIT_OK
    if preset in ("example1", "example2"):
        verdict = energy.certify(spec)
        run.write_json("certification.json", verdict.to_dict())
        ok = verdict.distinct and verdict.dominance_ok is not False
        print(f"certification: {'pass' if ok else 'FAIL'}")
        if not ok:
            return EXIT_FAIL
    if preset == "fig2":
        bounds = ledger.energies + [10.0 * ledger.h_last]
        for i, (a, b) in enumerate(zip(bounds, bounds[1:])):
            tr = orbit.trace_orbit(spec, 0.5 * (a + b), 256)
            tr.write_csv(run.path(f"trace_{i}.csv"))
            print(f"annulus {i}: h = {tr.h:.6g}, period {tr.period:.10g}")
    status = _verify(spec, cfg, run)
    rep = json.loads((run.dir / "report.json").read_text())
    s_used = SystemSpec.from_dict(rep["spec"])
    curve = critical.curve_for(s_used, **_grid_kwargs(cfg))
    curve.write_csv(run.path("curve.csv"))
    return status


COMMANDS = {
    "analyze": cmd_analyze,
    "hypothesis": cmd_hypothesis,
    "period-curve": cmd_period_curve,
    "critical-points": cmd_critical_points,
    "verify": cmd_verify,
    "trace": cmd_trace,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        if args.command == "reproduce":
            cfg = {"preset": args.preset_name}
            if args.k is not None:
                cfg["k"] = args.k
            cfg.update({k: v for k, v in _grid_kwargs(vars(args)).items()})
            cfg["spec"] = {}
        else:
            cfg = _resolve(args)
        out_dir = cfg.get("out_dir") or args.out_dir
        run = Run(args.command, cfg, out_dir)
        status = COMMANDS[args.command](cfg, run)
    except UsageError as exc:
        print(f"critperiods: error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except energy.HypothesisViolation as exc:
        print(f"critperiods: hypothesis violated: {exc}", file=sys.stderr)
        if exc.witness is not None:
            print(f"witness: {exc.witness}", file=sys.stderr)
        status = EXIT_FAIL
    except SpecError as exc:
        print(f"critperiods: invalid system: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except (orbit.OrbitError, critical.CurveQualityError, ArithmeticError,
            FloatingPointError) as exc:
        print(f"critperiods: numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    if run is not None:
        run.finish(status)
    return status


if __name__ == "__main__":
    sys.exit(main())
