"""Command line driver: ``relkin <suite> [options]``.

Exit status is 0 when every check of the suite passes, 1 when a check
fails and 2 on a configuration error.  The report file is written in
all cases except configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, suites
from .errors import ConfigError, RelkinError
from .functions import default_family
from .kernels import KernelSpec
from .quadrature import QuadratureSpec

SCHEMA_VERSION = 1
SUBCOMMANDS = (
    "geometry", "representations", "conservation", "coercivity", "norms",
    "jacobian-scan", "counterexample", "report",
    # extras covering the remaining verification suites
    "equilibrium", "dyadic", "hydrodynamics",
)

_SUITE_KERNEL = {
    "representations": {"epsilon": 0.2},
    "conservation": {"epsilon": 0.1},
    "counterexample": {"angular_model": "constant"},
}
_SUITE_QUAD = {
    "conservation": suites.CONSERVATION_QUAD,
    "representations": suites.REPRESENTATION_QUAD,
    "coercivity": suites.COERCIVITY_QUAD,
    "counterexample": QuadratureSpec(32, 12, 24),
    "dyadic": QuadratureSpec(16, 8, 16, omega_order=16),
}
_CSV_DEFAULT = {"coercivity", "norms", "jacobian-scan"}


# ---------------------------------------------------------------- configuration


def _kernel_from_mapping(m: dict, base: KernelSpec = None) -> KernelSpec:
    d = asdict(base or KernelSpec())
    m = {k.strip().lower(): str(v).strip() for k, v in m.items()}
    if "a" in m:
        d["family"], d["rho"] = "hard", float(m.pop("a"))
    if "b" in m:
        d["family"], d["rho"] = "soft", -float(m.pop("b"))
    for key, val in m.items():
        if key in ("family", "angular_model"):
            d[key] = val
        elif key in ("rho", "gamma", "c_phi", "epsilon", "eps"):
            d["epsilon" if key == "eps" else key] = float(val)
        elif key in ("table_theta", "table_values"):
            d[key] = tuple(float(x) for x in val.split(",") if x.strip())
        else:
            raise ConfigError(f"unknown kernel key {key!r}")
    return KernelSpec(**d)


def _quad_from_mapping(m: dict, base: QuadratureSpec = None) -> QuadratureSpec:
    d = asdict(base or QuadratureSpec())
    types = {f.name: f.type for f in fields(QuadratureSpec)}
    for key, val in m.items():
        key = key.strip().lower()
        if key not in d:
            raise ConfigError(f"unknown quadrature key {key!r}")
        d[key] = int(float(val)) if types[key] in (int, "int") else float(val)
    return QuadratureSpec(**d)


def _read_mapping(text: str, section: str) -> dict:
    """An INI file (``[section]`` or bare keys) or an inline ``k=v,k=v`` list."""
    path = Path(text)
    if path.is_file():
        body = path.read_text()
        cp = configparser.ConfigParser()
        try:
            cp.read_string(body if body.lstrip().startswith("[") else f"[{section}]\n{body}")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not cp.has_section(section):
            raise ConfigError(f"{path} has no [{section}] section")
        return dict(cp.items(section))
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value or an existing file, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class RunConfig:
    """Everything a suite run depends on; serializes to an INI file."""

    suite: str
    kernel: KernelSpec = field(default_factory=KernelSpec)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    out: str = ""
    seed: int = 0
    threads: int = 1
    format: str = "json"
    params: dict = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {"suite": self.suite, "out": self.out, "seed": str(self.seed),
                     "threads": str(self.threads), "format": self.format}
        cp["kernel"] = {k: _fmt(v) for k, v in asdict(self.kernel).items() if v != ()}
        cp["quad"] = {k: _fmt(v) for k, v in asdict(self.quad).items()}
        cp["params"] = {k: _fmt(v) for k, v in self.params.items() if v is not None}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        run = dict(cp.items("run")) if cp.has_section("run") else {}
        if "suite" not in run:
            raise ConfigError("config lacks [run] suite")
        kernel = _kernel_from_mapping(dict(cp.items("kernel"))) if cp.has_section("kernel") else KernelSpec()
        quad = _quad_from_mapping(dict(cp.items("quad"))) if cp.has_section("quad") else QuadratureSpec()
        params = dict(cp.items("params")) if cp.has_section("params") else {}
        return cls(run["suite"], kernel, quad, run.get("out", ""), int(run.get("seed", 0)),
                   int(run.get("threads", 1)), run.get("format", "json"), params)

    def to_dict(self):
        d = {"suite": self.suite, "kernel": asdict(self.kernel), "quad": asdict(self.quad),
             "seed": self.seed, "threads": self.threads, "params": dict(self.params)}
        d["kernel"] = {k: v for k, v in d["kernel"].items() if v != ()}
        return d


# ---------------------------------------------------------------- argument parsing


def _vector(text):
    try:
        v = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}") from exc
    if len(v) != 3:
        raise argparse.ArgumentTypeError(f"expected three components, got {text!r}")
    return v


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from exc


def _count(text):
    return int(float(text))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="full run configuration (INI)")
    common.add_argument("--kernel", help="kernel INI file or inline key=value list")
    common.add_argument("--quad", help="quadrature INI file or inline key=value list")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="worker count recorded in the report (evaluation runs in one process)")
    common.add_argument("--out", help="report path (default reports/<suite>.<format>)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--eps", type=float, help="angular cutoff epsilon")
    common.add_argument("--gamma", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--save-config", help="write the resolved configuration to this path")

    parser = _Parser(prog="relkin", description="Relativistic collision-operator verification suites.")
    parser.add_argument("--version", action="version", version=f"relkin {__version__}")
    sub = parser.add_subparsers(dest="suite", required=True, parser_class=_Parser)

    p = sub.add_parser("geometry", parents=[common], help="collision geometry checks")
    p.add_argument("--n", type=_count, default=None, help="random triples (accepts 1e6)")
    p.add_argument("--n-frame", type=_count, default=None)
    p.add_argument("--n-jacobian", type=_count, default=None)
    p.add_argument("--literal-jacobian", action="store_true", default=None,
                   help="also grade the fixed-omega 6x6 determinant (rank deficient)")

    p = sub.add_parser("representations", parents=[common], help="omega, dual and Carleman forms")
    p.add_argument("--l", type=_floats, default=None, help="weight exponents")

    sub.add_parser("conservation", parents=[common], help="collision invariants and entropy")

    p = sub.add_parser("coercivity", parents=[common], help="Dirichlet and norm forms")
    p.add_argument("--family", default=None)

    p = sub.add_parser("norms", parents=[common], help="fractional norm and Littlewood-Paley ratios")
    p.add_argument("--f", default=None, help="family member id or default10")
    p.add_argument("--jmax", type=int, default=None)

    p = sub.add_parser("jacobian-scan", parents=[common], help="determinant of p -> p' over a grid")
    p.add_argument("--q", type=_vector, default=None)
    p.add_argument("--omega", type=_vector, default=None)
    p.add_argument("--grid", default=None, help="lo:hi:step for every axis")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--precision", type=int, default=None, help="decimal digits for mpmath re-evaluation")
    p.add_argument("--refine", action="store_true", default=None, help="append a refined scan around the minimum")

    p = sub.add_parser("counterexample", parents=[common], help="split zeta^B integrals")
    p.add_argument("--p", type=_vector, default=None)
    p.add_argument("--R", type=_floats, default=None)

    p = sub.add_parser("report", parents=[common], help="aggregate JSON reports")
    p.add_argument("inputs", nargs="*", help="report files (default: all in --dir)")
    p.add_argument("--all", action="store_true", default=None, help="aggregate every JSON report in --dir")
    p.add_argument("--dir", default="reports")

    sub.add_parser("equilibrium", parents=[common], help="Juttner normalization and moment band")
    sub.add_parser("dyadic", parents=[common], help="dyadic loss scaling and reduced bound")
    sub.add_parser("hydrodynamics", parents=[common], help="projection and conservation constants")
    return parser


def resolve_config(args) -> RunConfig:
    """Suite defaults, then --config, then --kernel/--quad, then single-value flags."""
    suite = args.suite
    if args.config:
        cfg = RunConfig.from_ini(Path(args.config).read_text())
        if cfg.suite != suite:
            raise ConfigError(f"config is for suite {cfg.suite!r}, not {suite!r}")
    else:
        kernel = KernelSpec(**_SUITE_KERNEL.get(suite, {}))
        if suite == "dyadic":
            kernel = KernelSpec("hard", 0.0, 0.5)
        cfg = RunConfig(suite, kernel, _SUITE_QUAD.get(suite, QuadratureSpec()))
        cfg.threads = os.cpu_count() or 1
        cfg.format = "csv" if suite in _CSV_DEFAULT else "json"
    if args.kernel:
        cfg.kernel = _kernel_from_mapping(_read_mapping(args.kernel, "kernel"), cfg.kernel)
    overrides = {k: v for k, v in (("epsilon", args.eps), ("gamma", args.gamma), ("rho", args.rho)) if v is not None}
    if overrides:
        cfg.kernel = KernelSpec(**{**asdict(cfg.kernel), **overrides})
    if args.quad:
        cfg.quad = _quad_from_mapping(_read_mapping(args.quad, "quad"), cfg.quad)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg.threads = args.threads
    if args.format:
        cfg.format = args.format
    for key in ("n", "n_frame", "n_jacobian", "literal_jacobian", "l", "family", "f", "jmax", "q",
                "omega", "grid", "threshold", "precision", "refine", "p", "R"):
        if getattr(args, key, None) is not None:
            cfg.params[key] = getattr(args, key)
    if args.out:
        cfg.out = args.out
    elif not cfg.out:
        ext = "json" if suite == "report" else cfg.format
        cfg.out = str(Path("reports") / f"{'summary' if suite == 'report' else suite}.{ext}")
    if suite == "counterexample" and cfg.kernel.angular_model != "constant":
        raise ConfigError("the counterexample needs angular_model = constant")
    return cfg


# ---------------------------------------------------------------- running


def _family(ident):
    fam = default_family()
    if ident in ("default10", "default", "all"):
        return fam
    picked = [f for f in fam if f.name in ident.split(",")]
    if not picked:
        raise ConfigError(f"unknown family id {ident!r}; use default10 or one of {[f.name for f in fam]}")
    return picked


def _param(cfg, key, default, cast=None):
    v = cfg.params.get(key, default)
    if v is None:
        return None
    if cast is not None and isinstance(v, str):
        return cast(v)
    return v


def run_suite(cfg: RunConfig):
    """Run the configured suite; returns a :class:`suites.SuiteResult`."""
    s, k, q = cfg.suite, cfg.kernel, cfg.quad
    if s == "geometry":
        return suites.geometry_suite(
            n=_param(cfg, "n", 1_000_000, _count), seed=cfg.seed,
            n_frame=_param(cfg, "n_frame", 100_000, _count),
            n_jacobian=_param(cfg, "n_jacobian", 1_000, _count),
            literal_jacobian=_param(cfg, "literal_jacobian", False, lambda x: x.lower() == "true"),
        )
    if s == "representations":
        return suites.representations_suite(k, q, ls=tuple(_param(cfg, "l", [0.0, 1.0], _floats)), seed=cfg.seed)
    if s == "conservation":
        return suites.conservation_suite(k, q)
    if s == "coercivity":
        return suites.coercivity_suite(k, q, _family(_param(cfg, "family", "default10")))
    if s == "norms":
        return suites.lp_suite(_family(_param(cfg, "f", "default10")), k.rho, k.gamma,
                               _param(cfg, "jmax", 5, int), q)
    if s == "jacobian-scan":
        return _jacobian_scan(cfg)
    if s == "counterexample":
        return suites.counterexample_suite(_param(cfg, "p", [0.0, 0.0, 0.0], _vector),
                                           tuple(_param(cfg, "R", [5.0, 10.0, 20.0, 40.0], _floats)), k, q)
    if s == "equilibrium":
        return suites.equilibrium_suite()
    if s == "dyadic":
        return suites.dyadic_suite(k, q)
    if s == "hydrodynamics":
        return suites.hydrodynamics_suite(q)
    raise ConfigError(f"unknown suite {s!r}")


def _jacobian_scan(cfg):
    q = _param(cfg, "q", [1.0, 0.0, 0.0], _vector)
    om = _param(cfg, "omega", [0.0, 0.0, 1.0], _vector)
    grid = _param(cfg, "grid", "-5:5:0.5")
    prec = _param(cfg, "precision", None, int)
    thr = _param(cfg, "threshold", 1e-6, float)
    t0 = time.perf_counter()
    try:
        rep = diagnostics.jacobian_scan(q, om, grid, precision=prec, threshold=thr)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = suites.SuiteResult("jacobian-scan")
    rows = [rep]
    if _param(cfg, "refine", False, lambda x: x.lower() == "true"):
        rows.append(diagnostics.refine_scan(rep, q, om, precision=prec))
    for r in rows:
        res.rows.extend({"p1": a, "p2": b, "p3": c, "det": d} for a, b, c, d in r.rows)
    best = min(rows, key=lambda r: r.min_abs_det)
    res.metrics.update({"minAbsDet": best.min_abs_det, "argmin": list(best.argmin),
                        "countBelow": sum(r.count_below for r in rows), "threshold": thr,
                        "locations": [list(x) for r in rows for x in r.locations]})
    dets = np.array([r["det"] for r in res.rows])
    res.add("finite.determinants", float(np.sum(~np.isfinite(dets))), 0)
    res.seconds = time.perf_counter() - t0
    loc = ", ".join(f"{x:g}" for x in best.argmin)
    print(f"min |det| = {best.min_abs_det:.3e} at ({loc}); {res.metrics['countBelow']} points below {thr:g}")
    return res


# ---------------------------------------------------------------- output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    return x


def report_dict(cfg: RunConfig, res, timestamp=None) -> dict:
    return _jsonable({
        "schemaVersion": SCHEMA_VERSION,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "suite": cfg.suite,
        "config": cfg.to_dict(),
        "passed": res.passed,
        "failures": res.failures,
        "checks": [c.to_dict() for c in res.checks],
        "metrics": res.metrics,
        "results": res.rows,
    })


_CSV_COLUMNS = {
    "coercivity": ["fId", "dirichlet", "nForm", "fractionalSq", "ratio"],
    "jacobian-scan": ["p1", "p2", "p3", "det"],
    "norms": ["fId", "rho", "gamma", "jmax", "fractionalSq", "lp", "lpD1", "lpRefined", "lpD1Refined"],
}


def _write_csv(path, cfg, res):
    cols = _CSV_COLUMNS.get(cfg.suite)
    if cols is None:
        cols, rows = ["name", "value", "threshold", "relation", "passed"], [c.to_dict() for c in res.checks]
    else:
        rows = res.rows
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})


def write_report(cfg: RunConfig, res, timestamp=None) -> Path:
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        _write_csv(path, cfg, res)
        # CSV holds the table only; the verdicts go next to it
        side = path.with_suffix(".json")
        if side != path:
            side.write_text(json.dumps(report_dict(cfg, res, timestamp), indent=2, sort_keys=True) + "\n")
    else:
        path.write_text(json.dumps(report_dict(cfg, res, timestamp), indent=2, sort_keys=True) + "\n")
    return path


def aggregate(paths) -> dict:
    reports = []
    for p in sorted(Path(x) for x in paths):
        try:
            d = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {p}: {exc}") from exc
        if "schemaVersion" not in d or d.get("suite") == "report":
            continue
        reports.append({"file": str(p), "suite": d["suite"], "passed": d["passed"], "failures": d["failures"],
                        "timestamp": d.get("timestamp")})
    return {"schemaVersion": SCHEMA_VERSION,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "suite": "report", "passed": all(r["passed"] for r in reports) and bool(reports),
            "reports": reports}


_VALUE_FLAGS = ("--grid", "--p", "--q", "--omega", "--R", "--l")


def _glue_negative_values(argv):
    """Join ``--grid -5:5:0.5`` into ``--grid=-5:5:0.5`` so argparse keeps the value."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        cfg = resolve_config(args)
        if args.save_config:
            Path(args.save_config).write_text(cfg.to_ini())
        if cfg.suite == "report":
            paths = args.inputs or sorted(str(p) for p in Path(args.dir).glob("*.json"))
            summary = aggregate(paths)
            out = Path(cfg.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            for r in summary["reports"]:
                print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['suite']:<16} {r['file']}")
            if not summary["reports"]:
                print("no reports found", file=sys.stderr)
            return 0 if summary["passed"] else 1
        res = run_suite(cfg)
    except ConfigError as exc:
        print(f"relkin: configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, configparser.Error) as exc:
        print(f"relkin: configuration error: {exc}", file=sys.stderr)
        return 2
    except RelkinError as exc:
        res = suites.SuiteResult(cfg.suite)
        res.metrics["error"] = f"{type(exc).__name__}: {exc}"
        res.add("completed", 1.0, 0.0)
        print(f"relkin: {res.metrics['error']}", file=sys.stderr)
    path = write_report(cfg, res)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28} {c.value:.6g} {c.relation} {c.threshold:g}")
    print(f"report: {path}  ({res.seconds:.1f} s)")
    if not res.passed:
        print(f"relkin: failed checks: {', '.join(res.failures)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
