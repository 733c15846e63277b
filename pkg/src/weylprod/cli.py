"""Command-line front end: ``weylprod identities|holonomy|einstein|toda``.

Reports are JSON with a fixed key order. Sample points come from
``numpy.random.default_rng(seed)`` (PCG64), drawn uniformly from the chart
domain, so a seed fully determines a report. Exit status is 0 on success,
1 on a mathematical failure (residual over threshold, non-convergence,
domain error) and 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chart import (
    ChartError,
    GaugeChoice,
    faraday_at,
    gauge_metric_at,
    load_chart,
    metric_compatibility_residual,
    parallelism_residual,
    weyl_christoffels_at,
)
from .curvature import ricci_weyl_at, symmetry_failure_residual, weyl_curvature_at
from .einstein import einstein_scan, no_go_scan, toda_residual
from .expr import DomainError, ExprError, ParseError, parse
from .holonomy import bracket_closure, classify_holonomy, curvature_generators, tolerance_sweep
from .tensor import commutator_identity_error, form_norm2
from .toda import (
    TodaGrid,
    load_grid,
    observed_order,
    save_grid,
    toda_solve,
    write_history_csv,
)

EXIT_OK, EXIT_MATH, EXIT_USAGE = 0, 1, 2

DEFAULT_TOL = {"identities": 1e-8, "holonomy": 1e-9, "einstein": 1e-8, "toda": 1e-10}
EXACT_TOL = 1e-9  # below this, errors are roundoff and an order is meaningless


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    chart: str | None = None
    seed: int = 0
    samples: int = 100
    tol: float | None = None
    out: str | None = None
    threads: int | None = None
    no_meta: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def tolerance(self) -> float:
        return DEFAULT_TOL[self.command] if self.tol is None else self.tol

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _require_chart(cfg: RunConfig):
    if not cfg.chart:
        raise UsageError(f"{cfg.command} needs --chart PATH")
    return load_chart(cfg.chart)


def _alt_gauge(n: int) -> GaugeChoice:
    return GaugeChoice(parse(f"x1 + 0.3*x{n}", n))


# -- commands --------------------------------------------------------------------------


def cmd_identities(cfg: RunConfig) -> tuple[dict, int]:
    """Max residual of each pointwise identity over seeded sample points."""
    chart, gauge = _require_chart(cfg)
    rng = cfg.rng()
    pts = chart.sample_points(rng, cfg.samples)
    alt = _alt_gauge(chart.n)
    worst = dict.fromkeys(
        (
            "commutator_identity",
            "symmetry_failure",
            "curvature_of_faraday",
            "metric_compatibility",
            "parallel_splitting",
            "gauge_invariance",
        ),
        0.0,
    )
    for p in pts:
        g = gauge_metric_at(chart, gauge, p)
        v = rng.standard_normal((4, chart.n))
        worst["commutator_identity"] = max(worst["commutator_identity"], commutator_identity_error(*v, g))
        worst["symmetry_failure"] = max(worst["symmetry_failure"], symmetry_failure_residual(chart, gauge, p))
        F = faraday_at(chart, gauge, p)
        RF = weyl_curvature_at(chart, gauge, p).on_form(F).coeffs
        worst["curvature_of_faraday"] = max(
            worst["curvature_of_faraday"], float(np.abs(RF - form_norm2(F, g) * np.eye(chart.n)).max())
        )
        worst["metric_compatibility"] = max(
            worst["metric_compatibility"], metric_compatibility_residual(chart, gauge, p)
        )
        worst["parallel_splitting"] = max(worst["parallel_splitting"], parallelism_residual(chart, gauge, p))
        gi = max(
            float(np.abs(weyl_christoffels_at(chart, gauge, p) - weyl_christoffels_at(chart, alt, p)).max()),
            float(np.abs(faraday_at(chart, gauge, p).coeffs - faraday_at(chart, alt, p).coeffs).max()),
            float(np.abs(ricci_weyl_at(chart, gauge, p).ric - ricci_weyl_at(chart, alt, p).ric).max()),
        )
        worst["gauge_invariance"] = max(worst["gauge_invariance"], gi)
    tol = cfg.tolerance
    ok = all(v <= tol for v in worst.values())
    report = {
        "command": "identities",
        "n1": chart.n1,
        "n2": chart.n2,
        "f": str(chart.f),
        "samples": cfg.samples,
        "seed": cfg.seed,
        "tol": tol,
        "max_residual": worst,
        "ok": ok,
    }
    return report, EXIT_OK if ok else EXIT_MATH


def cmd_holonomy(cfg: RunConfig) -> tuple[dict, int]:
    chart, gauge = _require_chart(cfg)
    base = cfg.extra.get("base")
    base = chart.center() if base is None else np.asarray(base, float)
    if len(base) != chart.n:
        raise UsageError(f"--base needs {chart.n} coordinates")
    k = int(cfg.extra.get("transport_samples") or 0)
    samples = chart.sample_points(cfg.rng(), k) if k else ()
    gens = curvature_generators(chart, gauge, base, samples)
    tol = cfg.tolerance
    alg = bracket_closure(gens, tol)
    cls = classify_holonomy(alg, chart.n1, chart.n2)
    sweep = tolerance_sweep(gens)
    report = {
        "command": "holonomy",
        "n1": chart.n1,
        "n2": chart.n2,
        "f": str(chart.f),
        "base": base,
        "transport_samples": k,
        "dim": alg.dim,
        "class": cls.label,
        "details": cls.details,
        "basis_norms": [float(np.linalg.norm(b)) for b in alg.basis],
        "id_projection": alg.id_projection(),
        "closure_residual": alg.closure_residual(),
        "tol": tol,
        "tolerance_sweep": sweep,
    }
    return report, EXIT_OK if sweep["stable"] else EXIT_MATH


def cmd_einstein(cfg: RunConfig) -> tuple[dict, int]:
    chart, gauge = _require_chart(cfg)
    pts = chart.sample_points(cfg.rng(), cfg.samples)
    rep = einstein_scan(chart, pts, gauge)
    tol = cfg.tolerance
    ew = rep.residual_max <= tol
    report = {
        "command": "einstein",
        "n1": chart.n1,
        "n2": chart.n2,
        "f": str(chart.f),
        "samples": cfg.samples,
        "seed": cfg.seed,
        "tol": tol,
        "einstein_weyl": ew,
        "closed": rep.closed_flag,
        "residual_max": rep.residual_max,
        "residual_min": rep.residual_min,
        "faraday_max": rep.faraday_max,
        "phi_block_gap": rep.phi_block_gap,
        "phi_values": rep.phi_values,
    }
    if chart.n1 == chart.n2 >= 3:
        ng = no_go_scan(chart, pts)
        report["no_go"] = {
            "mixed": ng.extra["mixed"],
            "residual_min": ng.residual_min,
            "closed": ng.closed_flag,
        }
    return report, EXIT_OK if ew else EXIT_MATH


def _grid_from_expr(f, shape, spacing) -> np.ndarray:
    probe = TodaGrid(np.zeros(shape), spacing)
    X = np.stack([m.ravel() for m in probe.mesh()], axis=1)
    return np.array([f.eval(x) for x in X]).reshape(shape)


def _solve_from_expr(f, shape, spacing, args) -> tuple:
    exact = _grid_from_expr(f, shape, spacing)
    vals = exact.copy()
    vals[(slice(1, -1),) * 4] = 0.0
    grid = TodaGrid(vals, spacing)
    res = toda_solve(grid, args["omega"], args["tol"], args["max_iters"], args["mode"])
    err = float(np.abs(res.grid.values - exact)[grid.interior()].max())
    return res, err


def cmd_toda(cfg: RunConfig) -> tuple[dict, int]:
    x = cfg.extra
    omega = x.get("omega", 1.0)
    if not 0.0 < omega < 2.0:
        raise UsageError(f"--omega must lie in (0, 2), got {omega}")
    args = {
        "omega": omega,
        "tol": cfg.tolerance,
        "max_iters": x.get("max_iters", 10_000),
        "mode": x.get("mode", "lex"),
    }
    boundary = x.get("boundary", "0")
    report = {"command": "toda", "boundary": boundary}
    t0 = time.perf_counter()
    if boundary.startswith("@"):
        grid = load_grid(boundary[1:])
        start = grid.values.copy()
        start[grid.interior()] = 0.0
        res = toda_solve(grid.with_values(start), args["omega"], args["tol"], args["max_iters"], args["mode"])
        report.update(shape=list(grid.shape), spacing=list(grid.spacing))
        err = None
        f = None
    else:
        shape = tuple(x.get("shape") or (9, 9, 9, 9))
        spacing = x.get("spacing") or 1.0 / (shape[0] - 1)
        f = parse(boundary, 4)
        res, err = _solve_from_expr(f, shape, (spacing,) * 4, args)
        report.update(shape=list(shape), spacing=[spacing] * 4)
    report.update(
        omega=omega,
        tol=args["tol"],
        mode=args["mode"],
        converged=res.converged,
        sweeps=res.sweeps,
        final_residual=res.history[-1] if res.history else None,
        best_residual=res.residual,
    )
    if f is not None:
        probe = np.random.default_rng(cfg.seed).random((20, 4)) * (np.array(report["shape"]) - 1) * spacing
        is_exact = max(abs(toda_residual(f, p)) for p in probe) <= EXACT_TOL
        report["exact_solution"] = is_exact
        if is_exact:
            report["max_error"] = err
            if not x.get("no_order"):
                fine_shape = tuple(2 * n - 1 for n in shape)
                _, err2 = _solve_from_expr(f, fine_shape, (spacing / 2,) * 4, args)
                report["max_error_refined"] = err2
                if max(err, err2) <= EXACT_TOL:
                    report["discretization_exact"] = True
                    report["observed_order"] = None
                else:
                    report["discretization_exact"] = False
                    report["observed_order"] = observed_order([err, err2], [spacing, spacing / 2])
    out = Path(cfg.out) if cfg.out else None
    grid_out = x.get("grid_out") or (str(out.with_suffix(".grid.bin")) if out else None)
    hist_out = x.get("history") or (str(out.with_suffix(".history.csv")) if out else None)
    if grid_out:
        save_grid(res.grid, grid_out)
        report["grid_file"] = grid_out
    if hist_out:
        write_history_csv(res.history, hist_out)
        report["history_file"] = hist_out
    report["_elapsed"] = time.perf_counter() - t0
    return report, EXIT_OK if res.converged else EXIT_MATH


COMMANDS = {
    "identities": cmd_identities,
    "holonomy": cmd_holonomy,
    "einstein": cmd_einstein,
    "toda": cmd_toda,
}


# -- argument parsing ------------------------------------------------------------------


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _shape(s: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N1,N2,N3,N4, got {s!r}") from None
    if len(shape) != 4 or min(shape) < 3:
        raise argparse.ArgumentTypeError("shape needs four sizes, each at least 3")
    return shape


def _omega(s: str) -> float:
    w = float(s)
    if not 0.0 < w < 2.0:
        raise argparse.ArgumentTypeError(f"omega must lie in (0, 2), got {w}")
    return w


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chart", help="chart description (JSON)")
    common.add_argument("--seed", type=int, default=0, help="seed for numpy's PCG64 generator")
    common.add_argument("--samples", type=_positive_int, default=100, help="number of sample points")
    common.add_argument("--tol", type=float, default=None, help="pass/fail threshold")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--threads", type=_positive_int, default=None, help="cap on worker threads")
    common.add_argument("--no-meta", action="store_true", help="omit timestamps and timings")

    ap = argparse.ArgumentParser(prog="weylprod", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("identities", parents=[common], help="pointwise identity suite")
    h = sub.add_parser("holonomy", parents=[common], help="holonomy algebra and class")
    h.add_argument("--base", type=_floats, help="base point (default: domain centre)")
    h.add_argument(
        "--transport-samples", type=int, default=0, help="extra points whose curvature is transported to the base"
    )
    sub.add_parser("einstein", parents=[common], help="Einstein-Weyl residuals")
    t = sub.add_parser("toda", parents=[common], help="relaxation solve of the Toda-type equation")
    t.add_argument("--shape", type=_shape, default=(9, 9, 9, 9))
    t.add_argument("--spacing", type=float, default=None, help="grid spacing (default: unit box)")
    t.add_argument("--boundary", default="0", help="expression in x1..x4, or @FILE for a grid file")
    t.add_argument("--omega", type=_omega, default=1.0)
    t.add_argument("--max-iters", type=_positive_int, default=10_000)
    t.add_argument("--mode", choices=("lex", "redblack"), default="lex")
    t.add_argument("--grid-out", help="solved grid file (default: next to --out)")
    t.add_argument("--history", help="residual history CSV (default: next to --out)")
    t.add_argument("--no-order", action="store_true", help="skip the refined solve for the convergence order")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    common = {"command", "chart", "seed", "samples", "tol", "out", "threads", "no_meta"}
    extra = {k: v for k, v in vars(ns).items() if k not in common}
    return RunConfig(ns.command, ns.chart, ns.seed, ns.samples, ns.tol, ns.out, ns.threads, ns.no_meta, extra)


def render(report: dict, cfg: RunConfig, code: int) -> str:
    report = dict(report)
    elapsed = report.pop("_elapsed", None)
    report["exit_code"] = code
    if not cfg.no_meta:
        report["meta"] = {
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "rng": "numpy PCG64",
            **({"elapsed_s": elapsed} if elapsed is not None else {}),
        }
    return json.dumps(_clean(report), indent=2) + "\n"


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = config_from_args(ns)
    if cfg.threads:
        import numba

        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        report, code = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"weylprod {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"weylprod {cfg.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        report = {"command": cfg.command, "error": str(exc), "point": getattr(exc, "point", None)}
        code = EXIT_MATH
    except (ChartError, ExprError, OSError, json.JSONDecodeError) as exc:
        print(f"weylprod {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        report = {"command": cfg.command, "error": str(exc)}
        code = EXIT_MATH
    text = render(report, cfg, code)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
