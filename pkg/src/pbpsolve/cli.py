"""Command-line front end for the two-stage signaling team toolkit.

Four subcommands:

``solve``
    Run the collocation solver (``--method ghq``) or the damped fixed-point
    iteration (``--method picard``) and emit a JSON result document with the
    parameters, the level vector, the residual norm, and the payoff under
    both the quadrature and the Monte Carlo estimator.

``baseline``
    Evaluate the optimal-affine or the two-point sign/tanh baseline pair and
    emit the same result document.

``curves``
    Sample the two strategy maps of a solved or baseline pair into a CSV
    table (columns ``x,gamma1bar,y,gamma2``) for external plotting, and
    report a staircase-shape summary (step count, tread values and slopes).

``verify``
    Load a finite team model from a JSON file (or one of the bundled
    models) and run the exact change-of-measure checks: likelihood-ratio
    martingale identities, payoff equivalence under the reference measure,
    and optionally the brute-force person-by-person optimality sweep.

Determinism contract: for a fixed command line the JSON and CSV documents
are byte-identical across runs.  Wall time is therefore reported on stderr;
the ``timing`` field inside the JSON document stays null unless ``--timing``
is given, which opts out of byte-identity.  Exit codes: 0 success, 1 failed
numerical outcome (solver did not converge, verification checks failed),
2 configuration or parse error.

If ``--out`` is a relative path and the environment variable
``PBPSOLVE_OUTPUT_DIR`` is set, the path is resolved inside that directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .counterexample import (
    GaussianPrior,
    PayoffBreakdown,
    ProblemParams,
    StrategyPair,
    TwoPointSymmetricPrior,
    affine_optimal,
    payoff_mc,
    payoff_quadrature,
    wit_nonlinear,
)
from .errors import ConfigurationError, NumericError
from .fixed_point import default_grid, picard_iterate, strategy_from_pair
from .ghq_solver import (
    SignalingLevels,
    collocation_pair,
    expand_distinct_levels,
    residual_system,
    solve_signaling_levels,
    summarize_staircase,
)
from .measure_change import (
    brute_force_pbp,
    model_from_dict,
    payoff_equivalence,
    uniform_profile,
    verify_martingale,
)
from .quadrature import build_hermite_rule

OUTPUT_DIR_ENV = "PBPSOLVE_OUTPUT_DIR"
BUNDLED_MODELS = ("identity", "random42", "corrupted")

_SOLVE_METHODS = ("ghq", "picard")
_BASELINE_METHODS = ("affine", "wit")
_CURVE_METHODS = ("ghq", "picard", "affine", "wit")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Validated bundle of everything a subcommand needs.

    out_format is implied by the subcommand (csv for curves, json
    otherwise); out_path of None writes to stdout.
    """

    subcommand: str
    k: float = 1.0
    sigma: float = 1.0
    sigma_x: float = 1.0
    prior: str = "gaussian"
    n: int = 7
    samples: int = 600_000
    seed: int = 0
    method: str = "ghq"
    init: str = "auto"
    iterate: bool = True
    tol: float | None = None
    damping: float = 0.5
    max_iter: int = 200
    grid_points: int = 2049
    grid_span: float = 8.0
    quad_order: int = 20
    points: int = 1001
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    model: str | None = None
    pbp: bool = False
    timing: bool = False
    out_format: str = "json"
    out_path: str | None = None

    def __post_init__(self) -> None:
        for name in ("k", "sigma", "sigma_x"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.samples < 1:
            raise ConfigurationError("samples must be >= 1")
        if self.points < 2:
            raise ConfigurationError("points must be >= 2")
        if self.prior not in ("gaussian", "twopoint"):
            raise ConfigurationError(f"unknown prior {self.prior!r}")

    def problem_params(self) -> ProblemParams:
        prior = None
        if self.prior == "twopoint":
            prior = TwoPointSymmetricPrior(self.sigma_x)
        return ProblemParams(
            k=self.k, sigma=self.sigma, sigma_x=self.sigma_x, prior=prior
        )


def _parse_init(text: str) -> str | np.ndarray:
    """Decode an --init value: a named start or ``user:v1,v2,...``."""
    if text.startswith("user:"):
        body = text[len("user:"):]
        tokens = [tok for tok in body.split(",") if tok.strip()]
        if not tokens:
            raise ConfigurationError("user: initialization needs at least one value")
        try:
            return np.array([float(tok) for tok in tokens], dtype=float)
        except ValueError as exc:
            raise ConfigurationError(f"bad user initialization {body!r}: {exc}") from None
    if text not in ("auto", "affine", "quantizer"):
        raise ConfigurationError(
            f"init must be auto, affine, quantizer, or user:v1,v2,..., got {text!r}"
        )
    return text


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _resolve_out(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _emit_json(document: dict, path: Path | None) -> None:
    _emit(json.dumps(document, indent=2, sort_keys=True) + "\n", path)


def _payoff_block(p: PayoffBreakdown) -> dict:
    return {
        "estimator": p.estimator,
        "order": p.order,
        "samples": p.samples,
        "seed": p.seed,
        "stage1": p.stage1,
        "stage2": p.stage2,
        "std_error": p.std_error,
        "total": p.total,
    }


def _payoff_blocks(cfg: RunConfig, params: ProblemParams, pair: StrategyPair) -> list[dict]:
    rule = build_hermite_rule(cfg.quad_order)
    quad = payoff_quadrature(params, pair, rule, rule)
    mc = payoff_mc(params, pair, cfg.samples, cfg.seed)
    return [_payoff_block(quad), _payoff_block(mc)]


def _result_document(
    cfg: RunConfig,
    method: str,
    init: str | None,
    levels: list[float] | None,
    residual_norm: float | None,
    converged: bool | None,
    pair: StrategyPair,
    params: ProblemParams,
    started: float,
) -> dict:
    return {
        "converged": converged,
        "init": init,
        "lam": pair.lam,
        "levels": levels,
        "method": method,
        "mu": pair.mu,
        "params": {
            "k": cfg.k,
            "n": cfg.n,
            "prior": cfg.prior,
            "sigma": cfg.sigma,
            "sigma_x": cfg.sigma_x,
        },
        "payoff": _payoff_blocks(cfg, params, pair),
        "residual_norm": residual_norm,
        "timing": (time.perf_counter() - started) if cfg.timing else None,
    }


# ---------------------------------------------------------------------------
# strategy construction shared by solve and curves
# ---------------------------------------------------------------------------

def _solve_outcome(cfg: RunConfig, started: float) -> tuple[dict, bool]:
    """Run the requested solver; return (document, succeeded)."""
    params = cfg.problem_params()
    rule = build_hermite_rule(cfg.n)
    init = _parse_init(cfg.init)

    if cfg.method == "ghq":
        tol = 1e-10 if cfg.tol is None else cfg.tol
        report = solve_signaling_levels(
            params, rule, init=init, tol=tol, iterate=cfg.iterate
        )
        pair = collocation_pair(report.levels)
        doc = _result_document(
            cfg,
            "ghq",
            report.init,
            [float(v) for v in report.levels.levels],
            report.residual_norm,
            report.converged,
            pair,
            params,
            started,
        )
        return doc, (report.converged or not cfg.iterate)

    if not cfg.iterate:
        raise ConfigurationError("--no-iterate applies only to --method ghq")
    tol = 1e-10 if cfg.tol is None else cfg.tol
    if isinstance(init, np.ndarray):
        start_levels = expand_distinct_levels(init, params, rule)
        start_pair = collocation_pair(SignalingLevels(start_levels, rule.order, params))
        tag = "user"
    elif init == "quantizer":
        report = solve_signaling_levels(params, rule, init="quantizer", iterate=False)
        start_pair = collocation_pair(report.levels)
        tag = "quantizer"
    else:
        start_pair = affine_optimal(params)
        tag = "affine"
    grid = default_grid(params, points=cfg.grid_points, span=cfg.grid_span)
    start = strategy_from_pair(start_pair, params, grid)
    result = picard_iterate(
        start, params, rule, damping=cfg.damping, max_iter=cfg.max_iter, tol=tol
    )
    strategy = result.strategy
    colloc = math.sqrt(2.0) * params.sigma_x * rule.nodes
    level_values = np.asarray(strategy.interp1(colloc), dtype=float)
    resid = residual_system(level_values, params, rule)
    doc = _result_document(
        cfg,
        "picard",
        tag,
        [float(v) for v in level_values],
        float(np.linalg.norm(resid)),
        result.converged,
        strategy.to_pair(),
        params,
        started,
    )
    return doc, result.converged


def _baseline_pair(cfg: RunConfig, params: ProblemParams) -> StrategyPair:
    if cfg.method == "affine":
        return affine_optimal(params)
    if cfg.method == "wit":
        return wit_nonlinear(params)
    raise ConfigurationError(f"baseline method must be affine or wit, got {cfg.method!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, started: float) -> int:
    doc, ok = _solve_outcome(cfg, started)
    _emit_json(doc, _resolve_out(cfg.out_path))
    return 0 if ok else 1


def cmd_baseline(cfg: RunConfig, started: float) -> int:
    params = cfg.problem_params()
    pair = _baseline_pair(cfg, params)
    doc = _result_document(
        cfg, cfg.method, None, None, None, None, pair, params, started
    )
    _emit_json(doc, _resolve_out(cfg.out_path))
    return 0


def _curves_pair(cfg: RunConfig, started: float) -> tuple[StrategyPair, bool]:
    if cfg.method in _BASELINE_METHODS:
        return _baseline_pair(cfg, cfg.problem_params()), True
    doc, ok = _solve_outcome(cfg, started)
    params = cfg.problem_params()
    rule = build_hermite_rule(cfg.n)
    if cfg.method == "ghq":
        levels = SignalingLevels(np.array(doc["levels"]), rule.order, params)
        return collocation_pair(levels), ok
    start_pair = collocation_pair(
        SignalingLevels(np.array(doc["levels"]), rule.order, params)
    )
    return strategy_from_pair(start_pair, params).to_pair(), ok


def cmd_curves(cfg: RunConfig, started: float) -> int:
    params = cfg.problem_params()
    pair, ok = _curves_pair(cfg, started)
    half = 8.5 * cfg.sigma_x
    x_lo, x_hi = cfg.x_range if cfg.x_range else (-half, half)
    y_lo, y_hi = cfg.y_range if cfg.y_range else (-half, half)
    xs = np.linspace(x_lo, x_hi, cfg.points)
    ys = np.linspace(y_lo, y_hi, cfg.points)
    g1 = np.asarray(pair.gamma1bar(xs), dtype=float)
    g2 = np.asarray(pair.gamma2(ys), dtype=float)

    lines = ["x,gamma1bar,y,gamma2"]
    for x, a, y, b in zip(xs, g1, ys, g2):
        lines.append(f"{x:.17g},{a:.17g},{y:.17g},{b:.17g}")
    out = _resolve_out(cfg.out_path)
    _emit("\n".join(lines) + "\n", out)

    summary = summarize_staircase(pair, params)
    summary_doc = {
        "breakpoints": list(summary.breakpoints),
        "line_rms": summary.line_rms,
        "line_slope": summary.line_slope,
        "shape": summary.shape,
        "steps": summary.steps,
        "tread_slopes": list(summary.tread_slopes),
        "tread_values": list(summary.tread_values),
    }
    text = json.dumps(summary_doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stderr.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def _load_model_text(name_or_path: str) -> tuple[str, str]:
    """Return (display name, JSON text) for a path or a bundled model name."""
    path = Path(name_or_path)
    if path.exists():
        return str(path), path.read_text()
    if name_or_path in BUNDLED_MODELS:
        res = resources.files("pbpsolve").joinpath("models", f"{name_or_path}.json")
        return name_or_path, res.read_text()
    raise ConfigurationError(
        f"model {name_or_path!r} is neither a file nor one of the bundled "
        f"models {', '.join(BUNDLED_MODELS)}"
    )


def cmd_verify(cfg: RunConfig, started: float) -> int:
    tol = 1e-12 if cfg.tol is None else cfg.tol
    name, text = _load_model_text(cfg.model or "")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"model {name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None

    doc: dict = {
        "martingale": None,
        "model": name,
        "passed": False,
        "payoff": None,
        "pbp": None,
        "timing": None,
        "tol": tol,
    }
    try:
        model = model_from_dict(data)
    except ConfigurationError as exc:
        doc["error"] = str(exc)
        _emit_json(doc, _resolve_out(cfg.out_path))
        return 1

    profile = uniform_profile(model)
    mart = verify_martingale(model, profile, tol=tol)
    pay = payoff_equivalence(model, profile, tol=tol)
    doc["martingale"] = {
        "conditional_error": mart.conditional_error,
        "passed": mart.passed,
        "unit_mean_error": mart.unit_mean_error,
    }
    doc["payoff"] = {
        "difference": pay.difference,
        "original": pay.original,
        "passed": pay.passed,
        "via_reference": pay.via_reference,
    }
    passed = mart.passed and pay.passed
    if cfg.pbp:
        pbp = brute_force_pbp(model, tol=tol)
        doc["pbp"] = {
            "best_cost": pbp.best_cost,
            "num_global_optima": pbp.num_global_optima,
            "num_profiles": pbp.num_profiles,
            "passed": pbp.pbp_holds,
            "worst_deviation_gain": pbp.worst_deviation_gain,
        }
        passed = passed and pbp.pbp_holds
    doc["passed"] = passed
    if cfg.timing:
        doc["timing"] = time.perf_counter() - started
    _emit_json(doc, _resolve_out(cfg.out_path))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=float, required=True, help="first-stage cost weight k")
    p.add_argument("--sigma-x", type=float, required=True, help="prior scale of x0")
    p.add_argument("--sigma", type=float, default=1.0, help="observation noise scale")
    p.add_argument(
        "--prior",
        choices=("gaussian", "twopoint"),
        default="gaussian",
        help="prior of x0: Gaussian or symmetric two-point",
    )
    p.add_argument("--n", type=int, default=7, help="quadrature / collocation order")
    p.add_argument("--samples", type=int, default=600_000, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    p.add_argument(
        "--quad-order", type=int, default=20, help="payoff quadrature order"
    )


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument(
        "--timing",
        action="store_true",
        help="embed wall time in the document (breaks byte-identical output)",
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--init",
        default="auto",
        help="solver start: auto, affine, quantizer, or user:v1,v2,...",
    )
    p.add_argument(
        "--no-iterate",
        action="store_true",
        help="evaluate the residual at the start without optimizing",
    )
    p.add_argument("--tol", type=float, default=None, help="convergence tolerance")
    p.add_argument(
        "--damping", type=float, default=0.5, help="picard damping factor in (0, 1]"
    )
    p.add_argument(
        "--max-iter", type=int, default=200, help="picard iteration budget"
    )
    p.add_argument(
        "--grid-points", type=int, default=2049, help="picard grid resolution"
    )
    p.add_argument(
        "--grid-span",
        type=float,
        default=8.0,
        help="picard grid half-width in units of sigma_x",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbpsolve",
        description="Solvers, baselines, and exact verifiers for the "
        "two-stage signaling team problem.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("solve", help="solve for the signaling strategy pair")
    _add_problem_flags(p)
    _add_solver_flags(p)
    _add_output_flags(p)
    p.add_argument("--method", choices=_SOLVE_METHODS, default="ghq")

    p = sub.add_parser("baseline", help="evaluate a closed-form baseline pair")
    _add_problem_flags(p)
    _add_output_flags(p)
    p.add_argument("--method", choices=_BASELINE_METHODS, default="affine")

    p = sub.add_parser("curves", help="export sampled strategy curves as CSV")
    _add_problem_flags(p)
    _add_solver_flags(p)
    _add_output_flags(p)
    p.add_argument("--method", choices=_CURVE_METHODS, default="ghq")
    p.add_argument("--points", type=int, default=1001, help="rows in the CSV table")
    p.add_argument(
        "--x-range", type=float, nargs=2, metavar=("LO", "HI"), default=None
    )
    p.add_argument(
        "--y-range", type=float, nargs=2, metavar=("LO", "HI"), default=None
    )

    p = sub.add_parser("verify", help="run exact change-of-measure checks on a model")
    p.add_argument(
        "model",
        help="path to a model JSON file, or a bundled name: "
        + ", ".join(BUNDLED_MODELS),
    )
    p.add_argument("--tol", type=float, default=None, help="check tolerance")
    p.add_argument(
        "--pbp",
        action="store_true",
        help="also run the brute-force person-by-person optimality sweep",
    )
    _add_output_flags(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    common = {
        "subcommand": args.subcommand,
        "timing": args.timing,
        "out_path": args.out,
    }
    if args.subcommand == "verify":
        return RunConfig(
            model=args.model, tol=args.tol, pbp=args.pbp, **common
        )
    common.update(
        k=args.k,
        sigma=args.sigma,
        sigma_x=args.sigma_x,
        prior=args.prior,
        n=args.n,
        samples=args.samples,
        seed=args.seed,
        quad_order=args.quad_order,
        method=args.method,
    )
    if args.subcommand == "baseline":
        return RunConfig(**common)
    common.update(
        init=args.init,
        iterate=not args.no_iterate,
        tol=args.tol,
        damping=args.damping,
        max_iter=args.max_iter,
        grid_points=args.grid_points,
        grid_span=args.grid_span,
    )
    if args.subcommand == "curves":
        return RunConfig(
            out_format="csv",
            points=args.points,
            x_range=tuple(args.x_range) if args.x_range else None,
            y_range=tuple(args.y_range) if args.y_range else None,
            **common,
        )
    return RunConfig(**common)


_HANDLERS = {
    "solve": cmd_solve,
    "baseline": cmd_baseline,
    "curves": cmd_curves,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    started = time.perf_counter()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        code = _HANDLERS[cfg.subcommand](cfg, started)
    except ConfigurationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericError as exc:
        sys.stderr.write(f"numeric error: {exc}\n")
        return 1
    sys.stderr.write(f"elapsed: {time.perf_counter() - started:.3f} s\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
