"""Collocation solver for the coupled signaling optimality equations.

Discretizing the prior of x_0 by an order-n Gauss-Hermite rule turns the two
coupled stationarity equations of the two-stage signaling team into a square
nonlinear system for the vector t of first-stage values at the collocation
points x0_l = sqrt(2) sigma_x z_l:

    f_l(t) = t_l - x0_l + (1 / (sqrt(pi) k^2)) sum_i lambda_i
             { (z_i / sqrt(2 sigma^2)) (t_l - B_il)^2 + (t_l - B_il) },

where B_il is the posterior mean of the level values t_j (with prior masses
lambda_j) given the observation y = sqrt(2) sigma z_i + t_l.  Optimal level
vectors look like staircases: a handful of distinct signaling levels, each
shared by a run of collocation points.

The module evaluates the residual f (with summation arranged so that
f(-t reversed) is the exact bitwise negation-reversal of f(t)), solves
f(t) = 0 by trust-region least squares from affine, quantizer, or
user-supplied starts, and converts a converged level vector into an
evaluable strategy pair.  The second stage is the explicit posterior mean;
the first stage gamma1bar(x0) is recovered by inverting the scalar map
H(g) = g + R(g), where R(g) collects the quadrature terms (R is independent
of x0, so one dense table of H serves every x0).  H is increasing within
branches and drops at finitely many jumps, so an x0 can have several
preimages; the returned value is the preimage closest to one of the
signaling levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .counterexample import (
    ProblemParams,
    StrategyPair,
    affine_optimal,
    gaussian_posterior_mean,
    jump_breakpoints,
    payoff_quadrature,
)
from .errors import ConfigurationError, NumericError
from .quadrature import SQRT_PI, QuadratureRule, build_hermite_rule

_TABLE_POINTS = 200_001
_TABLE_CHUNK = 50_000


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalingLevels:
    """A collocation-point level vector t with its rule order and problem.

    levels[l] is the first-stage value at the collocation point
    x0_l = sqrt(2) sigma_x z_l of the order rule_order Gauss-Hermite rule.
    """

    levels: np.ndarray
    rule_order: int
    params: ProblemParams

    def __post_init__(self) -> None:
        levels = np.array(self.levels, dtype=float)
        levels.flags.writeable = False
        object.__setattr__(self, "levels", levels)
        if levels.ndim != 1 or levels.shape[0] != self.rule_order:
            raise ConfigurationError("levels must be a vector of length rule_order")
        if not np.all(np.isfinite(levels)):
            raise ConfigurationError("levels must be finite")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a level solve.

    residual_norm is the Euclidean norm of the residual vector at the
    returned levels; converged means residual_norm <= tol (enforced);
    iterations counts residual-vector evaluations; init records which
    initialization produced the result.
    """

    levels: SignalingLevels
    residual_norm: float
    iterations: int
    converged: bool
    init: str
    tol: float

    def __post_init__(self) -> None:
        if self.converged and not self.residual_norm <= self.tol:
            raise ConfigurationError(
                "a converged report requires residual_norm <= tol"
            )


# ---------------------------------------------------------------------------
# residual evaluation
# ---------------------------------------------------------------------------

def _reversal_invariant_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum along an axis, bitwise invariant under reversal of that axis.

    Mirror-image entries are added pairwise first (float addition is
    commutative, so each pair sum is identical for the reversed array), then
    the pair sums and the odd middle entry are accumulated in a fixed order.
    """
    a = np.moveaxis(np.asarray(a, dtype=float), axis, -1)
    n = a.shape[-1]
    h = n // 2
    if h:
        total = (a[..., :h] + a[..., : n - h - 1 : -1]).sum(axis=-1)
    else:
        total = np.zeros(a.shape[:-1])
    if n % 2:
        total = total + a[..., h]
    return total


def _posterior_mean_levels(
    y: np.ndarray, levels: np.ndarray, log_masses: np.ndarray, sigma: float
) -> np.ndarray:
    """Posterior mean of a finite level mixture observed through G(0, sigma^2) noise.

    Log-sum-exp stabilized, with the weighted sums accumulated by
    _reversal_invariant_sum so the result is exactly equivariant under
    negating and reversing a symmetric level vector.  Broadcasts over y.
    """
    y = np.asarray(y, dtype=float)
    log_a = -((y[..., None] - levels) ** 2) / (2.0 * sigma * sigma) + log_masses
    log_a -= log_a.max(axis=-1, keepdims=True)
    w = np.exp(log_a)
    return _reversal_invariant_sum(w * levels) / _reversal_invariant_sum(w)


def residual_system(
    levels: np.ndarray | SignalingLevels,
    params: ProblemParams | None = None,
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """Residual vector f(t) of the collocation system.

    Accepts either a SignalingLevels bundle or a plain vector plus params and
    rule.  The summations are arranged so that negating and reversing the
    input negates and reverses the output bit-for-bit (the exact sign
    symmetry of the continuous equations, inherited from the exact node and
    weight symmetry of the rule).
    """
    if isinstance(levels, SignalingLevels):
        params = levels.params
        rule = build_hermite_rule(levels.rule_order)
        t = np.asarray(levels.levels, dtype=float)
    else:
        if params is None or rule is None:
            raise ConfigurationError(
                "a plain level vector requires params and rule arguments"
            )
        t = np.asarray(levels, dtype=float)
    if t.shape != (rule.order,):
        raise ConfigurationError("level vector length must equal the rule order")

    z = rule.nodes
    lam = rule.weights
    sv = params.sigma
    c = math.sqrt(2.0) * sv
    log_masses = np.log(lam)

    # B[i, l]: posterior mean of the levels at observation c z_i + t_l.
    y = c * z[:, None] + t[None, :]
    b = _posterior_mean_levels(y, t, log_masses, sv)
    d = t[None, :] - b
    inner = (z[:, None] / c) * d * d + d
    s = _reversal_invariant_sum(lam[:, None] * inner, axis=0)
    return t - (math.sqrt(2.0) * params.sigma_x) * z + s / (SQRT_PI * params.k**2)


def _signal_pull(
    g: np.ndarray,
    t: np.ndarray,
    params: ProblemParams,
    rule: QuadratureRule,
) -> np.ndarray:
    """R(g): the quadrature sum of the stationarity equation at first-stage value g.

    The root g of g + R(g) = x0 is the first-stage strategy value at x0.
    Vectorized over g; iterates over the noise nodes so peak memory stays at
    len(g) x order.
    """
    g = np.asarray(g, dtype=float)
    z = rule.nodes
    lam = rule.weights
    sv = params.sigma
    c = math.sqrt(2.0) * sv
    log_masses = np.log(lam)
    total = np.zeros_like(g)
    for i in range(rule.order):
        b = _posterior_mean_levels(g + c * z[i], t, log_masses, sv)
        d = g - b
        total += lam[i] * ((z[i] / c) * d * d + d)
    return total / (SQRT_PI * params.k**2)


# ---------------------------------------------------------------------------
# initializations and the solver
# ---------------------------------------------------------------------------

def expand_distinct_levels(
    values: Sequence[float], params: ProblemParams, rule: QuadratureRule
) -> np.ndarray:
    """Turn a short list of tread values into a full collocation level vector.

    Each collocation point x0_l receives the listed value nearest to x0_l.
    """
    values = np.asarray(list(values), dtype=float)
    if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
        raise ConfigurationError("tread values must be a nonempty finite vector")
    x0 = math.sqrt(2.0) * params.sigma_x * rule.nodes
    return values[np.argmin(np.abs(x0[:, None] - values[None, :]), axis=1)]


def _affine_init(params: ProblemParams, rule: QuadratureRule) -> np.ndarray:
    lam_aff = affine_optimal(params).lam
    return lam_aff * math.sqrt(2.0) * params.sigma_x * rule.nodes


def _quantizer_init(
    params: ProblemParams, rule: QuadratureRule, scale: float = 1.0
) -> np.ndarray:
    """Uniform quantizer seed: each collocation abscissa snapped to the
    nearest multiple of a spacing chosen so the outermost level sits at
    scale times the outermost abscissa."""
    x0 = math.sqrt(2.0) * params.sigma_x * rule.nodes
    half_steps = max((rule.order - 1) / 2.0, 1.0)
    delta = scale * math.sqrt(2.0) * params.sigma_x * float(rule.nodes[-1]) / half_steps
    return delta * np.round(x0 / delta)


def _single_solve(
    params: ProblemParams,
    rule: QuadratureRule,
    start: np.ndarray,
    tag: str,
    tol: float,
    iterate: bool,
) -> SolveReport:
    if iterate:
        result = least_squares(
            residual_system,
            start,
            args=(params, rule),
            method="trf",
            diff_step=1e-6,
            xtol=3e-16,
            ftol=3e-16,
            gtol=3e-16,
            max_nfev=500 * (rule.order + 1),
        )
        t = result.x
        iterations = int(result.nfev)
    else:
        t = np.asarray(start, dtype=float)
        iterations = 0
    norm = float(np.linalg.norm(residual_system(t, params, rule)))
    return SolveReport(
        levels=SignalingLevels(t, rule.order, params),
        residual_norm=norm,
        iterations=iterations,
        converged=bool(norm <= tol),
        init=tag,
        tol=tol,
    )


def solve_signaling_levels(
    params: ProblemParams,
    rule: QuadratureRule,
    init: str | Sequence[float] | np.ndarray = "auto",
    tol: float = 1e-12,
    iterate: bool = True,
    quantizer_scale: float = 1.0,
) -> SolveReport:
    """Solve the collocation system for a signaling level vector.

    init selects the starting vector: "affine" (the optimal affine slope
    applied to the collocation points), "quantizer" (collocation points
    rounded to a uniform lattice whose spacing is controlled by
    quantizer_scale), "auto" (both starts are solved and the converged
    result with the lower quadrature payoff is kept), or an explicit list of
    level values, each collocation point receiving the nearest listed value
    (so the list order is immaterial and a short list of tread values
    suffices).  With iterate=False the residual is evaluated at
    the start without optimization, which reports the defect of a
    hypothesized level vector.  converged means the Euclidean residual norm
    is at most tol.
    """
    if not tol > 0.0:
        raise ConfigurationError("tol must be positive")
    if isinstance(init, str):
        key = init.lower()
        if key == "affine":
            return _single_solve(params, rule, _affine_init(params, rule), "affine", tol, iterate)
        if key == "quantizer":
            start = _quantizer_init(params, rule, quantizer_scale)
            return _single_solve(params, rule, start, "quantizer", tol, iterate)
        if key != "auto":
            raise ConfigurationError(
                f"init must be 'affine', 'quantizer', 'auto', or a vector, got {init!r}"
            )
        reports = [
            _single_solve(params, rule, _affine_init(params, rule), "auto:affine", tol, iterate),
            _single_solve(
                params,
                rule,
                _quantizer_init(params, rule, quantizer_scale),
                "auto:quantizer",
                tol,
                iterate,
            ),
        ]
        converged = [r for r in reports if r.converged]
        if not converged:
            return min(reports, key=lambda r: r.residual_norm)
        if len(converged) == 1:
            return converged[0]
        payoff_rule = build_hermite_rule(20)
        totals = [
            payoff_quadrature(params, solved_pair(r), payoff_rule, payoff_rule).total
            for r in converged
        ]
        return converged[int(np.argmin(totals))]

    start = np.asarray(list(np.ravel(init)), dtype=float)
    if not np.all(np.isfinite(start)):
        raise ConfigurationError("user initialization must be finite")
    start = expand_distinct_levels(start, params, rule)
    return _single_solve(params, rule, start, "user", tol, iterate)


# ---------------------------------------------------------------------------
# evaluating a solved strategy
# ---------------------------------------------------------------------------

def _resolve_rule_params(
    levels: SignalingLevels,
    params: ProblemParams | None,
    rule: QuadratureRule | None,
) -> tuple[ProblemParams, QuadratureRule]:
    if params is None:
        params = levels.params
    if rule is None:
        rule = build_hermite_rule(levels.rule_order)
    elif rule.order != levels.rule_order:
        raise ConfigurationError(
            "rule order must match the level count "
            f"({rule.order} != {levels.rule_order})"
        )
    return params, rule


def eval_gamma2(
    y1: np.ndarray | float,
    levels: SignalingLevels,
    params: ProblemParams | None = None,
    rule: QuadratureRule | None = None,
) -> np.ndarray | float:
    """Second-stage strategy: posterior mean of the levels given y1.

    The mixture weights are the rule weights (the prior masses of the
    collocation points).  Log-sum-exp stabilized, finite for every finite
    y1; far beyond the outermost level the value saturates at that level.
    Scalar in, scalar out; array in, array out.  params and rule default to
    the ones recorded in levels.
    """
    params, rule = _resolve_rule_params(levels, params, rule)
    y = np.asarray(y1, dtype=float)
    out = gaussian_posterior_mean(y, levels.levels, rule.weights, params.sigma)
    if np.ndim(y1) == 0:
        return float(out)
    return out


def _invert_h_scalar(
    levels: SignalingLevels,
    rule: QuadratureRule,
    x0: float,
    params: ProblemParams | None = None,
) -> float:
    """Scalar inversion of H(g) = g + R(g) = x0 by bracketed root finding.

    A dense scan of H over a window containing every preimage brackets the
    sign changes of H - x0; each bracket is polished by Brent's method and
    kept only if the residual actually vanishes (sign changes across the
    downward jumps of H are not roots).  Among the true roots the one
    nearest to a signaling level is returned.
    """
    t = levels.levels
    if params is None:
        params = levels.params
    pad = 6.0 * params.sigma + 1.0
    lo = min(float(t.min()), x0) - pad
    hi = max(float(t.max()), x0) + pad
    grid = np.linspace(lo, hi, 4001)
    resid = grid + _signal_pull(grid, t, params, rule) - x0

    def h_defect(g: float) -> float:
        return float(g + _signal_pull(np.array([g]), t, params, rule)[0] - x0)

    scale = 1.0 + abs(x0) + float(np.max(np.abs(t)))
    roots: list[float] = []
    for a, b, ra, rb in zip(grid[:-1], grid[1:], resid[:-1], resid[1:]):
        if ra == 0.0:
            roots.append(float(a))
            continue
        if ra * rb < 0.0:
            r = brentq(h_defect, float(a), float(b), xtol=1e-13, rtol=1e-15)
            if abs(h_defect(r)) <= 1e-7 * scale:
                roots.append(float(r))
    if resid[-1] == 0.0:
        roots.append(float(grid[-1]))
    if not roots:
        raise NumericError(
            f"no bracket for gamma1bar at x0={x0!r} in window [{lo!r}, {hi!r}]"
        )
    roots_arr = np.asarray(roots)
    dist = np.min(np.abs(roots_arr[:, None] - t[None, :]), axis=1)
    return float(roots_arr[int(np.argmin(dist))])


def eval_gamma1bar(
    x0: float,
    levels: SignalingLevels,
    params: ProblemParams | None = None,
    rule: QuadratureRule | None = None,
) -> float:
    """First-stage strategy value at a single x0.

    Solves g + R(g) = x0 by bracketed scanning and Brent polishing; when the
    equation has several roots the one closest to a signaling level is
    selected.  Raises NumericError if no bracket is found in the scan
    window (reported in the message).  params and rule default to the ones
    recorded in levels.
    """
    params, rule = _resolve_rule_params(levels, params, rule)
    return _invert_h_scalar(levels, rule, float(x0), params)


class _TableInverter:
    """Batch inversion of H(g) = g + R(g) via one dense table.

    Because R does not depend on x0, a single table of H over a window
    covering all queried x0 serves every evaluation.  The table is split at
    slope-sign changes into monotone segments; each segment is inverted by
    linear interpolation, each x0 keeps the candidate preimage nearest to a
    signaling level, and a few Newton steps restore full accuracy.  The
    table is cached and rebuilt only when a query falls outside its window.
    """

    def __init__(self, levels: SignalingLevels, rule: QuadratureRule) -> None:
        self._levels = levels
        self._rule = rule
        self._lo = math.inf
        self._hi = -math.inf
        self._grid: np.ndarray | None = None
        self._h: np.ndarray | None = None

    def _ensure_table(self, x_min: float, x_max: float) -> None:
        t = self._levels.levels
        params = self._levels.params
        pad = 6.0 * params.sigma + 1.0
        lo = min(float(t.min()), x_min) - pad
        hi = max(float(t.max()), x_max) + pad
        if lo >= self._lo and hi <= self._hi:
            return
        lo = min(lo, self._lo)
        hi = max(hi, self._hi)
        grid = np.linspace(lo, hi, _TABLE_POINTS)
        h = np.empty_like(grid)
        for a in range(0, grid.size, _TABLE_CHUNK):
            chunk = grid[a : a + _TABLE_CHUNK]
            h[a : a + _TABLE_CHUNK] = chunk + _signal_pull(
                chunk, t, params, self._rule
            )
        self._lo, self._hi, self._grid, self._h = lo, hi, grid, h

    def __call__(self, x0: np.ndarray) -> np.ndarray:
        x = np.asarray(x0, dtype=float)
        flat = np.ravel(x)
        if flat.size == 0:
            return np.reshape(flat, np.shape(x0))
        if not np.all(np.isfinite(flat)):
            raise NumericError("gamma1bar evaluation requires finite x0")
        self._ensure_table(float(flat.min()), float(flat.max()))
        grid, h = self._grid, self._h
        t = self._levels.levels
        params = self._levels.params

        # Split the table into maximal runs of constant slope sign.
        rising = np.diff(h) > 0.0
        boundaries = [0, *(np.flatnonzero(rising[1:] != rising[:-1]) + 1), h.size - 1]
        best = np.full(flat.shape, np.nan)
        best_dist = np.full(flat.shape, np.inf)
        for a, b in zip(boundaries[:-1], boundaries[1:]):
            seg_h = h[a : b + 1]
            seg_g = grid[a : b + 1]
            if seg_h[0] > seg_h[-1]:
                seg_h, seg_g = seg_h[::-1], seg_g[::-1]
            cand = np.interp(flat, seg_h, seg_g, left=np.nan, right=np.nan)
            dist = np.min(np.abs(cand[:, None] - t[None, :]), axis=1)
            dist = np.where(np.isnan(cand), np.inf, dist)
            take = dist < best_dist
            best = np.where(take, cand, best)
            best_dist = np.where(take, dist, best_dist)

        # Queries beyond the tabulated range of H clamp to the table ends.
        best = np.where(np.isnan(best) & (flat <= h.min()), grid[0], best)
        best = np.where(np.isnan(best), np.where(flat >= h.max(), grid[-1], best), best)

        for _ in range(3):
            f0 = best + _signal_pull(best, t, params, self._rule) - flat
            rp = _signal_pull(best + 1e-6, t, params, self._rule)
            rm = _signal_pull(best - 1e-6, t, params, self._rule)
            slope = 1.0 + (rp - rm) / 2e-6
            step = np.where(np.abs(slope) > 1e-12, f0 / slope, 0.0)
            best = best - np.clip(step, -1.0, 1.0)
        return np.reshape(best, np.shape(x))


def solved_pair(report: SolveReport) -> StrategyPair:
    """Evaluable strategy pair from a converged solve.

    Requires report.converged; otherwise the levels do not solve the system
    and a ConfigurationError is raised.  gamma1bar uses the cached-table
    batch inverter; gamma2 is the posterior mean of the levels.
    """
    if not report.converged:
        raise ConfigurationError(
            "solved_pair requires a converged report "
            f"(residual_norm={report.residual_norm!r} > tol={report.tol!r})"
        )
    return collocation_pair(report.levels)


def collocation_pair(levels: SignalingLevels) -> StrategyPair:
    """Evaluable strategy pair defined by a collocation level vector."""
    rule = build_hermite_rule(levels.rule_order)
    inverter = _TableInverter(levels, rule)
    sv = levels.params.sigma
    weights = rule.weights
    level_values = levels.levels

    def gamma2(y: np.ndarray) -> np.ndarray:
        return gaussian_posterior_mean(np.asarray(y, dtype=float), level_values, weights, sv)

    return StrategyPair(
        gamma1bar=inverter,
        gamma2=gamma2,
        kind="collocation",
        levels=level_values,
    )


# ---------------------------------------------------------------------------
# structural summary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StaircaseSummary:
    """Shape report for a first-stage strategy sampled on a symmetric window.

    steps counts the treads (jumps + 1); tread_values and tread_slopes are
    the mean strategy value and the least-squares slope on each tread;
    line_slope and line_rms are the global least-squares line fit and its
    RMS deviation; shape is "linear" when there are no jumps and the line
    fit is tight, otherwise "staircase".
    """

    steps: int
    breakpoints: tuple[float, ...]
    tread_values: tuple[float, ...]
    tread_slopes: tuple[float, ...]
    line_slope: float
    line_rms: float
    shape: str


def summarize_staircase(
    pair: StrategyPair,
    params: ProblemParams,
    span: float = 8.5,
    samples: int = 20001,
) -> StaircaseSummary:
    """Classify gamma1bar as linear or staircase and report its treads."""
    xs = np.linspace(-span * params.sigma_x, span * params.sigma_x, samples)
    g = np.asarray(pair.gamma1bar(xs), dtype=float)
    breaks = jump_breakpoints(xs, g)
    edges = [xs[0], *breaks, xs[-1]]
    tread_values = []
    tread_slopes = []
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (xs >= a) & (xs <= b)
        tread_values.append(float(np.mean(g[mask])))
        if np.count_nonzero(mask) >= 2:
            tread_slopes.append(float(np.polyfit(xs[mask], g[mask], 1)[0]))
        else:
            tread_slopes.append(0.0)
    slope, intercept = np.polyfit(xs, g, 1)
    fit_rms = float(np.sqrt(np.mean((g - (slope * xs + intercept)) ** 2)))
    scale = max(1.0, float(np.max(np.abs(g))))
    shape = "linear" if not breaks and fit_rms <= 1e-2 * scale else "staircase"
    return StaircaseSummary(
        steps=len(breaks) + 1,
        breakpoints=tuple(float(b) for b in breaks),
        tread_values=tuple(tread_values),
        tread_slopes=tuple(tread_slopes),
        line_slope=float(slope),
        line_rms=fit_rms,
        shape=shape,
    )


def distinct_levels(levels: SignalingLevels) -> np.ndarray:
    """Cluster a level vector into its distinct signaling values.

    Values are sorted and split wherever a gap exceeds 2% of the total
    range (separating treads, which are narrow clusters, from the much
    wider spacing between signaling levels); each cluster is represented by
    its mean.  A zero-range vector is a single level.
    """
    t = np.sort(np.asarray(levels.levels, dtype=float))
    if t.size == 1:
        return t.copy()
    gaps = np.diff(t)
    threshold = 0.02 * float(t[-1] - t[0])
    if threshold == 0.0:
        return np.array([float(t.mean())])
    reps = []
    start = 0
    for i, gap in enumerate(gaps):
        if gap > threshold:
            reps.append(float(np.mean(t[start : i + 1])))
            start = i + 1
    reps.append(float(np.mean(t[start:])))
    return np.asarray(reps)
