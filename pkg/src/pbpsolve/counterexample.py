"""Two-stage Gaussian signaling team: problem data, baselines, and payoffs.

The problem: a scalar state x_0 with a symmetric prior (Gaussian with
variance sigma_x^2, or two-point at +-sigma_x) is moved by a first controller
to x_1 = gamma1bar(x_0); a second controller observes y_1 = x_1 + v with
v ~ G(0, sigma^2) and applies u_2 = gamma2(y_1).  The expected cost is

    J = k^2 E (gamma1bar(x_0) - x_0)^2  +  E (gamma1bar(x_0) - gamma2(y_1))^2
      = stage1 + stage2.

This module defines the problem parameters, strategy pairs in several
representations, two classical baselines (the optimal affine pair and the
sign/tanh pair), the likelihood ratio that removes the state from the
observation channel, payoff evaluation by Monte Carlo and by deterministic
quadrature, and the pointwise stationarity residuals whose simultaneous
vanishing characterizes person-by-person optimal pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, NumericError
from .quadrature import SQRT_PI, QuadratureRule, build_hermite_rule

Strategy = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPrior:
    """x_0 ~ G(0, variance)."""

    variance: float

    def __post_init__(self) -> None:
        if not self.variance > 0.0:
            raise ConfigurationError("prior variance must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(self.variance), size)

    def quad_points(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
        """Points and probabilities so that E f(x_0) ~= sum_j p_j f(xi_j).

        Uses the substitution x_0 = sqrt(2 variance) z, which maps the
        Gaussian expectation onto the e^{-z^2} weight of the rule.
        """
        return math.sqrt(2.0 * self.variance) * rule.nodes, rule.weights / SQRT_PI


@dataclass(frozen=True)
class TwoPointSymmetricPrior:
    """x_0 = +-scale with probability 1/2 each."""

    scale: float

    def __post_init__(self) -> None:
        if not self.scale > 0.0:
            raise ConfigurationError("prior scale must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * np.where(rng.random(size) < 0.5, -1.0, 1.0)

    def quad_points(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
        """The exact two-point expectation; the rule argument is unused."""
        return (np.array([-self.scale, self.scale]), np.array([0.5, 0.5]))


Prior = GaussianPrior | TwoPointSymmetricPrior


@dataclass(frozen=True)
class ProblemParams:
    """Constants (k, sigma, sigma_x) plus the prior family of x_0.

    k weights the first-stage control energy, sigma is the observation noise
    standard deviation, sigma_x the prior scale.  When no prior is given the
    Gaussian prior G(0, sigma_x^2) is used.
    """

    k: float
    sigma: float
    sigma_x: float
    prior: Prior | None = None

    def __post_init__(self) -> None:
        if not (self.k > 0.0 and self.sigma > 0.0 and self.sigma_x > 0.0):
            raise ConfigurationError("k, sigma and sigma_x must all be positive")
        if self.prior is None:
            object.__setattr__(self, "prior", GaussianPrior(self.sigma_x**2))


# ---------------------------------------------------------------------------
# strategy pairs and payoff records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyPair:
    """An evaluable pair (gamma1bar: R->R, gamma2: R->R).

    Both callables are vectorized: they accept ndarray input of any shape and
    return an array of the same shape with finite values for finite input.
    kind tags the representation: "affine" (gamma1bar(x) = lam x,
    gamma2(y) = mu y), "wit" (the sign/tanh baseline), "collocation"
    (signaling-level strategies), "grid" (piecewise-linear samples), or
    "custom".  The tag drives the quadrature payoff dispatch: non-affine
    tags get jump-aware integration.  The first-stage shift gamma1 is
    recovered as gamma1bar(x) - x.
    """

    gamma1bar: Strategy
    gamma2: Strategy
    kind: str = "custom"
    lam: float | None = None
    mu: float | None = None
    levels: np.ndarray | None = None
    grid: np.ndarray | None = None


@dataclass(frozen=True)
class PayoffBreakdown:
    """stage1 = k^2 E u_1^2, stage2 = E x_2^2, total = stage1 + stage2.

    estimator is "monte-carlo" (with samples/seed and the standard error of
    the total) or "quadrature" (with the outer rule order; deterministic).
    """

    stage1: float
    stage2: float
    total: float
    estimator: str
    samples: int | None = None
    seed: int | None = None
    order: int | None = None
    std_error: float | None = None

    def __post_init__(self) -> None:
        if self.stage1 < 0.0 or self.stage2 < 0.0:
            raise ConfigurationError("stage costs must be nonnegative")
        if abs(self.total - (self.stage1 + self.stage2)) > 1e-12 * max(1.0, self.total):
            raise ConfigurationError("total must equal stage1 + stage2")


def affine_pair(lam: float, mu: float) -> StrategyPair:
    """The affine pair gamma1bar(x) = lam x, gamma2(y) = mu y."""
    lam = float(lam)
    mu = float(mu)
    return StrategyPair(
        gamma1bar=lambda x: lam * np.asarray(x, dtype=float),
        gamma2=lambda y: mu * np.asarray(y, dtype=float),
        kind="affine",
        lam=lam,
        mu=mu,
    )


# ---------------------------------------------------------------------------
# shared posterior-mean kernel
# ---------------------------------------------------------------------------

def gaussian_posterior_mean(
    y: np.ndarray,
    locations: np.ndarray,
    prior_weights: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """E{m | y} for a finite mixture: y = m + G(0, sigma^2), m in locations.

    Returns sum_j q_j(y) m_j with posterior weights
    q_j(y) proportional to prior_weights_j exp(-(y - m_j)^2 / (2 sigma^2)),
    evaluated in log space (log-sum-exp) so the ratio stays defined for every
    finite y.  Broadcasts over any y shape.
    """
    y = np.asarray(y, dtype=float)
    locations = np.asarray(locations, dtype=float)
    log_a = (
        -((y[..., None] - locations) ** 2) / (2.0 * sigma * sigma)
        + np.log(prior_weights)
    )
    log_a -= log_a.max(axis=-1, keepdims=True)
    w = np.exp(log_a)
    return (w * locations).sum(axis=-1) / w.sum(axis=-1)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def affine_cost(lam: float, params: ProblemParams) -> tuple[float, float]:
    """Closed-form affine cost components for slope lam with the matched mu.

    mu(lam) = lam^2 sigma_x^2 / (lam^2 sigma_x^2 + sigma^2) is the least
    mean-square estimator gain for y_1 = lam x_0 + v; then
    stage1 = k^2 (lam - 1)^2 sigma_x^2 and
    stage2 = lam^2 (1 - mu)^2 sigma_x^2 + mu^2 sigma^2.
    Returns (mu, total).
    """
    sx2 = params.sigma_x**2
    sv2 = params.sigma**2
    mu = lam * lam * sx2 / (lam * lam * sx2 + sv2)
    stage1 = params.k**2 * (lam - 1.0) ** 2 * sx2
    stage2 = lam * lam * (1.0 - mu) ** 2 * sx2 + mu * mu * sv2
    return mu, stage1 + stage2


def affine_optimal(params: ProblemParams) -> StrategyPair:
    """The affine pair obtained from the signaling quintic.

    The slope is lam = t / sigma_x where t is a real root of

        (t - sigma_x)(1 + t^2)^2 + t / k^2 = 0,

    and mu = lam^2 sigma_x^2 / (lam^2 sigma_x^2 + sigma^2).  The quintic has
    at least one real root (odd degree); among the real roots the one whose
    closed-form affine cost is smallest is selected.  Gaussian prior only.
    """
    if not isinstance(params.prior, GaussianPrior):
        raise ConfigurationError("affine_optimal requires a Gaussian prior")
    sx = params.sigma_x
    coeffs = [1.0, -sx, 2.0, -2.0 * sx, 1.0 + 1.0 / params.k**2, -sx]
    best: tuple[float, float, float] | None = None
    for root in np.roots(coeffs):
        if abs(root.imag) > 1e-9 * max(1.0, abs(root.real)):
            continue
        lam = float(root.real) / sx
        mu, total = affine_cost(lam, params)
        if best is None or total < best[0]:
            best = (total, lam, mu)
    if best is None:
        raise NumericError("no real root of the affine quintic was found")
    _, lam, mu = best
    return affine_pair(lam, mu)


def wit_nonlinear(params: ProblemParams) -> StrategyPair:
    """The sign/tanh baseline pair.

    gamma1bar(x_0) = sigma_x sgn(x_0) concentrates x_1 on the two points
    +-sigma_x; the matching second stage is the exact conditional mean
    E{gamma1bar(x_0) | y_1} = sigma_x tanh(sigma_x y_1 / sigma^2), which is
    the same closed form for the Gaussian and the two-point prior because
    both make x_1 a symmetric two-point mixture.  The sign map uses the
    right-continuous convention sgn(0) = +1 so the range is exactly
    {-sigma_x, +sigma_x} (the choice at the single point 0 carries no
    probability mass).
    """
    sx = params.sigma_x
    scale = sx / params.sigma**2

    def gamma1bar(x: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(x, dtype=float) >= 0.0, sx, -sx)

    def gamma2(y: np.ndarray) -> np.ndarray:
        return sx * np.tanh(scale * np.asarray(y, dtype=float))

    return StrategyPair(gamma1bar=gamma1bar, gamma2=gamma2, kind="wit")


# ---------------------------------------------------------------------------
# likelihood ratio
# ---------------------------------------------------------------------------

def rnd_density(
    params: ProblemParams,
    gamma1bar: Strategy,
    x0: float,
    y1: float,
) -> float:
    """Likelihood ratio of y_1 under the strategy against the y_1 ~ G(0, sigma^2) reference.

    Lambda(x_0, y_1) = exp(-(y_1 - gamma1bar(x_0))^2 / 2 sigma^2)
                     / exp(-y_1^2 / 2 sigma^2),
    computed as the exponential of the log difference so no intermediate
    underflows; the exponent is capped at 700 so the result stays finite
    (the cap only binds where the true ratio exceeds ~1e304).
    """
    g = float(np.asarray(gamma1bar(np.asarray([x0], dtype=float)), dtype=float)[0])
    sv2 = params.sigma**2
    log_ratio = (y1 * y1 - (y1 - g) ** 2) / (2.0 * sv2)
    return float(np.exp(min(log_ratio, 700.0)))


# ---------------------------------------------------------------------------
# Monte Carlo payoff
# ---------------------------------------------------------------------------

def payoff_mc(
    params: ProblemParams,
    pair: StrategyPair,
    samples: int,
    seed: int,
) -> PayoffBreakdown:
    """Sample-mean payoff estimate with a deterministic seeded stream.

    Two independent substreams (spawned from one SeedSequence so the draw
    sets are reproducible and independent of any internal chunking) supply
    x_0 from the prior and v from G(0, sigma^2).  Returns the sample means
    of k^2 (gamma1bar(x_0) - x_0)^2 and (gamma1bar(x_0) - gamma2(y_1))^2
    plus the standard error of the total.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    seq_x, seq_v = np.random.SeedSequence(seed).spawn(2)
    rng_x = np.random.default_rng(seq_x)
    rng_v = np.random.default_rng(seq_v)
    x0 = params.prior.sample(rng_x, samples)
    v = rng_v.normal(0.0, params.sigma, samples)

    g1 = np.asarray(pair.gamma1bar(x0), dtype=float)
    g2 = np.asarray(pair.gamma2(g1 + v), dtype=float)
    cost = params.k**2 * (g1 - x0) ** 2 + (g1 - g2) ** 2
    stage1 = float(params.k**2 * np.mean((g1 - x0) ** 2))
    stage2 = float(np.mean((g1 - g2) ** 2))
    std_error = float(np.std(cost) / math.sqrt(samples))
    return PayoffBreakdown(
        stage1=stage1,
        stage2=stage2,
        total=stage1 + stage2,
        estimator="monte-carlo",
        samples=int(samples),
        seed=int(seed),
        std_error=std_error,
    )


# ---------------------------------------------------------------------------
# deterministic quadrature payoff
# ---------------------------------------------------------------------------

def _composite_gauss_nodes(
    sigma: float, half_range: float = 8.0, width: float = 0.25, order: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights against the G(0, sigma^2) density.

    The interval [-half_range sigma, half_range sigma] is split into panels of
    width `width * sigma`, each carrying an order-`order` Legendre rule with
    the Gaussian density folded into the weights.  Resolves integrands with
    features much narrower than sigma (steep posterior-mean transitions).
    """
    xg, wg = leggauss(order)
    edges = np.arange(-half_range * sigma, half_range * sigma + 1e-12, width * sigma)
    norm = sigma * math.sqrt(2.0 * math.pi)
    points, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid + half * xg
        points.append(x)
        weights.append(half * wg * np.exp(-x * x / (2.0 * sigma * sigma)) / norm)
    return np.concatenate(points), np.concatenate(weights)


def _piecewise_outer_nodes(
    sigma_x: float,
    breakpoints: Sequence[float],
    order: int = 24,
    half_range: float = 8.5,
    max_width: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels against G(0, sigma_x^2), split at breakpoints.

    Panels never straddle a listed breakpoint (where the integrand may jump)
    and are no wider than max_width * sigma_x, so each panel sees an analytic
    integrand and the composite rule converges at spectral rate.
    """
    xg, wg = leggauss(order)
    interior = sorted(b for b in breakpoints if abs(b) < half_range * sigma_x)
    edges = [-half_range * sigma_x] + interior + [half_range * sigma_x]
    norm = sigma_x * math.sqrt(2.0 * math.pi)
    points, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        panels = max(1, int(math.ceil((b - a) / (max_width * sigma_x))))
        for j in range(panels):
            lo = a + (b - a) * j / panels
            hi = a + (b - a) * (j + 1) / panels
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            x = mid + half * xg
            points.append(x)
            weights.append(half * wg * np.exp(-x * x / (2.0 * sigma_x * sigma_x)) / norm)
    return np.concatenate(points), np.concatenate(weights)


def jump_breakpoints(xs: np.ndarray, values: np.ndarray, range_frac: float = 0.02) -> list[float]:
    """Detect jump locations in sampled values of a piecewise-smooth map.

    A gap between consecutive samples counts as a jump when it exceeds ten
    times the median gap (the within-tread drift at this sampling density)
    plus range_frac times the overall value range.  Returns the midpoints of
    the jumping sample intervals.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    gaps = np.abs(np.diff(values))
    if gaps.size == 0:
        return []
    threshold = 10.0 * float(np.median(gaps)) + range_frac * float(
        values.max() - values.min()
    )
    jumping = gaps > threshold
    return list(0.5 * (xs[:-1][jumping] + xs[1:][jumping]))


def _scan_breakpoints(pair: StrategyPair, params: ProblemParams) -> list[float]:
    sx = params.sigma_x
    xs = np.linspace(-8.5 * sx, 8.5 * sx, 20001)
    g = np.asarray(pair.gamma1bar(xs), dtype=float)
    return jump_breakpoints(xs, g)


def payoff_quadrature(
    params: ProblemParams,
    pair: StrategyPair,
    outer_rule: QuadratureRule,
    inner_rule: QuadratureRule,
) -> PayoffBreakdown:
    """Deterministic payoff via nested quadrature.

    stage1 = k^2 E (gamma1bar(x_0) - x_0)^2 over the prior;
    stage2 = E (gamma1bar(x_0) - gamma2(gamma1bar(x_0) + v))^2 over prior and
    noise.  Affine pairs under a Gaussian prior use the plain nested
    Gauss-Hermite substitution with the given rules (exact for these
    polynomial integrands when both orders are >= 2).  All other pairs are
    treated as piecewise smooth: gamma1bar is scanned for jumps (the sign map
    jumps at 0; signaling-level strategies at their tread boundaries), the
    outer integral uses Gauss-Legendre panels split at those jumps, and the
    inner integral uses a composite rule fine enough for steep posterior
    means.  The given rule orders set the per-panel orders.
    """
    k2 = params.k**2
    prior = params.prior

    smooth_affine = pair.kind == "affine" and isinstance(prior, GaussianPrior)
    if smooth_affine:
        x0, px = prior.quad_points(outer_rule)
        v = math.sqrt(2.0) * params.sigma * inner_rule.nodes
        pv = inner_rule.weights / SQRT_PI
    else:
        if isinstance(prior, GaussianPrior):
            if pair.kind == "wit":
                breakpoints = [0.0]
            else:
                breakpoints = _scan_breakpoints(pair, params)
            x0, px = _piecewise_outer_nodes(
                params.sigma_x, breakpoints, order=max(16, outer_rule.order)
            )
        else:
            x0, px = prior.quad_points(outer_rule)
        v, pv = _composite_gauss_nodes(
            params.sigma, order=max(16, inner_rule.order)
        )

    g1 = np.asarray(pair.gamma1bar(x0), dtype=float)
    g2 = np.asarray(pair.gamma2(g1[:, None] + v[None, :]), dtype=float)
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise NumericError("strategy evaluation produced non-finite values")
    stage1 = float(k2 * np.dot(px, (g1 - x0) ** 2))
    stage2 = float(np.dot(px, ((g1[:, None] - g2) ** 2) @ pv))
    return PayoffBreakdown(
        stage1=stage1,
        stage2=stage2,
        total=stage1 + stage2,
        estimator="quadrature",
        order=outer_rule.order,
    )


# ---------------------------------------------------------------------------
# stationarity residuals
# ---------------------------------------------------------------------------

def stationarity_residual(
    params: ProblemParams,
    pair: StrategyPair,
    rule: QuadratureRule,
    x0_grid: np.ndarray,
    y1_grid: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise residuals of the two coupled optimality equations.

    r1(x_0) = gamma1bar(x_0) - x_0
              + (1/k^2)        E{ gamma1bar - gamma2(y_1)        | x_0 }
              + (1/2 k^2 s^2)  E{ (y_1 - gamma1bar)(gamma1bar - gamma2)^2 | x_0 },
    with s = sigma and the conditional expectations over v computed by the
    given Gauss-Hermite rule; r2(y_1) = gamma2(y_1) - E{gamma1bar(x_0) | y_1}
    with the conditional mean computed as the log-sum-exp-stabilized Bayes
    ratio over the prior discretized by the same rule.  Both residuals vanish
    at a person-by-person optimal pair.
    """
    k2 = params.k**2
    sv = params.sigma
    x0_grid = np.asarray(x0_grid, dtype=float)
    y1_grid = np.asarray(y1_grid, dtype=float)

    v = math.sqrt(2.0) * sv * rule.nodes
    pv = rule.weights / SQRT_PI
    g1 = np.asarray(pair.gamma1bar(x0_grid), dtype=float)
    g2 = np.asarray(pair.gamma2(g1[:, None] + v[None, :]), dtype=float)
    diff = g1[:, None] - g2
    cond_linear = diff @ pv
    cond_weighted = (v[None, :] * diff**2) @ pv
    r1 = g1 - x0_grid + cond_linear / k2 + cond_weighted / (2.0 * k2 * sv * sv)

    xi, p_xi = params.prior.quad_points(rule)
    g1_xi = np.asarray(pair.gamma1bar(xi), dtype=float)
    posterior = gaussian_posterior_mean(y1_grid, g1_xi, p_xi, sv)
    r2 = np.asarray(pair.gamma2(y1_grid), dtype=float) - posterior
    return r1, r2
