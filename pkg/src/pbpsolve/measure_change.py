"""Exact change-of-measure identities on finite decentralized team models.

A model has a finite state space, a horizon n, and K stations, each with a
finite observation and action alphabet.  In period t (0-based internally):
the state is realized (x_0 ~ initial law; x_t ~ S_t(. | x_{t-1}, u_{t-1})
afterwards), every station picks an action from its information -- a fixed
causal pattern of strictly earlier observations and actions -- and then the
joint observation y_t ~ Q_t(. | x_t, u_t) is drawn.

The reference measure keeps the initial state law and the strategies but
draws every later state from a fixed full-support law Psi_t and every
observation from a fixed full-support law Phi_t, so states and observations
become primitive randomness decoupled from the actions.  The likelihood
ratio process (1-based time):

    Theta_t = Lambda_t M_t,
    Lambda_t = prod_{s<=t} Q_s(y_s | x_s, u_s) / Phi_s(y_s),
    M_1 = 1,   M_t = prod_{s=2..t} S_s(x_s | x_{s-1}, u_{s-1}) / Psi_s(x_s),

restores the original measure: E_ref[Theta_t] = 1 for every t and profile,
Theta is a reference-filtration martingale, and every expected cost equals
its Theta-weighted reference expectation.  Because the models are finite,
the module verifies these identities by exhaustive enumeration with
compensated (fsum) accumulation, i.e. to near machine precision rather than
statistically.  It also brute-forces globally optimal and person-by-person
optimal profiles (a person-by-person deviation replaces one station's maps
at all periods) to confirm that global optima are person-by-person optimal.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError

_ROW_TOL = 1e-12
_MAX_TRAJECTORIES = 10_000_000
_MAX_PROFILES = 1_000_000

InfoItem = tuple[str, int, int]


def _product(values: Sequence[int]) -> int:
    out = 1
    for v in values:
        out *= int(v)
    return out


def _joint_index(components: Sequence[int], sizes: Sequence[int]) -> int:
    idx = 0
    for c, s in zip(components, sizes):
        idx = idx * s + c
    return idx


def _split_index(idx: int, sizes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for s in reversed(sizes):
        out.append(idx % s)
        idx //= s
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

def _check_stochastic(name: str, arr: np.ndarray) -> None:
    if np.any(arr < 0.0):
        raise ConfigurationError(f"{name} has negative entries")
    sums = arr.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > _ROW_TOL:
        raise ConfigurationError(
            f"{name} rows must sum to 1 within {_ROW_TOL} "
            f"(worst deviation {float(np.max(np.abs(sums - 1.0))):.3e})"
        )


@dataclass(frozen=True)
class FiniteTeamModel:
    """Explicit finite team control model with reference laws and costs.

    horizon: number of periods n >= 1.
    num_states: size of the state space.
    obs_sizes / action_sizes: per-station alphabet sizes (equal length K).
    initial: state law of period 1, length num_states.
    transitions: n-1 kernels, transitions[t-1][x][u][x'] for period t+1
        (u is the joint action index; stations are mixed-radix packed in
        station order).
    observations: n kernels, observations[t][x][u][y] (y joint index).
    obs_reference: n full-support laws Phi over joint observations.
    state_reference: n-1 full-support laws Psi over states (periods 2..n).
    stage_costs: n arrays cost[t][x][u]; terminal_cost: array over states.
    info: info[j][t] is the tuple of items station j reads in period t;
        an item ("y", s, m) or ("u", s, m) names station m's observation or
        action of period s, with s < t (0-based; strictly causal).
    """

    horizon: int
    num_states: int
    obs_sizes: tuple[int, ...]
    action_sizes: tuple[int, ...]
    initial: np.ndarray
    transitions: tuple[np.ndarray, ...]
    observations: tuple[np.ndarray, ...]
    obs_reference: tuple[np.ndarray, ...]
    state_reference: tuple[np.ndarray, ...]
    stage_costs: tuple[np.ndarray, ...]
    terminal_cost: np.ndarray
    info: tuple[tuple[tuple[InfoItem, ...], ...], ...]

    def __post_init__(self) -> None:
        def freeze(a: object) -> np.ndarray:
            arr = np.array(a, dtype=float)
            arr.flags.writeable = False
            return arr

        object.__setattr__(self, "obs_sizes", tuple(int(s) for s in self.obs_sizes))
        object.__setattr__(self, "action_sizes", tuple(int(s) for s in self.action_sizes))
        object.__setattr__(self, "initial", freeze(self.initial))
        object.__setattr__(self, "transitions", tuple(freeze(a) for a in self.transitions))
        object.__setattr__(self, "observations", tuple(freeze(a) for a in self.observations))
        object.__setattr__(self, "obs_reference", tuple(freeze(a) for a in self.obs_reference))
        object.__setattr__(self, "state_reference", tuple(freeze(a) for a in self.state_reference))
        object.__setattr__(self, "stage_costs", tuple(freeze(a) for a in self.stage_costs))
        object.__setattr__(self, "terminal_cost", freeze(self.terminal_cost))
        object.__setattr__(
            self,
            "info",
            tuple(
                tuple(tuple((str(k), int(s), int(m)) for k, s, m in items) for items in station)
                for station in self.info
            ),
        )

        n = self.horizon
        if n < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.num_states < 1:
            raise ConfigurationError("num_states must be >= 1")
        if len(self.obs_sizes) != len(self.action_sizes) or not self.obs_sizes:
            raise ConfigurationError(
                "obs_sizes and action_sizes must be nonempty and equally long"
            )
        if min(self.obs_sizes) < 1 or min(self.action_sizes) < 1:
            raise ConfigurationError("alphabet sizes must be >= 1")

        na, no, nx = self.total_actions, self.total_obs, self.num_states
        if self.initial.shape != (nx,):
            raise ConfigurationError("initial law must have length num_states")
        _check_stochastic("initial law", self.initial[None, :])
        if len(self.transitions) != n - 1:
            raise ConfigurationError("need horizon-1 transition kernels")
        for t, kernel in enumerate(self.transitions):
            if kernel.shape != (nx, na, nx):
                raise ConfigurationError(
                    f"transition kernel {t} must have shape (states, actions, states)"
                )
            _check_stochastic(f"transition kernel {t}", kernel)
        if len(self.observations) != n:
            raise ConfigurationError("need horizon observation kernels")
        for t, kernel in enumerate(self.observations):
            if kernel.shape != (nx, na, no):
                raise ConfigurationError(
                    f"observation kernel {t} must have shape (states, actions, observations)"
                )
            _check_stochastic(f"observation kernel {t}", kernel)
        if len(self.obs_reference) != n:
            raise ConfigurationError("need horizon observation reference laws")
        for t, law in enumerate(self.obs_reference):
            if law.shape != (no,):
                raise ConfigurationError(f"observation reference {t} has wrong length")
            if np.any(law <= 0.0):
                raise ConfigurationError(f"observation reference {t} must have full support")
            _check_stochastic(f"observation reference {t}", law[None, :])
        if len(self.state_reference) != n - 1:
            raise ConfigurationError("need horizon-1 state reference laws")
        for t, law in enumerate(self.state_reference):
            if law.shape != (nx,):
                raise ConfigurationError(f"state reference {t} has wrong length")
            if np.any(law <= 0.0):
                raise ConfigurationError(f"state reference {t} must have full support")
            _check_stochastic(f"state reference {t}", law[None, :])
        if len(self.stage_costs) != n:
            raise ConfigurationError("need horizon stage cost arrays")
        for t, cost in enumerate(self.stage_costs):
            if cost.shape != (nx, na):
                raise ConfigurationError(f"stage cost {t} must have shape (states, actions)")
            if not np.all(np.isfinite(cost)):
                raise ConfigurationError(f"stage cost {t} must be finite")
        if self.terminal_cost.shape != (nx,):
            raise ConfigurationError("terminal cost must have length num_states")
        if not np.all(np.isfinite(self.terminal_cost)):
            raise ConfigurationError("terminal cost must be finite")

        if len(self.info) != self.stations:
            raise ConfigurationError("need one info pattern per station")
        for j, station in enumerate(self.info):
            if len(station) != n:
                raise ConfigurationError(f"station {j} needs one info tuple per period")
            for t, items in enumerate(station):
                for kind, s, m in items:
                    if kind not in ("y", "u"):
                        raise ConfigurationError(
                            f"station {j} period {t}: item kind must be 'y' or 'u', got {kind!r}"
                        )
                    if not 0 <= s < t:
                        raise ConfigurationError(
                            f"station {j} period {t}: item ({kind!r}, {s}, {m}) is not "
                            "strictly causal (need 0 <= s < t)"
                        )
                    if not 0 <= m < self.stations:
                        raise ConfigurationError(
                            f"station {j} period {t}: station index {m} out of range"
                        )

    @property
    def stations(self) -> int:
        return len(self.obs_sizes)

    @property
    def total_actions(self) -> int:
        return _product(self.action_sizes)

    @property
    def total_obs(self) -> int:
        return _product(self.obs_sizes)

    def info_shape(self, station: int, period: int) -> tuple[int, ...]:
        """Alphabet sizes of the info items read by a station in a period."""
        sizes = []
        for kind, _, m in self.info[station][period]:
            sizes.append(self.obs_sizes[m] if kind == "y" else self.action_sizes[m])
        return tuple(sizes)


@dataclass(frozen=True)
class StrategyProfile:
    """Deterministic maps from information to actions for every station.

    maps[j][t] is an integer array whose axes are the info items of station
    j in period t (a 0-d array when the info is empty); entries are action
    indices of station j.
    """

    maps: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self) -> None:
        frozen = []
        for station in self.maps:
            rows = []
            for arr in station:
                a = np.array(arr, dtype=int)
                a.flags.writeable = False
                rows.append(a)
            frozen.append(tuple(rows))
        object.__setattr__(self, "maps", tuple(frozen))


def validate_profile(model: FiniteTeamModel, profile: StrategyProfile) -> None:
    """Raise ConfigurationError unless the profile fits the model."""
    if len(profile.maps) != model.stations:
        raise ConfigurationError("profile must have one map sequence per station")
    for j, station in enumerate(profile.maps):
        if len(station) != model.horizon:
            raise ConfigurationError(f"station {j} must have one map per period")
        for t, arr in enumerate(station):
            shape = model.info_shape(j, t)
            if arr.shape != shape:
                raise ConfigurationError(
                    f"station {j} period {t}: map shape {arr.shape} does not match "
                    f"info shape {shape}"
                )
            if arr.size and (arr.min() < 0 or arr.max() >= model.action_sizes[j]):
                raise ConfigurationError(
                    f"station {j} period {t}: action indices out of range"
                )


def uniform_profile(model: FiniteTeamModel, action: int = 0) -> StrategyProfile:
    """The profile in which every station always plays the given action index."""
    maps = []
    for j in range(model.stations):
        if not 0 <= action < model.action_sizes[j]:
            raise ConfigurationError("action index out of range for some station")
        maps.append(
            tuple(
                np.full(model.info_shape(j, t), action, dtype=int)
                for t in range(model.horizon)
            )
        )
    return StrategyProfile(maps=tuple(maps))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _joint_action(
    model: FiniteTeamModel,
    profile: StrategyProfile,
    period: int,
    observations: Sequence[int],
    actions: Sequence[int],
) -> int:
    components = []
    for j in range(model.stations):
        key = []
        for kind, s, m in model.info[j][period]:
            if kind == "y":
                key.append(_split_index(observations[s], model.obs_sizes)[m])
            else:
                key.append(_split_index(actions[s], model.action_sizes)[m])
        components.append(int(profile.maps[j][period][tuple(key)]))
    return _joint_index(components, model.action_sizes)


@dataclass(frozen=True)
class TrajectoryWeight:
    """One trajectory with its probabilities and likelihood-ratio path.

    states/observations/actions are period-indexed tuples (observations and
    actions as joint indices); thetas[t] is Theta_{t+1} in 1-based time.
    """

    states: tuple[int, ...]
    observations: tuple[int, ...]
    actions: tuple[int, ...]
    probability: float
    reference_probability: float
    thetas: tuple[float, ...]


def _enumerate(
    model: FiniteTeamModel, profile: StrategyProfile
) -> Iterator[TrajectoryWeight]:
    n = model.horizon

    def recurse(
        t: int,
        states: list[int],
        observations: list[int],
        actions: list[int],
        p_orig: float,
        p_ref: float,
        lam: float,
        mart: float,
        thetas: list[float],
    ) -> Iterator[TrajectoryWeight]:
        if t == n:
            yield TrajectoryWeight(
                states=tuple(states),
                observations=tuple(observations),
                actions=tuple(actions),
                probability=p_orig,
                reference_probability=p_ref,
                thetas=tuple(thetas),
            )
            return
        u = _joint_action(model, profile, t, observations, actions)
        if t == 0:
            state_probs = model.initial
            ref_probs = model.initial
        else:
            state_probs = model.transitions[t - 1][states[-1], actions[-1]]
            ref_probs = model.state_reference[t - 1]
        for x in range(model.num_states):
            px = float(state_probs[x])
            rx = float(ref_probs[x])
            if rx == 0.0:
                # Only possible in period 1, where both measures share the
                # initial law; the branch is null under both.
                continue
            mart_new = mart if t == 0 else mart * (px / rx)
            q = model.observations[t][x, u]
            phi = model.obs_reference[t]
            for y in range(model.total_obs):
                qy = float(q[y])
                py = float(phi[y])
                lam_new = lam * (qy / py)
                yield from recurse(
                    t + 1,
                    states + [x],
                    observations + [y],
                    actions + [u],
                    p_orig * px * qy,
                    p_ref * rx * py,
                    lam_new,
                    mart_new,
                    thetas + [lam_new * mart_new],
                )

    yield from recurse(0, [], [], [], 1.0, 1.0, 1.0, 1.0, [])


def joint_measure_original(
    model: FiniteTeamModel, profile: StrategyProfile
) -> dict[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]], float]:
    """Exhaustive original-measure trajectory law.

    Maps (states, observations, actions) to probability; entries that are
    null under both measures are omitted.  Refuses models with more than
    1e7 trajectories.
    """
    validate_profile(model, profile)
    count = (model.num_states * model.total_obs) ** model.horizon
    if count > _MAX_TRAJECTORIES:
        raise ConfigurationError(
            f"model enumerates {count} trajectories, above the {_MAX_TRAJECTORIES} cap"
        )
    return {
        (w.states, w.observations, w.actions): w.probability
        for w in _enumerate(model, profile)
    }


@dataclass(frozen=True)
class RadonNikodymPath:
    """Likelihood-ratio factors along one trajectory (1-based time in docs).

    lambda_path[t] is Lambda_{t+1}, martingale_path[t] is M_{t+1} (so
    martingale_path[0] == 1 always), thetas[t] their product.
    """

    lambda_path: np.ndarray
    martingale_path: np.ndarray
    thetas: np.ndarray


def rnd_process(
    model: FiniteTeamModel,
    profile: StrategyProfile,
    states: Sequence[int],
    observations: Sequence[int],
) -> RadonNikodymPath:
    """Likelihood-ratio path for one realized trajectory.

    Actions are reconstructed from the profile.  The first martingale factor
    is 1 by convention: the initial state law is shared by both measures, so
    the state ratio only starts at period 2.
    """
    validate_profile(model, profile)
    n = model.horizon
    if len(states) != n or len(observations) != n:
        raise ConfigurationError("states and observations must have length horizon")
    lam = 1.0
    mart = 1.0
    actions: list[int] = []
    lams, marts, thetas = [], [], []
    for t in range(n):
        u = _joint_action(model, profile, t, observations, actions)
        actions.append(u)
        x = int(states[t])
        y = int(observations[t])
        if t > 0:
            mart *= float(model.transitions[t - 1][states[t - 1], actions[t - 1], x]) / float(
                model.state_reference[t - 1][x]
            )
        lam *= float(model.observations[t][x, u, y]) / float(model.obs_reference[t][y])
        lams.append(lam)
        marts.append(mart)
        thetas.append(lam * mart)
    return RadonNikodymPath(
        lambda_path=np.asarray(lams),
        martingale_path=np.asarray(marts),
        thetas=np.asarray(thetas),
    )


# ---------------------------------------------------------------------------
# the identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MartingaleReport:
    """Exact verification of the likelihood-ratio martingale identities.

    unit_mean_error: worst |E_ref[Theta_t] - 1| over t.
    conditional_error: worst |E_ref[Theta_{t+1} | history] - Theta_t| over
    every positive-reference-probability history of every length.
    """

    unit_mean_error: float
    conditional_error: float
    passed: bool
    tol: float


def verify_martingale(
    model: FiniteTeamModel, profile: StrategyProfile, tol: float = 1e-12
) -> MartingaleReport:
    """Check E_ref[Theta_t] = 1 and the conditional martingale property."""
    validate_profile(model, profile)
    n = model.horizon
    unit_terms: list[list[float]] = [[] for _ in range(n)]
    conditional_error = 0.0

    def recurse(
        t: int,
        states: list[int],
        observations: list[int],
        actions: list[int],
        p_ref: float,
        lam: float,
        mart: float,
        theta_prev: float,
    ) -> None:
        nonlocal conditional_error
        if t == n:
            return
        u = _joint_action(model, profile, t, observations, actions)
        if t == 0:
            state_probs = model.initial
            ref_probs = model.initial
        else:
            state_probs = model.transitions[t - 1][states[-1], actions[-1]]
            ref_probs = model.state_reference[t - 1]
        conditional_terms = []
        for x in range(model.num_states):
            px = float(state_probs[x])
            rx = float(ref_probs[x])
            if rx == 0.0:
                continue
            mart_new = mart if t == 0 else mart * (px / rx)
            q = model.observations[t][x, u]
            phi = model.obs_reference[t]
            for y in range(model.total_obs):
                lam_new = lam * float(q[y]) / float(phi[y])
                theta = lam_new * mart_new
                step_ref = rx * float(phi[y])
                unit_terms[t].append(p_ref * step_ref * theta)
                conditional_terms.append(step_ref * theta)
                recurse(
                    t + 1,
                    states + [x],
                    observations + [y],
                    actions + [u],
                    p_ref * step_ref,
                    lam_new,
                    mart_new,
                    theta,
                )
        conditional_error = max(
            conditional_error, abs(math.fsum(conditional_terms) - theta_prev)
        )

    recurse(0, [], [], [], 1.0, 1.0, 1.0, 1.0)
    unit_mean_error = max(abs(math.fsum(terms) - 1.0) for terms in unit_terms)
    return MartingaleReport(
        unit_mean_error=unit_mean_error,
        conditional_error=conditional_error,
        passed=bool(unit_mean_error <= tol and conditional_error <= tol),
        tol=tol,
    )


@dataclass(frozen=True)
class PayoffEquivalenceReport:
    """Expected cost computed under both measures.

    original: E[sum_t cost_t + terminal] under the strategy-induced measure.
    via_reference: sum_t E_ref[cost_t Theta_t] + E_ref[terminal Theta_n].
    """

    original: float
    via_reference: float
    difference: float
    passed: bool
    tol: float


def payoff_equivalence(
    model: FiniteTeamModel, profile: StrategyProfile, tol: float = 1e-12
) -> PayoffEquivalenceReport:
    """Check that Theta-weighting the reference measure reproduces the cost."""
    validate_profile(model, profile)
    original_terms: list[float] = []
    reference_terms: list[float] = []
    for w in _enumerate(model, profile):
        stage = [
            float(model.stage_costs[t][w.states[t], w.actions[t]])
            for t in range(model.horizon)
        ]
        terminal = float(model.terminal_cost[w.states[-1]])
        original_terms.append(w.probability * math.fsum(stage + [terminal]))
        weighted = [stage[t] * w.thetas[t] for t in range(model.horizon)]
        weighted.append(terminal * w.thetas[-1])
        reference_terms.append(w.reference_probability * math.fsum(weighted))
    original = math.fsum(original_terms)
    via_reference = math.fsum(reference_terms)
    difference = abs(original - via_reference)
    return PayoffEquivalenceReport(
        original=original,
        via_reference=via_reference,
        difference=difference,
        passed=bool(difference <= tol),
        tol=tol,
    )


def expected_cost(model: FiniteTeamModel, profile: StrategyProfile) -> float:
    """Exact expected total cost of a profile under the original measure."""
    validate_profile(model, profile)
    terms = []
    for w in _enumerate(model, profile):
        if w.probability == 0.0:
            continue
        stage = [
            float(model.stage_costs[t][w.states[t], w.actions[t]])
            for t in range(model.horizon)
        ]
        terms.append(w.probability * math.fsum(stage + [float(model.terminal_cost[w.states[-1]])]))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# brute-force optimality
# ---------------------------------------------------------------------------

def _station_strategy_space(
    model: FiniteTeamModel, station: int
) -> list[tuple[np.ndarray, ...]]:
    per_period = []
    for t in range(model.horizon):
        shape = model.info_shape(station, t)
        configs = _product(shape)
        arrays = [
            np.asarray(assignment, dtype=int).reshape(shape)
            for assignment in itertools.product(
                range(model.action_sizes[station]), repeat=configs
            )
        ]
        per_period.append(arrays)
    return [tuple(choice) for choice in itertools.product(*per_period)]


def profile_count(model: FiniteTeamModel) -> int:
    """Number of deterministic strategy profiles of the model."""
    total = 1
    for j in range(model.stations):
        for t in range(model.horizon):
            total *= model.action_sizes[j] ** _product(model.info_shape(j, t))
    return total


@dataclass(frozen=True)
class BruteForceReport:
    """Global optimum and the person-by-person optimality check.

    best_cost is the global minimum over all profiles; best_profile attains
    it.  For every profile within tol of the optimum, every single-station
    deviation (one station's maps replaced at all periods) was enumerated;
    worst_deviation_gain is the largest cost reduction any such deviation
    achieved (nonpositive up to roundoff when global optima are
    person-by-person optimal).
    """

    best_cost: float
    best_profile: StrategyProfile
    num_profiles: int
    num_global_optima: int
    worst_deviation_gain: float
    pbp_holds: bool
    tol: float


def brute_force_pbp(model: FiniteTeamModel, tol: float = 1e-12) -> BruteForceReport:
    """Exhaustively confirm that global optima are person-by-person optimal."""
    total = profile_count(model)
    if total > _MAX_PROFILES:
        raise ConfigurationError(
            f"model has {total} strategy profiles, above the {_MAX_PROFILES} cap"
        )
    spaces = [_station_strategy_space(model, j) for j in range(model.stations)]
    costs: dict[tuple[int, ...], float] = {}
    for key in itertools.product(*(range(len(s)) for s in spaces)):
        profile = StrategyProfile(
            maps=tuple(spaces[j][key[j]] for j in range(model.stations))
        )
        costs[key] = expected_cost(model, profile)
    best_key = min(costs, key=lambda k: costs[k])
    best_cost = costs[best_key]
    scale = max(1.0, abs(best_cost))
    global_keys = [k for k, c in costs.items() if c <= best_cost + tol * scale]

    worst_gain = -math.inf
    for key in global_keys:
        for j in range(model.stations):
            for alt in range(len(spaces[j])):
                if alt == key[j]:
                    continue
                alt_key = tuple(alt if jj == j else key[jj] for jj in range(model.stations))
                worst_gain = max(worst_gain, costs[key] - costs[alt_key])
    if worst_gain == -math.inf:
        worst_gain = 0.0
    return BruteForceReport(
        best_cost=best_cost,
        best_profile=StrategyProfile(
            maps=tuple(spaces[j][best_key[j]] for j in range(model.stations))
        ),
        num_profiles=total,
        num_global_optima=len(global_keys),
        worst_deviation_gain=worst_gain,
        pbp_holds=bool(worst_gain <= tol * scale),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# serialization and generators
# ---------------------------------------------------------------------------

def model_to_dict(model: FiniteTeamModel) -> dict:
    """Plain-JSON representation (lists; info items as [kind, s, m], 0-based)."""
    return {
        "horizon": model.horizon,
        "num_states": model.num_states,
        "obs_sizes": list(model.obs_sizes),
        "action_sizes": list(model.action_sizes),
        "initial": model.initial.tolist(),
        "transitions": [a.tolist() for a in model.transitions],
        "observations": [a.tolist() for a in model.observations],
        "obs_reference": [a.tolist() for a in model.obs_reference],
        "state_reference": [a.tolist() for a in model.state_reference],
        "stage_costs": [a.tolist() for a in model.stage_costs],
        "terminal_cost": model.terminal_cost.tolist(),
        "info": [
            [[list(item) for item in items] for items in station]
            for station in model.info
        ],
    }


_REQUIRED_FIELDS = (
    "horizon",
    "num_states",
    "obs_sizes",
    "action_sizes",
    "initial",
    "transitions",
    "observations",
    "obs_reference",
    "state_reference",
    "stage_costs",
    "terminal_cost",
    "info",
)


def model_from_dict(data: dict) -> FiniteTeamModel:
    """Build and validate a model from its plain-JSON representation."""
    if not isinstance(data, dict):
        raise ConfigurationError("model document must be a JSON object")
    missing = [f for f in _REQUIRED_FIELDS if f not in data]
    if missing:
        raise ConfigurationError(f"model document is missing fields: {', '.join(missing)}")
    try:
        info = tuple(
            tuple(
                tuple((str(k), int(s), int(m)) for k, s, m in items)
                for items in station
            )
            for station in data["info"]
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed info pattern: {exc}") from exc
    try:
        return FiniteTeamModel(
            horizon=int(data["horizon"]),
            num_states=int(data["num_states"]),
            obs_sizes=tuple(int(s) for s in data["obs_sizes"]),
            action_sizes=tuple(int(s) for s in data["action_sizes"]),
            initial=data["initial"],
            transitions=tuple(data["transitions"]),
            observations=tuple(data["observations"]),
            obs_reference=tuple(data["obs_reference"]),
            state_reference=tuple(data["state_reference"]),
            stage_costs=tuple(data["stage_costs"]),
            terminal_cost=data["terminal_cost"],
            info=info,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed model document: {exc}") from exc


def load_model(path: str | Path) -> FiniteTeamModel:
    """Load and validate a model JSON file.

    Syntax errors are reported with their line and column; structural errors
    name the offending field.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: JSON syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return model_from_dict(data)


def _random_rows(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    raw = rng.random(shape) + 0.1
    return raw / raw.sum(axis=-1, keepdims=True)


def random_model(
    seed: int,
    horizon: int = 2,
    num_states: int = 2,
    obs_sizes: Sequence[int] = (2,),
    action_sizes: Sequence[int] = (2,),
    max_info_items: int = 2,
) -> FiniteTeamModel:
    """Seeded random model with full-support kernels and causal random info.

    Every kernel row is a normalized positive random vector; each station's
    period-t information is a random subset (of size at most max_info_items)
    of all stations' strictly earlier observations and actions.
    """
    rng = np.random.default_rng(seed)
    obs_sizes = tuple(int(s) for s in obs_sizes)
    action_sizes = tuple(int(s) for s in action_sizes)
    stations = len(obs_sizes)
    na = _product(action_sizes)
    no = _product(obs_sizes)
    nx = num_states

    info = []
    for _ in range(stations):
        station = []
        for t in range(horizon):
            candidates = [
                (kind, s, m)
                for kind in ("y", "u")
                for s in range(t)
                for m in range(stations)
            ]
            if candidates and max_info_items > 0:
                size = int(rng.integers(0, min(max_info_items, len(candidates)) + 1))
                chosen = sorted(
                    rng.choice(len(candidates), size=size, replace=False).tolist()
                )
                station.append(tuple(candidates[i] for i in chosen))
            else:
                station.append(())
        info.append(tuple(station))

    return FiniteTeamModel(
        horizon=horizon,
        num_states=nx,
        obs_sizes=obs_sizes,
        action_sizes=action_sizes,
        initial=_random_rows(rng, (nx,)),
        transitions=tuple(_random_rows(rng, (nx, na, nx)) for _ in range(horizon - 1)),
        observations=tuple(_random_rows(rng, (nx, na, no)) for _ in range(horizon)),
        obs_reference=tuple(_random_rows(rng, (no,)) for _ in range(horizon)),
        state_reference=tuple(_random_rows(rng, (nx,)) for _ in range(horizon - 1)),
        stage_costs=tuple(rng.random((nx, na)) for _ in range(horizon)),
        terminal_cost=rng.random(nx),
        info=tuple(info),
    )


def identity_model() -> FiniteTeamModel:
    """A small hand-checkable model with deterministic dynamics.

    Two states, one station with binary observations and actions, horizon 2.
    The observation reveals the state exactly; the period-1 action flips the
    state (x_2 = x_1 XOR u_1) at a price of 1/4; the period-2 action tries
    to match the state (cost 1 on mismatch); the terminal cost charges
    state 1; references are uniform.  The unique optimum is u_1 = 0 and
    u_2 = y_1 (report the observed state), with expected cost 1/2.
    """
    eye = np.eye(2)
    flip = np.empty((2, 2, 2))
    for x in range(2):
        for u in range(2):
            flip[x, u] = eye[x ^ u]
    observe = np.empty((2, 2, 2))
    for x in range(2):
        for u in range(2):
            observe[x, u] = eye[x]
    uniform = np.array([0.5, 0.5])
    flip_price = np.array([[0.0, 0.25], [0.0, 0.25]])
    mismatch = np.array([[0.0, 1.0], [1.0, 0.0]])
    return FiniteTeamModel(
        horizon=2,
        num_states=2,
        obs_sizes=(2,),
        action_sizes=(2,),
        initial=uniform,
        transitions=(flip,),
        observations=(observe, observe),
        obs_reference=(uniform, uniform),
        state_reference=(uniform,),
        stage_costs=(flip_price, mismatch),
        terminal_cost=np.array([0.0, 1.0]),
        info=(((), (("y", 0, 0),)),),
    )
