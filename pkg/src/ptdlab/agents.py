"""Linear TD learners: preferential TD, TD(lambda) and emphatic TD.

The per-step functions (``ptd_online_step`` and friends) are the reference
recursions.  The estimator classes wrap them in the scikit-learn estimator
protocol: ``partial_fit`` consumes one episode, ``fit`` a sequence of them,
and ``predict`` maps feature rows to value estimates.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import NonFiniteUpdate
from .mdp import Trajectory, sample_episode

ALGOS = ("ptd", "td-lambda", "etd-fixed", "etd-variable")

# a weight this large on a task with bounded returns is taken as divergence
DIVERGENCE_LIMIT = 1e10


@dataclass
class AgentState:
    """Mutable learner state; traces are reset at every episode start."""

    w: np.ndarray
    e: np.ndarray
    gamma: float
    algo: str = "ptd"
    F: float = 0.0
    M: float = 0.0

    @classmethod
    def zeros(cls, k, gamma, algo="ptd"):
        return cls(np.zeros(k), np.zeros(k), float(gamma), algo)

    def reset_trace(self):
        self.e = np.zeros_like(self.w)
        self.F = 0.0
        self.M = 0.0


@dataclass
class StepSample:
    phi_t: np.ndarray
    phi_next: np.ndarray
    reward: float
    terminal: bool = False
    beta_t: float = 1.0
    lambda_t: float = 0.0
    interest_t: float = 1.0


def _td_error(state, sample):
    v_next = 0.0 if sample.terminal else state.w @ sample.phi_next
    return sample.reward + state.gamma * v_next - state.w @ sample.phi_t


def _apply(state, delta, alpha):
    w = state.w + alpha * delta * state.e
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(state.e))):
        raise NonFiniteUpdate("weights or trace became non-finite")
    state.w = w
    return state


def ptd_online_step(state: AgentState, sample: StepSample, alpha: float) -> AgentState:
    """One backward-view preferential TD step (updates ``state`` in place).

    The TD error is evaluated with the weights from before the step.
    """
    delta = _td_error(state, sample)
    b = sample.beta_t
    state.e = b * sample.phi_t + state.gamma * (1.0 - b) * state.e
    return _apply(state, delta, alpha)


def td_lambda_step(state: AgentState, sample: StepSample, alpha: float) -> AgentState:
    """Accumulating-trace TD(lambda) with ``lambda`` taken at the current state."""
    delta = _td_error(state, sample)
    state.e = state.gamma * sample.lambda_t * state.e + sample.phi_t
    return _apply(state, delta, alpha)


def etd_step(state: AgentState, sample: StepSample, alpha: float,
             interest_t: Optional[float] = None, lambda_t: Optional[float] = None) -> AgentState:
    """On-policy emphatic TD(lambda).

    ``F_t = gamma F_{t-1} + i(s_t)`` with ``F_{-1} = 0`` (so ``F_0 = i(s_0)``),
    ``M_t = lambda_t i(s_t) + (1 - lambda_t) F_t`` and
    ``e_t = gamma lambda_t e_{t-1} + M_t phi(s_t)``.
    """
    i = sample.interest_t if interest_t is None else interest_t
    lam = sample.lambda_t if lambda_t is None else lambda_t
    if i < 0:
        raise ValueError("interest must be non-negative")
    delta = _td_error(state, sample)
    state.F = state.gamma * state.F + i
    state.M = lam * i + (1.0 - lam) * state.F
    state.e = state.gamma * lam * state.e + state.M * sample.phi_t
    return _apply(state, delta, alpha)


# ---------------------------------------------------------------------------
# forward views (offline, weights frozen during the episode)
# ---------------------------------------------------------------------------

def _episode_values(w, trajectory):
    v = trajectory.obs @ w
    if trajectory.terminated:
        v[-1] = 0.0
    return v


def beta_returns(values, rewards, next_beta, gamma, terminated=True):
    """Backward recursion for the preference-weighted return.

    ``G_t = r_{t+1} + gamma [beta(s_{t+1}) v(s_{t+1}) + (1 - beta(s_{t+1})) G_{t+1}]``

    ``values`` holds ``v(s_0..s_T)``; ``next_beta[t]`` is ``beta(s_{t+1})``.
    A terminal final state contributes zero; a truncated one is bootstrapped
    from fully.
    """
    T = len(rewards)
    G = np.empty(T)
    g_next = 0.0 if terminated else values[T]
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            boot = 0.0 if terminated else values[T]
        else:
            b = next_beta[t]
            boot = b * values[t + 1] + (1.0 - b) * g_next
        G[t] = rewards[t] + gamma * boot
        g_next = G[t]
    return G


def lambda_returns(values, rewards, next_lambda, gamma, terminated=True):
    """State-dependent lambda-return: ``beta_returns`` with ``beta = 1 - lambda``."""
    return beta_returns(values, rewards, 1.0 - np.asarray(next_lambda, dtype=float), gamma, terminated)


def ptd_forward_update(w, trajectory: Trajectory, beta, gamma):
    """Summed forward-view increment ``sum_t beta(s_t) (G_t - v_t) phi_t`` at frozen ``w``."""
    beta = np.asarray(beta, dtype=float)
    s = trajectory.states
    v = _episode_values(w, trajectory)
    G = beta_returns(v, trajectory.rewards, beta[s[1:]], gamma, trajectory.terminated)
    weights = beta[s[:-1]] * (G - v[:-1])
    return trajectory.obs[:-1].T @ weights


def ptd_offline_episode(w, trajectory: Trajectory, beta, alpha, gamma):
    """Offline preferential TD: one increment per episode, targets at the initial ``w``."""
    return np.asarray(w, dtype=float) + alpha * ptd_forward_update(w, trajectory, beta, gamma)


def td_lambda_forward_update(w, trajectory: Trajectory, lam, gamma):
    lam = np.asarray(lam, dtype=float)
    s = trajectory.states
    v = _episode_values(w, trajectory)
    G = lambda_returns(v, trajectory.rewards, lam[s[1:]], gamma, trajectory.terminated)
    return trajectory.obs[:-1].T @ (G - v[:-1])


def emphasis_sequence(states, lam, interest, gamma):
    """Emphasis ``M_t`` along a visited state sequence (episode start at index 0)."""
    F = 0.0
    M = np.empty(len(states))
    for t, s in enumerate(states):
        F = gamma * F + interest[s]
        M[t] = lam[s] * interest[s] + (1.0 - lam[s]) * F
    return M


def etd_forward_update(w, trajectory: Trajectory, lam, interest, gamma):
    lam = np.asarray(lam, dtype=float)
    interest = np.asarray(interest, dtype=float)
    s = trajectory.states
    v = _episode_values(w, trajectory)
    G = lambda_returns(v, trajectory.rewards, lam[s[1:]], gamma, trajectory.terminated)
    M = emphasis_sequence(s[:-1], lam, interest, gamma)
    return trajectory.obs[:-1].T @ (M * (G - v[:-1]))


def accumulate_online(w, trajectory: Trajectory, gamma, algo="ptd", beta=None, lam=None, interest=None):
    """Sum of the backward-view increments ``delta_t e_t`` with ``w`` frozen."""
    state = AgentState(np.asarray(w, dtype=float).copy(), np.zeros(len(w)), gamma, algo)
    total = np.zeros(len(w))
    for step in trajectory.steps():
        sample = _sample(step, beta, lam, interest)
        delta = _td_error(state, sample)
        _advance_trace(state, sample)
        total += delta * state.e
    return total


def _sample(step, beta, lam, interest):
    s = step.state
    return StepSample(step.obs, step.next_obs, step.reward, step.terminal,
                      1.0 if beta is None else float(beta[s]),
                      0.0 if lam is None else float(lam[s]),
                      1.0 if interest is None else float(interest[s]))


def _advance_trace(state, sample):
    if state.algo == "ptd":
        b = sample.beta_t
        state.e = b * sample.phi_t + state.gamma * (1.0 - b) * state.e
    elif state.algo == "td-lambda":
        state.e = state.gamma * sample.lambda_t * state.e + sample.phi_t
    else:
        state.F = state.gamma * state.F + sample.interest_t
        state.M = sample.lambda_t * sample.interest_t + (1.0 - sample.lambda_t) * state.F
        state.e = state.gamma * sample.lambda_t * state.e + state.M * sample.phi_t


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _per_state(value, n_states, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_states, float(arr))
    if arr.shape != (n_states,):
        raise ValueError(f"{name} must be a scalar or have one entry per state")
    return arr


class _LinearTD(BaseEstimator, RegressorMixin):
    """Shared episode loop; subclasses supply the trace recursion.

    A non-finite update, or any weight exceeding ``DIVERGENCE_LIMIT`` in
    magnitude after an episode, marks the run as diverged: ``diverged_``
    becomes True, ``coef_`` is set to ``inf`` and later episodes are ignored.
    """

    _algo = None

    def _n_states(self, trajectory):
        return int(trajectory.states.max()) + 1

    def _init(self, trajectory):
        k = trajectory.obs.shape[1]
        if not hasattr(self, "coef_"):
            self.coef_ = np.zeros(k)
            self.n_features_in_ = k
            self.diverged_ = False
            self.n_episodes_ = 0
        elif k != self.n_features_in_:
            raise ValueError(f"episode has {k} features, estimator was fitted with {self.n_features_in_}")

    def partial_fit(self, trajectory: Trajectory):
        """Run the online update over one episode (traces start at zero)."""
        self._init(trajectory)
        if self.diverged_:
            return self
        params = self._params(trajectory)
        state = AgentState(self.coef_.copy(), np.zeros(self.n_features_in_), self.gamma, self._algo)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for step in trajectory.steps():
                    self._step(state, _sample(step, *params))
        except NonFiniteUpdate:
            state.w = None
        if state.w is None or np.max(np.abs(state.w), initial=0.0) > DIVERGENCE_LIMIT:
            self.diverged_ = True
            self.coef_ = np.full(self.n_features_in_, np.inf)
            return self
        self.coef_ = state.w
        self.n_episodes_ += 1
        return self

    def fit(self, trajectories, y=None):
        for attr in ("coef_", "n_features_in_", "diverged_", "n_episodes_"):
            self.__dict__.pop(attr, None)
        for traj in trajectories:
            self.partial_fit(traj)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, ensure_all_finite=False)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        with np.errstate(over="ignore", invalid="ignore"):
            return X @ self.coef_


class PreferentialTD(_LinearTD):
    """Online preferential TD with linear function approximation.

    Parameters
    ----------
    alpha : float
        Step size.
    gamma : float
        Discount.
    beta : float or array of shape (n_states,)
        Preference of each state, in [0, 1].
    """

    _algo = "ptd"

    def __init__(self, alpha=0.1, gamma=1.0, beta=1.0):
        self.alpha = alpha
        self.gamma = gamma
        self.beta = beta

    def _params(self, trajectory):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 0:
            beta = np.full(self._n_states(trajectory), float(beta))
        if np.any(beta < 0) or np.any(beta > 1):
            raise ValueError("beta must lie in [0, 1]")
        return beta, None, None

    def _step(self, state, sample):
        ptd_online_step(state, sample, self.alpha)


class TDLambda(_LinearTD):
    """TD(lambda) with accumulating traces and optionally state-dependent lambda."""

    _algo = "td-lambda"

    def __init__(self, alpha=0.1, gamma=1.0, lam=0.0):
        self.alpha = alpha
        self.gamma = gamma
        self.lam = lam

    def _params(self, trajectory):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim == 0:
            lam = np.full(self._n_states(trajectory), float(lam))
        return None, lam, None

    def _step(self, state, sample):
        td_lambda_step(state, sample, self.alpha)


class EmphaticTD(_LinearTD):
    """On-policy emphatic TD(lambda) with a per-state interest."""

    _algo = "etd"

    def __init__(self, alpha=0.1, gamma=1.0, lam=0.0, interest=1.0):
        self.alpha = alpha
        self.gamma = gamma
        self.lam = lam
        self.interest = interest

    def _params(self, trajectory):
        n = self._n_states(trajectory)
        lam = np.asarray(self.lam, dtype=float)
        interest = np.asarray(self.interest, dtype=float)
        lam = np.full(n, float(lam)) if lam.ndim == 0 else lam
        interest = np.full(n, float(interest)) if interest.ndim == 0 else interest
        return None, lam, interest

    def _step(self, state, sample):
        etd_step(state, sample, self.alpha)


def make_estimator(env, algo, alpha, beta=None, lam=None, interest=None):
    """Estimator for ``algo`` configured from an environment bundle.

    Scalar overrides replace the environment's per-state vectors.  ETD-fixed
    uses ``env.fixed_interest`` on every state unless ``interest`` is given.
    """
    n = env.mdp.n_states
    gamma = env.mdp.gamma
    if algo == "ptd":
        b = env.beta if beta is None else _per_state(beta, n, "beta")
        return PreferentialTD(alpha=alpha, gamma=gamma, beta=b)
    if algo == "td-lambda":
        lm = env.lam if lam is None else _per_state(lam, n, "lambda")
        return TDLambda(alpha=alpha, gamma=gamma, lam=lm)
    if algo == "etd-fixed":
        lm = env.lam if lam is None else _per_state(lam, n, "lambda")
        i = np.full(n, env.fixed_interest) if interest is None else _per_state(interest, n, "interest")
        return EmphaticTD(alpha=alpha, gamma=gamma, lam=lm, interest=i)
    if algo == "etd-variable":
        lm = env.lam if lam is None else _per_state(lam, n, "lambda")
        i = env.interest if interest is None else _per_state(interest, n, "interest")
        return EmphaticTD(alpha=alpha, gamma=gamma, lam=lm, interest=i)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")


def value_error(pred, target, metric="rmse"):
    if not np.all(np.isfinite(pred)):
        return float("inf")
    with np.errstate(over="ignore", invalid="ignore"):
        mse = float(np.mean((pred - target) ** 2))
    if metric == "mse":
        return mse
    if metric == "rmse":
        return float(np.sqrt(mse))
    raise ValueError(f"unknown metric {metric!r}")


def run_policy_evaluation(env, algo, alpha, episodes, seed, metric=None, features=None, **overrides):
    """Learn for ``episodes`` episodes and return the per-episode error series.

    Weights persist across episodes; the error after each episode is measured
    on ``env.eval_states`` against the true values.  A diverged run reports
    ``inf`` from the diverging episode onwards.
    """
    est = make_estimator(env, algo, alpha, **overrides) if isinstance(algo, str) else algo
    metric = metric or env.metric
    features = env.features if features is None else features
    ev = np.asarray(env.eval_states, dtype=int)
    target = env.values[ev]
    X_eval = features.phi[ev]
    out = np.empty(episodes)
    for ep in range(episodes):
        traj = sample_episode(env.mdp, env.policy, features, seed, episode=ep)
        est.partial_fit(traj)
        out[ep] = value_error(est.predict(X_eval), target, metric)
    return out
