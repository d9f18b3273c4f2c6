"""One-hidden-layer networks with hand-written gradients.

Parameters of an :class:`Mlp` live in one flat vector ``theta`` (order
``W1, b1, W2, b2``); ``W1`` and friends are views into it, so optimisers and
eligibility traces work on plain vectors.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._rng import INIT, make_rng, tag
from .agents import DIVERGENCE_LIMIT, beta_returns, emphasis_sequence, lambda_returns
from .envs.cartpole import GAMMA as CARTPOLE_GAMMA
from .envs.cartpole import ThresholdPreference
from .exceptions import NonFiniteUpdate
from .mdp import FeatureSpec, Trajectory


class Mlp:
    """``out = W2 act(W1 x + b1) + b2`` with ``act`` ReLU (or identity).

    ``trainable`` is an optional boolean mask over ``theta``; gradients of
    frozen entries are reported as zero.
    """

    def __init__(self, input_dim, hidden_dim, output_dim=1, activation="relu", seed=0, theta=None):
        if hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if activation not in ("relu", "identity"):
            raise ValueError("activation must be 'relu' or 'identity'")
        self.input_dim, self.hidden_dim, self.output_dim = input_dim, hidden_dim, output_dim
        self.activation = activation
        self.shapes = [(hidden_dim, input_dim), (hidden_dim,), (output_dim, hidden_dim), (output_dim,)]
        self.size = sum(int(np.prod(s)) for s in self.shapes)
        if theta is None:
            rng = make_rng(seed, INIT)
            parts = []
            for shape, fan_in in zip(self.shapes, (input_dim, input_dim, hidden_dim, hidden_dim)):
                bound = 1.0 / np.sqrt(fan_in)
                parts.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
            theta = np.concatenate(parts)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValueError(f"theta must have {self.size} entries")
        self.trainable = np.ones(self.size, dtype=bool)
        self._bind(theta.copy())

    def _bind(self, theta):
        self.theta = theta
        views, start = [], 0
        for shape in self.shapes:
            n = int(np.prod(shape))
            views.append(theta[start:start + n].reshape(shape))
            start += n
        self.W1, self.b1, self.W2, self.b2 = views

    def set_theta(self, theta):
        self.theta[:] = theta

    def copy(self):
        other = Mlp(self.input_dim, self.hidden_dim, self.output_dim, self.activation, theta=self.theta)
        other.trainable = self.trainable.copy()
        return other

    @classmethod
    def linear_passthrough(cls, input_dim, w=None):
        """Identity hidden layer with only ``W2`` trainable: ``out = w . x``."""
        net = cls(input_dim, input_dim, 1, activation="identity", theta=np.zeros(input_dim * input_dim + 2 * input_dim + 1))
        net.W1[:] = np.eye(input_dim)
        if w is not None:
            net.W2[0] = w
        mask = np.zeros(net.size, dtype=bool)
        start = input_dim * input_dim + input_dim
        mask[start:start + input_dim] = True
        net.trainable = mask
        return net

    def hidden(self, x):
        pre = np.asarray(x, dtype=float) @ self.W1.T + self.b1
        return np.maximum(pre, 0.0) if self.activation == "relu" else pre

    def forward(self, x):
        """Forward pass for one input (1-D) or a batch (2-D, one row each)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            pre = self.W1 @ x + self.b1
        else:
            pre = x @ self.W1.T + self.b1
        h = np.maximum(pre, 0.0) if self.activation == "relu" else pre
        out = (self.W2 @ h + self.b2) if x.ndim == 1 else (h @ self.W2.T + self.b2)
        return out, (x, pre, h)

    def backward(self, cache, upstream):
        """Flat gradient of ``sum(upstream * out)`` w.r.t. ``theta``.

        For a batch, ``upstream`` has one row per input and the gradients
        are summed over the batch.
        """
        x, pre, h = cache
        up = np.asarray(upstream, dtype=float)
        if x.ndim == 1:
            dW2 = np.outer(up, h)
            db2 = up
            dh = self.W2.T @ up
            dpre = dh * (pre > 0) if self.activation == "relu" else dh
            dW1 = np.outer(dpre, x)
            db1 = dpre
        else:
            up = up.reshape(len(x), self.output_dim)
            dW2 = up.T @ h
            db2 = up.sum(axis=0)
            dh = up @ self.W2
            dpre = dh * (pre > 0) if self.activation == "relu" else dh
            dW1 = dpre.T @ x
            db1 = dpre.sum(axis=0)
        grad = np.concatenate([dW1.ravel(), db1.ravel(), dW2.ravel(), db2.ravel()])
        grad[~self.trainable] = 0.0
        return grad

    def value(self, x):
        out, _ = self.forward(x)
        return out[..., 0]

    def value_and_grad(self, x):
        out, cache = self.forward(x)
        return float(out[0]), self.backward(cache, np.ones(1))


def mlp_forward(mlp: Mlp, x):
    return mlp.forward(x)


def mlp_backward(mlp: Mlp, cache, upstream):
    return mlp.backward(cache, upstream)


def numerical_gradient(mlp: Mlp, x, upstream, eps=1e-5):
    """Central finite differences of ``sum(upstream * out)`` w.r.t. ``theta``."""
    base = mlp.theta.copy()
    grad = np.zeros(mlp.size)
    up = np.asarray(upstream, dtype=float)
    for i in range(mlp.size):
        mlp.theta[i] = base[i] + eps
        plus = np.sum(up * mlp.forward(x)[0])
        mlp.theta[i] = base[i] - eps
        minus = np.sum(up * mlp.forward(x)[0])
        mlp.theta[i] = base[i]
        grad[i] = (plus - minus) / (2 * eps)
    return grad


@dataclass
class AdamState:
    """Adaptive moment estimation state for a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size))

    def step(self, theta, grad, lr):
        """Descent step on ``theta`` (in place) for a loss gradient ``grad``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return theta


def discounted_returns(rewards, gamma):
    G = np.empty(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        G[t] = acc
    return G


class FeatureNet(TransformerMixin, BaseEstimator):
    """Value network fitted to Monte Carlo returns; transforms inputs to hidden features.

    ``fit`` takes fully observed trajectories and performs one Adam step on
    the squared return error per visited state, in visit order.
    ``transform`` returns the hidden-layer activations.
    """

    def __init__(self, hidden_dim=32, lr=1e-2, gamma=0.99, seed=0):
        self.hidden_dim = hidden_dim
        self.lr = lr
        self.gamma = gamma
        self.seed = seed

    def fit(self, trajectories, y=None, true_values=None, eval_inputs=None):
        trajectories = list(trajectories)
        dim = trajectories[0].obs.shape[1]
        self.mlp_ = Mlp(dim, self.hidden_dim, 1, seed=self.seed)
        self.n_features_in_ = dim
        opt = AdamState.zeros(self.mlp_.size)
        self.mse_curve_ = []
        for traj in trajectories:
            G = discounted_returns(traj.rewards, self.gamma)
            for x, g in zip(traj.obs[:-1], G):
                v, grad = self.mlp_.value_and_grad(x)
                if self.lr:
                    opt.step(self.mlp_.theta, (v - g) * grad, self.lr)
            if true_values is not None:
                pred = self.mlp_.value(eval_inputs)
                self.mse_curve_.append(float(np.mean((pred - true_values) ** 2)))
        return self

    def transform(self, X):
        check_is_fitted(self, "mlp_")
        X = check_array(X)
        return self.mlp_.hidden(X)

    def predict(self, X):
        check_is_fitted(self, "mlp_")
        return self.mlp_.value(check_array(X))


def _fully_observed(env):
    return FeatureSpec(env.features.phi)


def train_feature_net(env, episodes=50, lr=1e-2, seed=0, hidden_dim=32) -> FeatureNet:
    """Fit a :class:`FeatureNet` on the grid with every state observed one-hot."""
    from .mdp import sample_episode

    feats = _fully_observed(env)
    stream = tag("feature-net")
    trajs = (sample_episode(env.mdp, env.policy, feats, seed, episode=stream + ep) for ep in range(episodes))
    nonterm = np.flatnonzero(~env.mdp.terminal_mask)
    net = FeatureNet(hidden_dim=hidden_dim, lr=lr, gamma=env.mdp.gamma, seed=seed)
    return net.fit(trajs, true_values=env.values[nonterm], eval_inputs=env.features.phi[nonterm])


def semilinear_features(env, net: FeatureNet) -> FeatureSpec:
    """Hidden activations of ``net`` as linear features.

    Observable states map their one-hot input through the network; every
    visit to a hidden state feeds a fresh ``N(0, I)`` vector instead.
    """
    phi = net.transform(env.features.phi)
    phi[list(env.mdp.terminal_states)] = 0.0
    return FeatureSpec(phi, noisy=env.features.noisy, noise_mean=0.0, noise_std=1.0,
                       raw_dim=env.features.phi.shape[1], encoder=net.mlp_.hidden)


# ---------------------------------------------------------------------------
# end-to-end value learning
# ---------------------------------------------------------------------------

def _check(mlp):
    if not np.all(np.isfinite(mlp.theta)) or np.max(np.abs(mlp.theta)) > DIVERGENCE_LIMIT:
        raise NonFiniteUpdate("network parameters diverged")


def nonlinear_forward_view_episode(mlp: Mlp, trajectory: Trajectory, alpha, gamma, algo="ptd",
                                   beta=None, lam=None, interest=None):
    """Forward-view update of a value network over one episode (in place).

    Targets are computed once from the parameters at the start of the
    episode; then every visited state takes one SGD step on
    ``weight * (target - v(s))^2 / 2`` in visit order, where ``weight`` is
    ``beta(s)`` for PTD, 1 for TD(lambda) and the emphasis for ETD.
    """
    s = trajectory.states
    v = mlp.value(trajectory.obs)
    if trajectory.terminated:
        v[-1] = 0.0
    if algo == "ptd":
        beta = np.asarray(beta, dtype=float)
        G = beta_returns(v, trajectory.rewards, beta[s[1:]], gamma, trajectory.terminated)
        weight = beta[s[:-1]]
    else:
        lam = np.asarray(lam, dtype=float)
        G = lambda_returns(v, trajectory.rewards, lam[s[1:]], gamma, trajectory.terminated)
        if algo == "td-lambda":
            weight = np.ones(len(G))
        else:
            weight = emphasis_sequence(s[:-1], lam, np.asarray(interest, dtype=float), gamma)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in np.flatnonzero(weight):
            pred, grad = mlp.value_and_grad(trajectory.obs[t])
            mlp.theta += alpha * weight[t] * (G[t] - pred) * grad
    _check(mlp)
    return mlp


@dataclass
class ParamTrace:
    """Eligibility trace over network parameters (plus ETD follow-on state)."""

    z: np.ndarray
    F: float = 0.0
    M: float = 0.0

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size))


@dataclass
class NetSample:
    x_t: np.ndarray
    x_next: np.ndarray
    reward: float
    terminal: bool = False
    beta_t: float = 1.0
    lambda_t: float = 0.0
    interest_t: float = 1.0


def nonlinear_backward_view_step(mlp: Mlp, trace: ParamTrace, sample: NetSample, alpha, gamma, algo="ptd"):
    """One online step with a parameter trace (updates both in place).

    PTD:        ``z <- beta grad + gamma (1 - beta) z``
    TD(lambda): ``z <- gamma lambda z + grad``
    ETD:        ``z <- gamma lambda z + M grad``
    then ``theta <- theta + alpha delta z`` with ``delta`` from the current parameters.
    """
    v_t, grad = mlp.value_and_grad(sample.x_t)
    v_next = 0.0 if sample.terminal else float(mlp.value(sample.x_next))
    delta = sample.reward + gamma * v_next - v_t
    if algo == "ptd":
        b = sample.beta_t
        trace.z = b * grad + gamma * (1.0 - b) * trace.z
    elif algo == "td-lambda":
        trace.z = gamma * sample.lambda_t * trace.z + grad
    else:
        trace.F = gamma * trace.F + sample.interest_t
        trace.M = sample.lambda_t * sample.interest_t + (1.0 - sample.lambda_t) * trace.F
        trace.z = gamma * sample.lambda_t * trace.z + trace.M * grad
    with np.errstate(over="ignore", invalid="ignore"):
        mlp.theta += alpha * delta * trace.z
    _check(mlp)
    return mlp, trace


def nonlinear_backward_view_episode(mlp: Mlp, trajectory: Trajectory, alpha, gamma, algo="ptd",
                                    beta=None, lam=None, interest=None):
    trace = ParamTrace.zeros(mlp.size)
    for step in trajectory.steps():
        s = step.state
        sample = NetSample(step.obs, step.next_obs, step.reward, step.terminal,
                           1.0 if beta is None else float(beta[s]),
                           0.0 if lam is None else float(lam[s]),
                           1.0 if interest is None else float(interest[s]))
        nonlinear_backward_view_step(mlp, trace, sample, alpha, gamma, algo)
    return mlp


# ---------------------------------------------------------------------------
# actor-critic
# ---------------------------------------------------------------------------

def softmax(z):
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def critic_features(obs):
    return np.append(np.asarray(obs, dtype=float), 1.0)


@dataclass
class EpisodeResult:
    episode_return: float
    beta_one_percent: float
    length: int
    betas: np.ndarray = field(repr=False)


def actor_critic_episode(actor: Mlp, critic: np.ndarray, env, rule: ThresholdPreference, actor_lr, critic_lr,
                         seed, episode=0, algo="ptd", gamma=CARTPOLE_GAMMA):
    """One cart-pole episode of the preferential actor-critic (updates in place).

    The linear critic on ``(obs, 1)`` is updated online with preference
    traces.  After the episode the actor, a softmax policy network, ascends
    ``sum_t grad log pi(a_t|s_t) * w_t (G_t - v(s_t))`` where ``G_t`` is the
    preference-weighted return under the updated critic and ``w_t = beta_t``.
    With ``algo='td-lambda'`` the critic uses accumulating traces with
    ``lambda = 1 - beta``, the return is the lambda-return and ``w_t = 1``.
    """
    rng = make_rng(seed, tag("cartpole"), episode)
    obs = env.reset(rng)
    rule.reset()
    e = np.zeros_like(critic)
    feats, actions, rewards, betas, caches, probs_list = [], [], [], [], [], []
    done = truncated = False
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            logits, cache = actor.forward(obs)
            probs = softmax(logits)
            a = int(rng.random() >= probs[0])
            b = rule(obs)
            phi = critic_features(obs)
            obs, r, done, truncated = env.step(a)
            phi_next = critic_features(obs)
            v_next = 0.0 if done else critic @ phi_next
            delta = r + gamma * v_next - critic @ phi
            if algo == "ptd":
                e = b * phi + gamma * (1.0 - b) * e
            elif algo == "td-lambda":
                e = gamma * (1.0 - b) * e + phi
            else:
                raise ValueError("actor-critic supports 'ptd' and 'td-lambda'")
            critic += critic_lr * delta * e
            feats.append(phi)
            actions.append(a)
            rewards.append(r)
            betas.append(b)
            caches.append(cache)
            probs_list.append(probs)
            if done or truncated:
                break
        feats.append(phi_next)
        betas = np.array(betas)
        values = np.array(feats) @ critic
        if done:
            values[-1] = 0.0
        rewards = np.array(rewards)
        next_beta = np.append(betas[1:], 1.0)
        G = beta_returns(values, rewards, next_beta, gamma, terminated=done)
        weight = betas if algo == "ptd" else np.ones(len(G))
        adv = weight * (G - values[:-1])
        grad = np.zeros(actor.size)
        for t, (cache, probs) in enumerate(zip(caches, probs_list)):
            if adv[t] == 0.0:
                continue
            up = -probs
            up[actions[t]] += 1.0
            grad += adv[t] * actor.backward(cache, up)
        actor.theta += actor_lr * grad
    if not (np.all(np.isfinite(actor.theta)) and np.all(np.isfinite(critic))):
        raise NonFiniteUpdate("actor or critic became non-finite")
    return EpisodeResult(float(rewards.sum()), 100.0 * float(np.mean(betas == 1.0)), len(rewards), betas)
