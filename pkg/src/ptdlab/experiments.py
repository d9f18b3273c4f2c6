"""Learning-curve drivers shared by the CLI and the acceptance checks.

Every driver returns one error (or return) per episode and turns a
divergence into ``inf`` for the rest of the run.
"""

import numpy as np

from .agents import run_policy_evaluation, value_error
from .envs import make_cartpole
from .envs.cartpole import ThresholdPreference
from .exceptions import NonFiniteUpdate
from .mdp import sample_episode
from .neural import (Mlp, actor_critic_episode, nonlinear_backward_view_episode,
                     nonlinear_forward_view_episode, semilinear_features, train_feature_net)

SETTINGS = ("linear", "semilinear", "forward", "backward")

FEATURE_NET_EPISODES = 50
FEATURE_NET_LR = 1e-4
NONLINEAR_HIDDEN = 4
ACTOR_LR = 1e-2
ACTOR_HIDDEN = 4


def _weights(env, algo, beta=None, lam=None, interest=None):
    n = env.mdp.n_states
    full = lambda x, default: default if x is None else np.broadcast_to(np.asarray(x, float), (n,)).copy()
    b = full(beta, env.beta)
    lm = full(lam, env.lam)
    if algo == "etd-fixed":
        i = full(interest, np.full(n, env.fixed_interest))
    else:
        i = full(interest, env.interest)
    return b, lm, i


_FEATURE_CACHE = {}


def _semilinear_features(env, seed, net_episodes, net_lr):
    # the fitted net depends only on the layout and the seed, so algorithms share it
    key = (env.name, env.info.get("n"), env.info.get("seed"), seed, net_episodes, net_lr)
    if key not in _FEATURE_CACHE:
        net = train_feature_net(env, episodes=net_episodes, lr=net_lr, seed=seed)
        _FEATURE_CACHE[key] = semilinear_features(env, net)
    return _FEATURE_CACHE[key]


def semilinear_curve(env, algo, alpha, episodes, seed, beta=None, lam=None, interest=None,
                     net_episodes=FEATURE_NET_EPISODES, net_lr=FEATURE_NET_LR, metric=None):
    """Linear TD on hidden features of a value net fitted on the fully observed grid."""
    feats = _semilinear_features(env, seed, net_episodes, net_lr)
    overrides = {k: v for k, v in (("beta", beta), ("lam", lam), ("interest", interest)) if v is not None}
    return run_policy_evaluation(env, algo, alpha, episodes, seed, metric=metric, features=feats, **overrides)


def nonlinear_curve(env, algo, alpha, episodes, seed, view="forward", hidden=NONLINEAR_HIDDEN,
                    beta=None, lam=None, interest=None, metric=None):
    """End-to-end value network trained from the raw observations."""
    b, lm, i = _weights(env, algo, beta, lam, interest)
    metric = metric or env.metric
    ev = env.eval_states
    X_eval = env.features.phi[ev]
    target = env.values[ev]
    mlp = Mlp(env.features.phi.shape[1], hidden, 1, seed=seed)
    update = nonlinear_forward_view_episode if view == "forward" else nonlinear_backward_view_episode
    out = np.full(episodes, np.inf)
    for ep in range(episodes):
        traj = sample_episode(env.mdp, env.policy, env.features, seed, episode=ep)
        try:
            update(mlp, traj, alpha, env.mdp.gamma, algo, beta=b, lam=lm, interest=i)
        except NonFiniteUpdate:
            break
        out[ep] = value_error(mlp.value(X_eval), target, metric)
    return out


def actor_critic_curve(algo, episodes, seed, critic_lr, actor_lr=ACTOR_LR, condition=1, hidden=ACTOR_HIDDEN):
    """Cart-pole returns and beta = 1 percentages, one entry per episode."""
    env = make_cartpole()
    rule = ThresholdPreference(condition)
    actor = Mlp(env.obs_dim, hidden, env.n_actions, seed=seed)
    critic = np.zeros(env.obs_dim + 1)
    returns = np.full(episodes, np.inf)
    percent = np.full(episodes, np.nan)
    for ep in range(episodes):
        try:
            res = actor_critic_episode(actor, critic, env, rule, actor_lr, critic_lr, seed, ep, algo)
        except NonFiniteUpdate:
            break
        returns[ep] = res.episode_return
        percent[ep] = res.beta_one_percent
    return returns, percent


def learning_curve(env, algo, alpha, episodes, seed, setting="linear", beta=None, lam=None, interest=None,
                   metric=None, **kw):
    """Per-episode curve of a policy-evaluation run in the given ``setting``."""
    if setting == "linear":
        overrides = {k: v for k, v in (("beta", beta), ("lam", lam), ("interest", interest)) if v is not None}
        return run_policy_evaluation(env, algo, alpha, episodes, seed, metric=metric, **overrides)
    if setting == "semilinear":
        return semilinear_curve(env, algo, alpha, episodes, seed, beta, lam, interest, metric=metric, **kw)
    if setting in ("forward", "backward"):
        return nonlinear_curve(env, algo, alpha, episodes, seed, setting, beta=beta, lam=lam,
                               interest=interest, metric=metric, **kw)
    raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
