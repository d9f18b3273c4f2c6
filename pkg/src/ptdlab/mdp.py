"""Finite MDPs, policies, feature maps and seeded episode simulation."""

from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

from . import linalg
from ._rng import EPISODE, make_rng
from .exceptions import MdpFormatError, ShapeMismatch

DEFAULT_HORIZON = 100_000


@dataclass(frozen=True, eq=False)
class Mdp:
    """A finite MDP ``(S, A, P, r, gamma)`` with episodic bookkeeping.

    ``transition[s, a, s']`` is ``P(s'|s, a)`` and ``reward[s, a]`` the
    expected reward of taking ``a`` in ``s``.  Terminal states are absorbing
    with value zero; an episode ends on entering one.  ``reward_std`` adds
    zero-mean Gaussian noise to sampled rewards (expectations are unchanged).
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal_states: frozenset = frozenset()
    start: Optional[np.ndarray] = None
    reward_std: Optional[np.ndarray] = None

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ShapeMismatch(f"transition must be (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise ShapeMismatch(f"reward must be {P.shape[:2]}, got {R.shape}")
        if not linalg.is_stochastic(P):
            raise ValueError("each P(.|s,a) must be a distribution (within 1e-12)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not np.all(np.isfinite(R)):
            raise ValueError("rewards must be finite")
        terminal = frozenset(int(s) for s in self.terminal_states)
        if any(not 0 <= s < P.shape[0] for s in terminal):
            raise ValueError("terminal state index out of range")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "terminal_states", terminal)
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.start is not None:
            start = np.asarray(self.start, dtype=float)
            if start.shape != (P.shape[0],) or not linalg.is_stochastic(start, 1e-9):
                raise ValueError("start must be a distribution over states")
            object.__setattr__(self, "start", start)
        if self.reward_std is not None:
            std = np.asarray(self.reward_std, dtype=float)
            if std.shape != R.shape or np.any(std < 0):
                raise ValueError("reward_std must be a non-negative (S, A) table")
            object.__setattr__(self, "reward_std", std)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.terminal_states)] = True
        return mask


@dataclass(frozen=True, eq=False)
class Policy:
    """Stochastic policy table ``probs[s, a] = pi(a|s)``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or not linalg.is_stochastic(probs):
            raise ValueError("policy rows must be distributions (within 1e-12)")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n_states, n_actions):
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))


@dataclass(frozen=True, eq=False)
class FeatureSpec:
    """How states are observed by a learner.

    States outside ``noisy`` are observed as their fixed row of ``phi``.  A
    noisy state is observed as a fresh draw ``noise_mean + noise_std * z``
    with ``z ~ N(0, I)`` of length ``raw_dim`` at every visit, optionally
    mapped through ``encoder`` (a function from a batch of raw vectors to a
    batch of feature vectors).
    """

    phi: np.ndarray
    noisy: Optional[np.ndarray] = None
    noise_mean: float = 0.5
    noise_std: float = 1.0
    raw_dim: Optional[int] = None
    encoder: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or not np.all(np.isfinite(phi)):
            raise ValueError("phi must be a finite (n_states, k) matrix")
        object.__setattr__(self, "phi", phi)
        noisy = np.zeros(phi.shape[0], dtype=bool) if self.noisy is None else np.asarray(self.noisy, dtype=bool)
        if noisy.shape != (phi.shape[0],):
            raise ShapeMismatch("noisy mask must have one entry per state")
        object.__setattr__(self, "noisy", noisy)
        if self.raw_dim is None:
            object.__setattr__(self, "raw_dim", phi.shape[1])

    @property
    def k(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def tabular(cls, n_states, exclude=()):
        """One-hot features; states in ``exclude`` get the zero vector."""
        phi = np.eye(n_states)
        phi[list(exclude)] = 0.0
        return cls(phi)

    def observe(self, states, rng: np.random.Generator) -> np.ndarray:
        """Observation rows for a sequence of visited states."""
        states = np.asarray(states, dtype=int)
        obs = self.phi[states].copy()
        hits = np.flatnonzero(self.noisy[states])
        if hits.size:
            raw = self.noise_mean + self.noise_std * rng.standard_normal((hits.size, self.raw_dim))
            obs[hits] = self.encoder(raw) if self.encoder is not None else raw
        return obs


class Step(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int
    obs: np.ndarray
    next_obs: np.ndarray
    terminal: bool


@dataclass(eq=False)
class Trajectory:
    """One simulated episode.

    ``states`` has one more entry than ``actions``/``rewards``; ``obs[t]``
    is the observation made on the visit to ``states[t]``.  ``terminated``
    is False when the episode was cut by the horizon cap.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    obs: np.ndarray
    terminated: bool
    seed: int = 0
    episode: int = 0

    def __len__(self):
        return len(self.actions)

    def steps(self) -> Iterator[Step]:
        T = len(self)
        for t in range(T):
            yield Step(int(self.states[t]), int(self.actions[t]), float(self.rewards[t]),
                       int(self.states[t + 1]), self.obs[t], self.obs[t + 1],
                       self.terminated and t == T - 1)


def induce_chain(mdp: Mdp, policy: Policy):
    """State-to-state matrix ``P_pi`` and reward vector ``r_pi`` of a policy."""
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ShapeMismatch(f"policy shape {policy.probs.shape} does not match MDP "
                            f"({mdp.n_states}, {mdp.n_actions})")
    P_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    return P_pi, r_pi


def true_values(P_pi, r_pi, gamma, terminal_states=()):
    """Solve ``v = r_pi + gamma P_pi v`` with ``v = 0`` on terminal states.

    With ``gamma == 1`` the chain must be absorbing into ``terminal_states``,
    otherwise the system is singular and ``SingularMatrix`` propagates.
    """
    P_pi = np.asarray(P_pi, dtype=float)
    r_pi = np.asarray(r_pi, dtype=float)
    n = P_pi.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[list(terminal_states)] = False
    idx = np.flatnonzero(keep)
    v = np.zeros(n)
    sub = np.eye(idx.size) - gamma * P_pi[np.ix_(idx, idx)]
    v[idx] = linalg.solve_linear(sub, r_pi[idx])
    return v


def mdp_values(mdp: Mdp, policy: Policy):
    P_pi, r_pi = induce_chain(mdp, policy)
    return true_values(P_pi, r_pi, mdp.gamma, mdp.terminal_states)


def _start_state(mdp, rng):
    if mdp.start is None:
        return 0
    return int(np.searchsorted(np.cumsum(mdp.start), rng.random(), side="right").clip(0, mdp.n_states - 1))


def sample_episode(mdp: Mdp, policy: Policy, features: Optional[FeatureSpec], seed: int,
                   horizon_cap: int = DEFAULT_HORIZON, episode: int = 0) -> Trajectory:
    """Simulate one episode from the start distribution.

    The state sequence, observation noise and reward noise come from three
    separate substreams of ``(seed, episode)``, so for instance changing the
    features never changes which states are visited.
    """
    rng = make_rng(seed, EPISODE, episode, 0)
    pol_cdf = np.cumsum(policy.probs, axis=1)
    trans_cdf = np.cumsum(mdp.transition, axis=2)
    terminal = mdp.terminal_mask
    n_a, n_s = mdp.n_actions, mdp.n_states

    s = _start_state(mdp, rng)
    states = [s]
    actions = []
    block = rng.random((256, 2))
    j = 0
    while not terminal[s] and len(actions) < horizon_cap:
        if j == len(block):
            block = rng.random((256, 2))
            j = 0
        u_a, u_s = block[j]
        j += 1
        a = min(int(np.searchsorted(pol_cdf[s], u_a, side="right")), n_a - 1)
        s = min(int(np.searchsorted(trans_cdf[s, a], u_s, side="right")), n_s - 1)
        actions.append(a)
        states.append(s)

    states = np.asarray(states, dtype=int)
    actions = np.asarray(actions, dtype=int)
    rewards = mdp.reward[states[:-1], actions]
    if mdp.reward_std is not None and len(actions):
        std = mdp.reward_std[states[:-1], actions]
        rewards = rewards + std * make_rng(seed, EPISODE, episode, 2).standard_normal(len(actions))
    if features is None:
        obs = np.zeros((len(states), 0))
    else:
        obs = features.observe(states, make_rng(seed, EPISODE, episode, 1))
    return Trajectory(states, actions, np.asarray(rewards, dtype=float), obs,
                      bool(terminal[states[-1]]), seed, episode)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def parse_mdp(text: str):
    """Parse the line-oriented MDP format.

    Returns ``(mdp, policy, phi, beta)``.  Missing ``POL`` lines mean a
    uniform policy, missing ``PHI`` lines tabular features and missing
    ``BETA`` lines ``beta = 1`` everywhere.
    """
    header = None
    T = R = pol = None
    phi_rows = {}
    beta = None
    seen_pol = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        try:
            if header is None:
                if key != "mdp" or len(tok) != 4:
                    raise MdpFormatError("expected header 'mdp n_states n_actions gamma'", lineno)
                n, m, gamma = int(tok[1]), int(tok[2]), float(tok[3])
                if n < 1 or m < 1:
                    raise MdpFormatError("n_states and n_actions must be positive", lineno)
                header = (n, m, gamma)
                T = np.zeros((n, m, n))
                R = np.zeros((n, m))
                pol = np.zeros((n, m))
                beta = np.ones(n)
                continue
            n, m, _ = header
            if key == "T" and len(tok) == 5:
                s, a, s2, p = int(tok[1]), int(tok[2]), int(tok[3]), float(tok[4])
                _check_index(s, n, lineno), _check_index(a, m, lineno), _check_index(s2, n, lineno)
                if p < 0:
                    raise MdpFormatError("negative probability", lineno)
                T[s, a, s2] += p
            elif key == "R" and len(tok) == 4:
                s, a = int(tok[1]), int(tok[2])
                _check_index(s, n, lineno), _check_index(a, m, lineno)
                R[s, a] = float(tok[3])
            elif key == "POL" and len(tok) == 4:
                s, a, p = int(tok[1]), int(tok[2]), float(tok[3])
                _check_index(s, n, lineno), _check_index(a, m, lineno)
                if p < 0:
                    raise MdpFormatError("negative probability", lineno)
                pol[s, a] = p
                seen_pol = True
            elif key == "PHI" and len(tok) >= 3:
                s = int(tok[1])
                _check_index(s, n, lineno)
                phi_rows[s] = [float(x) for x in tok[2:]]
            elif key == "BETA" and len(tok) == 3:
                s = int(tok[1])
                _check_index(s, n, lineno)
                b = float(tok[2])
                if not 0.0 <= b <= 1.0:
                    raise MdpFormatError("beta must lie in [0, 1]", lineno)
                beta[s] = b
            else:
                raise MdpFormatError(f"unrecognised line {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, MdpFormatError):
                raise
            raise MdpFormatError(str(exc), lineno) from exc
    if header is None:
        raise MdpFormatError("missing header line")
    n, m, gamma = header
    if not 0.0 <= gamma <= 1.0:
        raise MdpFormatError("gamma must lie in [0, 1]")
    sums = T.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        s, a = bad[0]
        raise MdpFormatError(f"T({s},{a},.) sums to {sums[s, a]:.12g}, not 1")
    T = T / sums[..., None]
    if seen_pol:
        psums = pol.sum(axis=1)
        bad = np.flatnonzero(np.abs(psums - 1.0) > 1e-9)
        if bad.size:
            raise MdpFormatError(f"POL({bad[0]},.) sums to {psums[bad[0]]:.12g}, not 1")
        pol = pol / psums[:, None]
    else:
        pol[:] = 1.0 / m
    if phi_rows:
        if len(phi_rows) != n:
            raise MdpFormatError(f"PHI given for {len(phi_rows)} of {n} states")
        widths = {len(v) for v in phi_rows.values()}
        if len(widths) != 1:
            raise MdpFormatError("PHI rows have differing lengths")
        phi = np.array([phi_rows[s] for s in range(n)])
    else:
        phi = np.eye(n)
    return Mdp(T, R, gamma), Policy(pol), phi, beta


def _check_index(i, bound, lineno):
    if not 0 <= i < bound:
        raise MdpFormatError(f"index {i} out of range [0, {bound})", lineno)


def format_mdp(mdp: Mdp, policy: Policy, phi=None, beta=None) -> str:
    """Inverse of :func:`parse_mdp` (floats written with ``repr`` precision)."""
    lines = [f"mdp {mdp.n_states} {mdp.n_actions} {float(mdp.gamma)!r}"]
    for s, a, s2 in zip(*np.nonzero(mdp.transition)):
        lines.append(f"T {s} {a} {s2} {float(mdp.transition[s, a, s2])!r}")
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            lines.append(f"R {s} {a} {float(mdp.reward[s, a])!r}")
            lines.append(f"POL {s} {a} {float(policy.probs[s, a])!r}")
    if phi is not None:
        for s, row in enumerate(np.asarray(phi, dtype=float)):
            lines.append("PHI " + str(s) + " " + " ".join(repr(float(x)) for x in row))
    if beta is not None:
        for s, b in enumerate(beta):
            lines.append(f"BETA {s} {float(b)!r}")
    return "\n".join(lines) + "\n"
