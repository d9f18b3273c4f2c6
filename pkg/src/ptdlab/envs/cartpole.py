"""Cart-pole balancing with the classic constants and Euler integration."""

import math

import numpy as np

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
HALF_LENGTH = 0.5
FORCE = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
MAX_STEPS = 500
GAMMA = 0.99

# (cart position, cart velocity, pole angle) deltas that mark a beta = 1 state
THRESHOLDS = {
    1: (0.5, 0.5, 0.05),
    2: (1.0, 1.0, 0.1),
    3: (0.3, 0.3, 0.03),
}
INTERMEDIATE_BETA = 0.1


class CartPole:
    """Two actions: 0 pushes left, 1 pushes right.  Reward +1 per step.

    The observation is ``(x, x_dot, theta, theta_dot)``.  An episode fails
    when ``|x| > 2.4`` or ``|theta| > 12 degrees`` and is truncated after
    ``max_steps`` steps.
    """

    n_actions = 2
    obs_dim = 4
    gamma = GAMMA

    def __init__(self, max_steps=MAX_STEPS):
        self.max_steps = max_steps
        self.state = np.zeros(4)
        self.t = 0

    def reset(self, rng=None, state=None):
        if state is not None:
            self.state = np.asarray(state, dtype=float).copy()
        else:
            self.state = rng.uniform(-0.05, 0.05, size=4)
        self.t = 0
        return self.state.copy()

    def step(self, action):
        """Advance one tick; returns ``(obs, reward, failed, truncated)``."""
        x, x_dot, theta, theta_dot = self.state
        force = FORCE if action == 1 else -FORCE
        cos, sin = math.cos(theta), math.sin(theta)
        total_mass = MASS_CART + MASS_POLE
        pm_length = MASS_POLE * HALF_LENGTH
        temp = (force + pm_length * theta_dot ** 2 * sin) / total_mass
        theta_acc = (GRAVITY * sin - cos * temp) / (
            HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos ** 2 / total_mass))
        x_acc = temp - pm_length * theta_acc * cos / total_mass
        x = x + TAU * x_dot
        x_dot = x_dot + TAU * x_acc
        theta = theta + TAU * theta_dot
        theta_dot = theta_dot + TAU * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self.t += 1
        failed = abs(x) > X_LIMIT or abs(theta) > THETA_LIMIT
        truncated = not failed and self.t >= self.max_steps
        return self.state.copy(), 1.0, failed, truncated


def make_cartpole(max_steps=MAX_STEPS):
    return CartPole(max_steps)


class ThresholdPreference:
    """Online preference rule for cart-pole.

    A state gets ``beta = 1`` when its cart position, cart velocity or pole
    angle differs from those of the last ``beta = 1`` state by more than the
    condition's threshold; the first state of an episode is always a
    ``beta = 1`` state.  All other states get ``intermediate``.
    """

    def __init__(self, condition=1, intermediate=INTERMEDIATE_BETA):
        if condition not in THRESHOLDS:
            raise ValueError(f"condition must be one of {sorted(THRESHOLDS)}")
        self.condition = condition
        self.thresholds = np.array(THRESHOLDS[condition])
        self.intermediate = intermediate
        self._ref = None

    def reset(self):
        self._ref = None

    def __call__(self, obs) -> float:
        key = np.asarray(obs, dtype=float)[:3]
        if self._ref is None or np.any(np.abs(key - self._ref) > self.thresholds):
            self._ref = key
            return 1.0
        return self.intermediate

    def assign(self, observations):
        """Preferences for a whole episode's observations (resets first)."""
        self.reset()
        return np.array([self(o) for o in observations])
