from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ..mdp import FeatureSpec, Mdp, Policy, mdp_values


@dataclass(eq=False)
class EnvBundle:
    """An evaluation task: the MDP, the behaviour policy and every per-state knob.

    ``beta`` is the PTD preference, ``lam`` the TD(lambda)/ETD bootstrap
    parameter and ``interest`` the ETD-variable interest.  ETD-fixed uses
    ``fixed_interest`` on every state.  Errors are reported on
    ``eval_states`` with ``metric``.
    """

    name: str
    mdp: Mdp
    policy: Policy
    features: FeatureSpec
    beta: np.ndarray
    lam: np.ndarray
    interest: np.ndarray
    eval_states: np.ndarray
    metric: str = "mse"
    fixed_interest: float = 0.01
    partially_observable: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.mdp.n_states
        for name in ("beta", "lam", "interest"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per state")
            setattr(self, name, arr)
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise ValueError("beta must lie in [0, 1]")
        self.eval_states = np.asarray(self.eval_states, dtype=int)
        if self.eval_states.size == 0:
            raise ValueError("eval_states must be non-empty")
        if self.partially_observable is None:
            self.partially_observable = np.asarray(self.features.noisy, dtype=bool).copy()

    @cached_property
    def values(self) -> np.ndarray:
        return mdp_values(self.mdp, self.policy)

    def with_features(self, features: FeatureSpec) -> "EnvBundle":
        return replace(self, features=features)
