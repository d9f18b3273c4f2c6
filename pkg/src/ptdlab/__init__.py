"""Preferential TD learning toolkit.

Exact expected-update analysis (``analysis``), linear learners with an
estimator interface (``agents``), evaluation tasks (``envs``), small
hand-differentiated networks (``neural``) and a CSV-producing command line
(``harness``).
"""

from .agents import EmphaticTD, PreferentialTD, TDLambda, run_policy_evaluation
from .analysis import counterexample_report, expected_model, fixed_point, lemma_audit, p_beta
from .envs import make_env
from .mdp import Mdp, Policy, parse_mdp, sample_episode

__version__ = "0.1.0"

__all__ = [
    "EmphaticTD", "Mdp", "Policy", "PreferentialTD", "TDLambda", "counterexample_report",
    "expected_model", "fixed_point", "lemma_audit", "make_env", "p_beta", "parse_mdp",
    "run_policy_evaluation", "sample_episode",
]
