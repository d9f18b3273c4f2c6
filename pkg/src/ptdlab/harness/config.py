"""Experiment configurations and the line-oriented sweep file format.

A sweep file holds ``key = value`` lines; a comma-separated value list makes
that key an axis of the sweep.  ``#`` starts a comment::

    env = random-walk
    algo = ptd
    beta = 0.1, 0.5
    alpha = 0.1, 0.3, 1.5
    episodes = 10
    seeds = 5
"""

import itertools
from dataclasses import dataclass, fields, replace
from typing import List, Optional

from ..agents import ALGOS
from ..envs import ENV_NAMES
from ..experiments import SETTINGS


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit status 2)."""


EVAL_METRICS = ("rmse", "mse")
CARTPOLE_METRICS = ("return", "beta-percent")
CARTPOLE_ALGOS = ("ptd", "td-lambda")


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    algo: str
    alpha: float
    episodes: int = 10
    seeds: int = 1
    seed_base: int = 0
    metric: Optional[str] = None
    beta: Optional[float] = None
    lam: Optional[float] = None
    interest: Optional[float] = None
    setting: str = "linear"
    corridor_len: int = 5
    n: int = 8
    hidden: Optional[int] = None
    actor_alpha: Optional[float] = None
    condition: int = 1

    def validate(self):
        if self.env not in ENV_NAMES:
            raise ConfigError(f"unknown env {self.env!r}; expected one of {', '.join(ENV_NAMES)}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; expected one of {', '.join(ALGOS)}")
        if not self.alpha >= 0:
            raise ConfigError("alpha must be >= 0")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        for name in ("beta", "lam"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError(f"{'lambda' if name == 'lam' else name} must lie in [0, 1]")
        if self.interest is not None and not self.interest >= 0:
            raise ConfigError("interest must be >= 0")
        if self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}; expected one of {', '.join(SETTINGS)}")
        if self.setting != "linear" and not self.env.startswith("grid"):
            raise ConfigError(f"setting {self.setting!r} needs a grid env")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError("hidden must be >= 1")
        if self.env == "cartpole":
            if self.algo not in CARTPOLE_ALGOS:
                raise ConfigError(f"cartpole supports {', '.join(CARTPOLE_ALGOS)}")
            if self.metric not in (None,) + CARTPOLE_METRICS:
                raise ConfigError(f"cartpole metric must be one of {', '.join(CARTPOLE_METRICS)}")
            if self.condition not in (1, 2, 3):
                raise ConfigError("condition must be 1, 2 or 3")
            if self.actor_alpha is not None and not self.actor_alpha >= 0:
                raise ConfigError("actor_alpha must be >= 0")
        elif self.metric not in (None,) + EVAL_METRICS:
            raise ConfigError(f"metric must be one of {', '.join(EVAL_METRICS)}")
        if self.corridor_len < 1:
            raise ConfigError("len must be >= 1")
        if self.env.startswith("grid") and self.n not in (8, 12, 16):
            raise ConfigError("n must be 8, 12 or 16")
        return self

    @property
    def param(self):
        """``(param_name, param_value)`` labelling the algorithm's own knob."""
        name, value = {
            "ptd": ("beta", self.beta),
            "td-lambda": ("lambda", self.lam),
            "etd-fixed": ("interest", self.interest),
            "etd-variable": ("interest", self.interest),
        }[self.algo]
        return name, value


# sweep-file keys and their parsers
_KEYS = {
    "env": ("env", str),
    "algo": ("algo", str),
    "alpha": ("alpha", float),
    "episodes": ("episodes", int),
    "seeds": ("seeds", int),
    "seed_base": ("seed_base", int),
    "metric": ("metric", str),
    "beta": ("beta", float),
    "lambda": ("lam", float),
    "interest": ("interest", float),
    "setting": ("setting", str),
    "len": ("corridor_len", int),
    "n": ("n", int),
    "hidden": ("hidden", int),
    "actor_alpha": ("actor_alpha", float),
    "condition": ("condition", int),
}
_FIELDS = {f.name for f in fields(ExperimentConfig)}
assert all(target in _FIELDS for target, _ in _KEYS.values())


def parse_sweep(text: str) -> List[ExperimentConfig]:
    """Expand a sweep file into its cells, in row-major order of the axes.

    Axes vary in the order their keys appear in the file, the last one
    fastest.
    """
    axes = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value[, value...]'")
        key, _, rhs = (part.strip() for part in line.partition("="))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        target, conv = _KEYS[key]
        items = [v.strip() for v in rhs.split(",")]
        if not all(items):
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        try:
            values = [conv(v) for v in items]
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {rhs!r}") from None
        axes.append((target, values))
    for required in ("env", "algo", "alpha"):
        if _KEYS[required][0] not in {t for t, _ in axes}:
            raise ConfigError(f"missing required key {required!r}")
    names = [t for t, _ in axes]
    cells = []
    for combo in itertools.product(*(v for _, v in axes)):
        kw = dict(zip(names, combo))
        base = ExperimentConfig(env=kw.pop("env"), algo=kw.pop("algo"), alpha=kw.pop("alpha"))
        cells.append(replace(base, **kw).validate())
    return cells
