"""Execute experiment cells, optionally across worker processes.

Work is split into ``(cell, seed)`` jobs; results are gathered back into
canonical order, so the worker count never changes the output bytes.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence

import numpy as np

from ..envs import make_env
from ..experiments import ACTOR_LR, actor_critic_curve, learning_curve
from .config import ConfigError, ExperimentConfig
from .records import RunRecord, cell_records

THREADS_ENV = "PTDLAB_THREADS"


def worker_count(default=1):
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def default_metric(cfg: ExperimentConfig):
    if cfg.metric:
        return cfg.metric
    if cfg.env == "cartpole":
        return "return"
    return make_env(cfg.env, cfg.corridor_len, cfg.n).metric


def run_seed(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    """Per-episode curve of one seed of a cell."""
    metric = default_metric(cfg)
    if cfg.env == "cartpole":
        actor_lr = ACTOR_LR if cfg.actor_alpha is None else cfg.actor_alpha
        kw = {} if cfg.hidden is None else {"hidden": cfg.hidden}
        returns, percent = actor_critic_curve(cfg.algo, cfg.episodes, seed, cfg.alpha, actor_lr=actor_lr,
                                              condition=cfg.condition, **kw)
        return percent if metric == "beta-percent" else returns
    env = make_env(cfg.env, cfg.corridor_len, cfg.n, seed=seed)
    kw = {"hidden": cfg.hidden} if cfg.hidden is not None and cfg.setting in ("forward", "backward") else {}
    return learning_curve(env, cfg.algo, cfg.alpha, cfg.episodes, seed, setting=cfg.setting, beta=cfg.beta,
                          lam=cfg.lam, interest=cfg.interest, metric=metric, **kw)


def _job(args):
    cfg, seed = args
    return run_seed(cfg, seed)


def run_cells(cells: Sequence[ExperimentConfig], workers=None) -> List[RunRecord]:
    jobs = [(cfg, cfg.seed_base + s) for cfg in cells for s in range(cfg.seeds)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            curves = list(pool.map(_job, jobs))
    else:
        curves = [_job(j) for j in jobs]
    rows, i = [], 0
    for cfg in cells:
        seeds = [cfg.seed_base + s for s in range(cfg.seeds)]
        rows.extend(cell_records(cfg, default_metric(cfg), curves[i:i + cfg.seeds], seeds))
        i += cfg.seeds
    return rows
