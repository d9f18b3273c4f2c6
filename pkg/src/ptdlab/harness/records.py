"""CSV rows for experiment output."""

import math
from typing import Iterable, List, NamedTuple

import numpy as np

HEADER = ("env", "algo", "param_name", "param_value", "alpha", "seed", "episode", "metric", "value")


def fmt(x) -> str:
    """Render a number with 10 significant digits; non-finite values as ``inf``."""
    if x is None:
        return "env"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "inf"
    return "%.10g" % x


class RunRecord(NamedTuple):
    env: str
    algo: str
    param_name: str
    param_value: str
    alpha: str
    seed: str
    episode: str
    metric: str
    value: str


def summarize(finals):
    """Mean and population standard deviation of final-episode values.

    Any non-finite final value makes both statistics ``inf``.
    """
    finals = np.asarray(finals, dtype=float)
    if not np.all(np.isfinite(finals)):
        return math.inf, math.inf
    return float(np.mean(finals)), float(np.std(finals))


def cell_records(cfg, metric, curves, seeds) -> List[RunRecord]:
    """Data rows (seed-major, episodes 1..N) plus one summary row for a config cell."""
    pname, pval = cfg.param
    head = (cfg.env, cfg.algo, pname, fmt(pval), fmt(cfg.alpha))
    rows = []
    for seed, curve in zip(seeds, curves):
        for ep, v in enumerate(curve, start=1):
            rows.append(RunRecord(*head, str(seed), str(ep), metric, fmt(v)))
    mean, sd = summarize([c[-1] for c in curves])
    rows.append(RunRecord(*head, "summary", str(len(curves[0])), f"{metric}_mean[sd={fmt(sd)}]", fmt(mean)))
    return rows


def write_csv(rows: Iterable[RunRecord], stream):
    stream.write(",".join(HEADER) + "\n")
    for r in rows:
        stream.write(",".join(r) + "\n")


def read_csv(text: str) -> List[RunRecord]:
    lines = text.split("\n")
    if lines[0] != ",".join(HEADER):
        raise ValueError("unexpected CSV header")
    return [RunRecord(*ln.split(",")) for ln in lines[1:] if ln]
