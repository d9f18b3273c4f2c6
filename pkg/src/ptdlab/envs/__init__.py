from .bundle import EnvBundle
from .cartpole import CartPole, ThresholdPreference, make_cartpole
from .tabular import (CORRIDOR_LENGTHS, GRID_SIZES, grid_po_mask, make_corridor_task,
                      make_grid_task, make_random_walk)

ENV_NAMES = ("random-walk", "corridor1", "corridor2", "grid1", "grid2", "cartpole")


def make_env(name, corridor_len=5, n=8, seed=0, **kwargs):
    """Construct an environment by its command-line name."""
    if name == "random-walk":
        return make_random_walk(**kwargs)
    if name in ("corridor1", "corridor2"):
        return make_corridor_task(int(name[-1]), corridor_len)
    if name in ("grid1", "grid2"):
        return make_grid_task(int(name[-1]), n, seed)
    if name == "cartpole":
        return make_cartpole()
    raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")


__all__ = [
    "CORRIDOR_LENGTHS", "CartPole", "ENV_NAMES", "EnvBundle", "GRID_SIZES", "ThresholdPreference",
    "grid_po_mask", "make_cartpole", "make_corridor_task", "make_env", "make_grid_task",
    "make_random_walk",
]
