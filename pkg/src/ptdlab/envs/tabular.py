"""Finite evaluation tasks: random walk, corridors and grids."""

import numpy as np

from .._rng import LAYOUT, make_rng
from ..exceptions import InvalidLength
from ..mdp import FeatureSpec, Mdp, Policy
from .bundle import EnvBundle

CORRIDOR_LENGTHS = (5, 10, 15, 20, 25)
GRID_SIZES = (8, 12, 16)
GOAL_REWARDS = (2.0, -1.0)
GRID_REWARD = 5.0
GRID_GAMMA = 0.99

UP, DOWN, LEFT, RIGHT = range(4)


def make_random_walk(n_states=19, beta=1.0, lam=0.0, interest=0.01):
    """Sequential chain with terminals on both sides, gamma = 1.

    State 0 and ``n_states + 1`` are terminal; the walk starts in the middle.
    Entering the right terminal pays +1, the left one -1.  Features are
    one-hot over the non-terminal states.
    """
    n = n_states + 2
    left, right = 0, n - 1
    T = np.zeros((n, 2, n))
    R = np.zeros((n, 2))
    for s in range(1, n - 1):
        T[s, 0, s - 1] = 1.0
        T[s, 1, s + 1] = 1.0
    for s in (left, right):
        T[s, :, s] = 1.0
    R[1, 0] = -1.0
    R[n - 2, 1] = 1.0
    start = np.zeros(n)
    start[(n - 1) // 2] = 1.0
    mdp = Mdp(T, R, 1.0, frozenset({left, right}), start)
    phi = np.zeros((n, n_states))
    phi[1:-1] = np.eye(n_states)
    full = lambda x: np.full(n, float(x))
    return EnvBundle(
        name="random-walk", mdp=mdp, policy=Policy.uniform(n, 2), features=FeatureSpec(phi),
        beta=full(beta), lam=full(lam), interest=full(interest),
        eval_states=np.arange(1, n - 1), metric="rmse", fixed_interest=float(interest),
    )


class _Builder:
    """Accumulates deterministic transitions for the corridor tasks."""

    def __init__(self):
        self.edges = []
        self.n = 0
        self.labels = []

    def add(self, label):
        self.labels.append(label)
        self.n += 1
        return self.n - 1

    def link(self, s, a, s2, reward=0.0, std=0.0):
        self.edges.append((s, a, s2, reward, std))

    def corridor(self, entry, action, length, exit_state, reward=0.0, std=0.0, tag="c"):
        cells = [self.add(f"{tag}{i}") for i in range(length)]
        self.link(entry, action, cells[0])
        for a, b in zip(cells, cells[1:]):
            self.link(a, 0, b)
            self.link(a, 1, b)
        self.link(cells[-1], 0, exit_state, reward, std)
        self.link(cells[-1], 1, exit_state, reward, std)
        return cells


def make_corridor_task(task=1, corridor_len=5):
    """Delayed-outcome corridor tasks with aliased corridor states.

    Task 1: from S1, ``up``/``down`` enter one of two corridors of
    ``corridor_len`` aliased states; the corridor leads to a goal and entering
    it pays +2 (upper) or -1 (lower).  The goal then exits to the terminal.

    Task 2: S1's corridors lead to connecting states S2 (upper) and S3
    (lower), each of which opens onto its own pair of corridors and goals.
    Goal rewards are Gaussian with unit standard deviation and means +2/-1.

    Decision and goal states are observed as one-hot vectors over the fully
    observable set; every visit to a corridor state is observed as a fresh
    ``N(0.5, 1)`` vector of the same length.
    """
    if task not in (1, 2):
        raise ValueError("corridor task must be 1 or 2")
    if int(corridor_len) < 1:
        raise InvalidLength(f"corridor length must be >= 1, got {corridor_len}")
    L = int(corridor_len)
    b = _Builder()
    std = 0.0 if task == 1 else 1.0
    s1 = b.add("S1")
    fo = [s1]
    goals = []
    if task == 1:
        roots = [s1]
    else:
        s2, s3 = b.add("S2"), b.add("S3")
        fo += [s2, s3]
        b.corridor(s1, 0, L, s2, tag="S1u")
        b.corridor(s1, 1, L, s3, tag="S1d")
        roots = [s2, s3]
    for root in roots:
        up_goal, down_goal = b.add(f"G{len(goals) + 1}"), b.add(f"G{len(goals) + 2}")
        goals += [up_goal, down_goal]
        name = b.labels[root]
        b.corridor(root, 0, L, up_goal, GOAL_REWARDS[0], std, tag=f"{name}u")
        b.corridor(root, 1, L, down_goal, GOAL_REWARDS[1], std, tag=f"{name}d")
    fo += goals
    term = b.add("end")
    for g in goals:
        b.link(g, 0, term)
        b.link(g, 1, term)
    b.link(term, 0, term)
    b.link(term, 1, term)

    n = b.n
    T = np.zeros((n, 2, n))
    R = np.zeros((n, 2))
    S = np.zeros((n, 2))
    for s, a, s2, r, sd in b.edges:
        T[s, a, s2] = 1.0
        R[s, a] = r
        S[s, a] = sd
    start = np.zeros(n)
    start[s1] = 1.0
    mdp = Mdp(T, R, 1.0, frozenset({term}), start, S if task == 2 else None)

    fo_mask = np.zeros(n, dtype=bool)
    fo_mask[fo] = True
    noisy = ~fo_mask
    noisy[term] = False
    phi = np.zeros((n, len(fo)))
    phi[fo, np.arange(len(fo))] = 1.0
    features = FeatureSpec(phi, noisy=noisy, noise_mean=0.5, noise_std=1.0)

    beta = np.where(noisy, 0.0, 1.0)
    interest = np.where(fo_mask, 0.5, 0.0)
    return EnvBundle(
        name=f"corridor{task}", mdp=mdp, policy=Policy.uniform(n, 2), features=features,
        beta=beta, lam=1.0 - beta, interest=interest, eval_states=np.array(fo),
        metric="mse", fixed_interest=0.01, partially_observable=noisy.copy(),
        info={"labels": b.labels, "corridor_len": L, "task": task, "goals": goals},
    )


def grid_po_mask(task, n, seed=0):
    """Partially observable cells of an ``n x n`` grid (row-major)."""
    cells = n * n
    terminal = cells - 1
    if task == 1:
        mid = {n // 2 - 1, n // 2}
        rows, cols = np.divmod(np.arange(cells), n)
        mask = np.isin(rows, list(mid)) | np.isin(cols, list(mid))
    elif task == 2:
        rng = make_rng(seed, LAYOUT)
        pick = rng.choice(cells - 1, size=cells // 2, replace=False)
        mask = np.zeros(cells, dtype=bool)
        mask[pick] = True
    else:
        raise ValueError("grid task must be 1 or 2")
    mask[terminal] = False
    return mask


def grid_transitions(n):
    cells = n * n
    T = np.zeros((cells, 4, cells))
    R = np.zeros((cells, 4))
    terminal = cells - 1
    moves = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
    for s in range(cells):
        r, c = divmod(s, n)
        for a, (dr, dc) in moves.items():
            if s == terminal:
                T[s, a, s] = 1.0
                continue
            r2, c2 = r + dr, c + dc
            if not (0 <= r2 < n and 0 <= c2 < n):
                r2, c2 = r, c
            s2 = r2 * n + c2
            T[s, a, s2] = 1.0
            if s2 == terminal:
                R[s, a] = GRID_REWARD
    return T, R


def make_grid_task(task=1, n=8, seed=0):
    """Grid navigation to the bottom-right corner under a uniform policy.

    Moves are deterministic; bumping into the outer wall leaves the agent in
    place.  Episodes start uniformly in the top-left quadrant.  Task 1 hides
    the two central rows and columns; task 2 hides ``n*n // 2`` random
    non-terminal cells (drawn from ``seed``).

    The default features are the network inputs: a one-hot vector of length
    ``n*n`` for observable cells and a fresh ``N(0, 1)`` vector otherwise.
    """
    if n not in GRID_SIZES:
        raise ValueError(f"grid size must be one of {GRID_SIZES}")
    T, R = grid_transitions(n)
    cells = n * n
    terminal = cells - 1
    start = np.zeros(cells)
    h = n // 2
    for r in range(h):
        start[r * n:r * n + h] = 1.0
    start /= start.sum()
    mdp = Mdp(T, R, GRID_GAMMA, frozenset({terminal}), start)
    po = grid_po_mask(task, n, seed)
    phi = np.eye(cells)
    phi[terminal] = 0.0
    features = FeatureSpec(phi, noisy=po, noise_mean=0.0, noise_std=1.0)
    beta = np.where(po, 0.0, 1.0)
    interest = np.where(po, 0.0, 0.5)
    eval_states = np.flatnonzero(~po & (np.arange(cells) != terminal))
    return EnvBundle(
        name=f"grid{task}", mdp=mdp, policy=Policy.uniform(cells, 4), features=features,
        beta=beta, lam=1.0 - beta, interest=interest, eval_states=eval_states,
        metric="mse", fixed_interest=0.01, partially_observable=po,
        info={"n": n, "task": task, "seed": seed},
    )
