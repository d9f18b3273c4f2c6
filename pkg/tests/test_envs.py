from collections import deque

import numpy as np
import pytest

from ptdlab.agents import emphasis_sequence, run_policy_evaluation
from ptdlab.envs import (CartPole, ThresholdPreference, grid_po_mask, make_cartpole, make_corridor_task,
                         make_env, make_grid_task, make_random_walk)
from ptdlab.exceptions import InvalidLength
from ptdlab.mdp import induce_chain, sample_episode


def check_bundle(env):
    P, _ = induce_chain(env.mdp, env.policy)
    assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12
    assert np.all((env.beta >= 0) & (env.beta <= 1))
    assert env.eval_states.size > 0


class TestRandomWalk:
    def test_structure(self):
        env = make_random_walk()
        check_bundle(env)
        P, r = induce_chain(env.mdp, env.policy)
        assert env.mdp.n_states == 21 and env.mdp.gamma == 1.0
        for s in range(1, 20):
            assert P[s, s - 1] == 0.5 and P[s, s + 1] == 0.5
        assert r[1] == -0.5 and r[19] == 0.5 and np.all(r[2:19] == 0)
        assert len(env.eval_states) == 19

    def test_values(self):
        v = make_random_walk().values
        assert v[10] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(v[1:20], -v[19:0:-1], atol=1e-12)


class TestCorridor:
    @pytest.mark.parametrize("L", [1, 5, 25])
    def test_episode_length(self, L):
        env = make_corridor_task(1, L)
        check_bundle(env)
        lengths = {len(sample_episode(env.mdp, env.policy, env.features, 0, episode=i)) for i in range(20)}
        assert lengths == {L + 2}

    def test_s1_value(self):
        env = make_corridor_task(1, 5)
        assert env.values[0] == pytest.approx(0.5, abs=1e-12)
        goals = env.info["goals"]
        # reward is paid on entering the goal, which then exits for free
        np.testing.assert_allclose(env.values[goals], 0.0, atol=1e-12)

    def test_beta_vector(self):
        for task in (1, 2):
            env = make_corridor_task(task, 10)
            labels = env.info["labels"]
            fo = {i for i, lab in enumerate(labels) if lab in ("S1", "S2", "S3") or lab.startswith("G")}
            for s, lab in enumerate(labels):
                if lab == "end":
                    continue
                assert env.beta[s] == (1.0 if s in fo else 0.0), lab
            np.testing.assert_array_equal(env.lam, 1 - env.beta)
            np.testing.assert_array_equal(np.sort(env.eval_states), sorted(fo))

    def test_task2_layout(self):
        env = make_corridor_task(2, 5)
        check_bundle(env)
        assert env.mdp.reward_std is not None
        # two corridors to S2/S3, then two corridors to the goals: 2L + 3 transitions
        lengths = {len(sample_episode(env.mdp, env.policy, env.features, 0, episode=i)) for i in range(20)}
        assert lengths == {2 * 5 + 3}
        assert env.values[0] == pytest.approx(0.5, abs=1e-12)

    def test_invalid_length(self):
        with pytest.raises(InvalidLength):
            make_corridor_task(1, 0)

    def test_corridor_observations_are_noise(self):
        env = make_corridor_task(1, 5)
        traj = sample_episode(env.mdp, env.policy, env.features, 3)
        noisy = env.features.noisy[traj.states]
        assert noisy.sum() == 5
        assert not np.allclose(traj.obs[noisy][0], traj.obs[noisy][1])
        np.testing.assert_array_equal(traj.obs[0], env.features.phi[0])

    def test_etd_variable_emphasis(self):
        env = make_corridor_task(2, 5)
        traj = sample_episode(env.mdp, env.policy, env.features, 0)
        s = traj.states[:-1]
        M = emphasis_sequence(s, env.lam, env.interest, 1.0)
        fo = env.interest[s] > 0
        # S1, the connecting state, then the goal
        np.testing.assert_allclose(M[fo], [0.5, 1.0, 1.5])

    def test_noise_seed_invariance(self):
        env = make_corridor_task(1, 5)
        a = [run_policy_evaluation(env, "ptd", 0.1, 30, s)[-1] for s in range(25)]
        b = [run_policy_evaluation(env, "ptd", 0.1, 30, 1000 + s)[-1] for s in range(25)]
        se = np.sqrt(np.var(a, ddof=1) / 25 + np.var(b, ddof=1) / 25)
        assert abs(np.mean(a) - np.mean(b)) <= 3 * se + 1e-12


class TestGrid:
    @pytest.mark.parametrize("n", [8, 12, 16])
    def test_task2_mask(self, n):
        m = grid_po_mask(2, n, seed=5)
        assert m.sum() == n * n // 2
        assert not m[-1]
        np.testing.assert_array_equal(m, grid_po_mask(2, n, seed=5))
        assert not np.array_equal(m, grid_po_mask(2, n, seed=6))

    def test_task1_cross(self):
        m = grid_po_mask(1, 8).reshape(8, 8)
        assert m[3].all() and m[4].all() and m[:, 3].all() and m[:, 4].all()
        assert m.sum() == 8 * 4 - 4

    @pytest.mark.parametrize("task", [1, 2])
    def test_deterministic_and_reachable(self, task):
        env = make_grid_task(task, 8, seed=1)
        check_bundle(env)
        T = env.mdp.transition
        assert np.all(np.isin(T, (0.0, 1.0))) and np.all(T.sum(axis=2) == 1)
        n_s = env.mdp.n_states
        # reverse BFS from the terminal
        seen, queue = {n_s - 1}, deque([n_s - 1])
        while queue:
            t = queue.popleft()
            for s in np.flatnonzero(T[:, :, t].any(axis=1)):
                if s not in seen:
                    seen.add(int(s))
                    queue.append(int(s))
        assert all(s in seen for s in np.flatnonzero(env.mdp.start))

    def test_walls_and_reward(self):
        env = make_grid_task(1, 8)
        T, R = env.mdp.transition, env.mdp.reward
        assert T[0, 0, 0] == 1.0 and T[0, 2, 0] == 1.0
        assert R[62, 3] == 5.0 and R[55, 1] == 5.0
        assert np.count_nonzero(R) == 2
        assert env.mdp.gamma == 0.99

    def test_start_quadrant(self):
        env = make_grid_task(1, 8)
        start = env.mdp.start.reshape(8, 8)
        assert np.all(start[:4, :4] == 1 / 16) and start.sum() == pytest.approx(1.0)

    def test_beta(self):
        env = make_grid_task(2, 8, seed=0)
        po = env.partially_observable
        np.testing.assert_array_equal(env.beta, np.where(po, 0.0, 1.0))
        assert not np.any(po[env.eval_states])

    def test_bad_size(self):
        with pytest.raises(ValueError):
            make_grid_task(1, 10)


class TestCartPole:
    def test_mirrored_symmetry(self):
        rng = np.random.default_rng(0)
        actions = rng.integers(0, 2, size=40)
        a, b = CartPole(), CartPole()
        a.reset(state=np.zeros(4))
        b.reset(state=np.zeros(4))
        for act in actions:
            sa = a.step(int(act))[0]
            sb = b.step(int(1 - act))[0]
            np.testing.assert_allclose(sa, -sb, atol=1e-12)

    def test_termination(self):
        env = make_cartpole()
        env.reset(state=[0.0, 0.0, 0.25, 0.0])
        assert env.step(0)[2]
        short = CartPole(max_steps=3)
        short.reset(state=np.zeros(4))
        flags = [short.step(t % 2)[3] for t in range(3)]
        assert flags == [False, False, True]

    def test_random_policy_length(self):
        env = make_cartpole()
        rng = np.random.default_rng(0)
        lengths = []
        for _ in range(300):
            env.reset(rng)
            n = 0
            while True:
                _, _, failed, trunc = env.step(int(rng.integers(2)))
                n += 1
                if failed or trunc:
                    break
            lengths.append(n)
        assert 15 <= np.mean(lengths) <= 40

    def test_threshold_rule(self):
        rule = ThresholdPreference(1)
        obs = [[0, 0, 0, 0], [0.4, 0.4, 0.04, 9], [0.51, 0, 0, 0], [0.51, 0, 0.06, 0], [0.51, -0.6, 0.06, 0]]
        np.testing.assert_allclose(rule.assign(obs), [1.0, 0.1, 1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            ThresholdPreference(4)

    def test_make_env_names(self):
        assert make_env("cartpole").gamma == 0.99
        assert make_env("corridor2", corridor_len=10).info["corridor_len"] == 10
        with pytest.raises(ValueError):
            make_env("mountaincar")
