"""Acceptance checks, one test per numbered criterion.

Each test prints a single ``PASS``/``FAIL criterion N: ...`` line (also
collected into the terminal summary) and then asserts the criterion with its
pinned tolerance.  Run just this suite with::

    pytest tests/test_acceptance.py -v
"""

import time

import numpy as np
import pytest
from _family import random_problem, random_trajectory

import conftest
from ptdlab import linalg
from ptdlab.agents import (accumulate_online, ptd_forward_update, run_policy_evaluation,
                           td_lambda_forward_update)
from ptdlab.analysis import (counterexample_setups, expected_model, fixed_point, forward_backward_residual,
                             lemma_audit, stationarity_residual, td_lambda_key_matrix)
from ptdlab.envs import make_corridor_task, make_grid_task, make_random_walk
from ptdlab.experiments import actor_critic_curve, nonlinear_curve, semilinear_curve
from ptdlab.harness import main
from ptdlab.neural import Mlp, mlp_backward, mlp_forward, numerical_gradient


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    return ok


def within(M, target, tol):
    return bool(np.all(np.abs(np.asarray(M) - np.asarray(target)) <= tol))


def family(seed=2024, count=100):
    rng = np.random.default_rng(seed)
    return [random_problem(rng) for _ in range(count)], rng


# ---------------------------------------------------------------------------
# exact analysis
# ---------------------------------------------------------------------------

def test_criterion_01_counterexample_one():
    t0 = time.perf_counter()
    s = counterexample_setups()["example1"]
    A_td = td_lambda_key_matrix(s["phi"], s["P_pi"], s["d_pi"], s["lam"], s["gamma"])
    A_ptd = expected_model(s["phi"], s["P_pi"], np.zeros(2), s["d_pi"], 1 - s["lam"], s["gamma"]).A
    elapsed = time.perf_counter() - t0
    ok = (within(A_td, [[-0.0429]], 5e-4) and not linalg.is_positive_definite(A_td)
          and within(A_ptd, [[0.009]], 1e-3) and linalg.is_positive_definite(A_ptd) and elapsed < 1.0)
    report(1, ok, f"TD(lambda) A={A_td[0, 0]:.5f} PD={linalg.is_positive_definite(A_td)}; "
                  f"PTD A={A_ptd[0, 0]:.5f} PD={linalg.is_positive_definite(A_ptd)}; {elapsed:.3f}s")
    assert ok


def test_criterion_02_counterexample_two():
    t0 = time.perf_counter()
    s = counterexample_setups()["example2"]
    A_td = td_lambda_key_matrix(s["phi"], s["P_pi"], s["d_pi"], s["lam"], s["gamma"])
    A_ptd = expected_model(s["phi"], s["P_pi"], np.zeros(2), s["d_pi"], 1 - s["lam"], s["gamma"]).A
    elapsed = time.perf_counter() - t0
    td_ok = within(A_td, [[-0.46, 0.15], [-0.77, 0.07]], 0.01) and not linalg.is_positive_definite(A_td)
    ptd_ok = within(A_ptd, [[0.46, 0.15], [0.15, 0.05]], 0.01) and linalg.is_positive_definite(A_ptd)
    ok = td_ok and ptd_ok and elapsed < 1.0
    report(2, ok, f"TD(lambda) A={np.round(A_td, 5).tolist()} ok={td_ok}; "
                  f"PTD A={np.round(A_ptd, 5).tolist()} ok={ptd_ok}; {elapsed:.3f}s")
    assert ok


def test_criterion_03_forward_backward_residual():
    t0 = time.perf_counter()
    problems, rng = family()
    worst = 0.0
    for p in problems:
        m = expected_model(p["phi"], p["P"], p["r"], p["d"], p["beta"], p["gamma"])
        for _ in range(10):
            worst = max(worst, forward_backward_residual(m, p["phi"], p["d"], rng.normal(size=p["k"]) * 3))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    report(3, ok, f"max residual {worst:.2e} over 100 problems x 10 w; {elapsed:.2f}s")
    assert ok


def test_criterion_04_lemma_audit():
    t0 = time.perf_counter()
    problems, _ = family()
    passed = 0
    stat = 0.0
    for p in problems:
        a = lemma_audit(expected_model(p["phi"], p["P"], p["r"], p["d"], p["beta"], p["gamma"]))
        passed += a.row_sums_positive and a.col_sums_positive and a.pd
        stat = max(stat, stationarity_residual(p["P"], p["d"], p["beta"]))
    elapsed = time.perf_counter() - t0
    ok = passed == 100 and stat <= 1e-9 and elapsed < 10
    report(4, ok, f"{passed}/100 audits pass; stationarity residual {stat:.2e}; {elapsed:.2f}s")
    assert ok


def test_criterion_05_fixed_point():
    t0 = time.perf_counter()
    problems, _ = family()
    worst = 0.0
    for p in problems:
        _, pbe = fixed_point(expected_model(p["phi"], p["P"], p["r"], p["d"], p["beta"], p["gamma"]),
                             p["phi"], p["d"])
        worst = max(worst, pbe)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10
    report(5, ok, f"max projected Bellman error {worst:.2e}; {elapsed:.2f}s")
    assert ok


def test_criterion_06_offline_online():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    worst_ptd = worst_td = 0.0
    for _ in range(200):
        traj = random_trajectory(rng)
        w, g = rng.normal(size=4), float(rng.uniform(0, 1))
        beta, lam = rng.uniform(size=6), rng.uniform(size=6)
        worst_ptd = max(worst_ptd, np.max(np.abs(accumulate_online(w, traj, g, "ptd", beta=beta)
                                                 - ptd_forward_update(w, traj, beta, g))))
        worst_td = max(worst_td, np.max(np.abs(accumulate_online(w, traj, g, "td-lambda", lam=lam)
                                               - td_lambda_forward_update(w, traj, lam, g))))
    elapsed = time.perf_counter() - t0
    ok = worst_ptd <= 1e-10 and worst_td <= 1e-10 and elapsed < 10
    report(6, ok, f"PTD {worst_ptd:.2e}, TD(lambda) {worst_td:.2e} over 200 episodes; {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------------------
# desk-scale experiments
# ---------------------------------------------------------------------------

def seed_curves(fn, seeds):
    return np.array([fn(s) for s in seeds])


def test_criterion_07_random_walk_shape():
    t0 = time.perf_counter()
    env = make_random_walk()
    seeds = range(25)
    initial = float(np.sqrt(np.mean(env.values[env.eval_states] ** 2)))
    ptd1 = seed_curves(lambda s: run_policy_evaluation(env, "ptd", 0.3, 10, s, beta=1.0), seeds)
    td0 = seed_curves(lambda s: run_policy_evaluation(env, "td-lambda", 0.3, 10, s, lam=0.0), seeds)
    identical = np.array_equal(ptd1, td0)
    with np.errstate(invalid="ignore"):
        td_big = seed_curves(lambda s: run_policy_evaluation(env, "td-lambda", 1.5, 10, s, lam=0.9), seeds)
        ptd_big = seed_curves(lambda s: run_policy_evaluation(env, "ptd", 1.5, 10, s, beta=0.1), seeds)
    td_final = float(np.mean(td_big[:, -1]))
    ptd_peak = float(np.max(np.mean(ptd_big, axis=0)))
    td_bad = not np.isfinite(td_final) or td_final > initial
    ptd_good = ptd_peak < 1.1 * initial
    elapsed = time.perf_counter() - t0
    ok = identical and td_bad and ptd_good and elapsed < 60
    report(7, ok, f"bit-identical={identical}; initial RMSE {initial:.4f}; TD(0.9)@1.5 final {td_final:.4g}; "
                  f"PTD(0.1)@1.5 worst mean {ptd_peak:.4f} (< {1.1 * initial:.4f}); {elapsed:.1f}s")
    assert ok


def best_final(env, algo, alphas, episodes, seeds):
    finals = [np.mean([run_policy_evaluation(env, algo, a, episodes, s)[-1] for s in seeds]) for a in alphas]
    i = int(np.argmin(finals))
    return finals[i], alphas[i]


def test_criterion_08_corridor_ordering():
    t0 = time.perf_counter()
    seeds = range(25)
    rows, ordered, td_series = [], True, []
    for L in (5, 15, 25):
        env = make_corridor_task(1, L)
        ptd, a_p = best_final(env, "ptd", (0.1, 0.03, 0.01), 100, seeds)
        td, a_t = best_final(env, "td-lambda", (0.01, 0.003, 0.001), 100, seeds)
        ordered &= ptd < td
        td_series.append(td)
        rows.append(f"L={L}: PTD {ptd:.4f}@{a_p} TD {td:.4f}@{a_t}")
    monotone = all(a <= b for a, b in zip(td_series, td_series[1:]))
    elapsed = time.perf_counter() - t0
    ok = ordered and monotone and elapsed < 300
    report(8, ok, f"{'; '.join(rows)}; PTD<TD={ordered}; TD non-decreasing={monotone}; {elapsed:.1f}s")
    assert ok


SEMILINEAR_ALPHAS = {"ptd": (3e-3, 1e-2, 3e-2), "td-lambda": (3e-3, 1e-2, 3e-2),
                     "etd-variable": (3e-4, 1e-3, 3e-3)}
FORWARD_ALPHAS = {"ptd": (1e-3, 2e-3, 5e-3), "td-lambda": (2e-3, 5e-3, 1e-2),
                  "etd-variable": (5e-5, 1e-4, 3e-4)}


def best_auc(curve_fn, alphas, seeds):
    aucs = []
    for a in alphas:
        with np.errstate(over="ignore", invalid="ignore"):
            curves = np.array([curve_fn(a, s) for s in seeds])
        aucs.append(float(np.mean(curves)) if np.all(np.isfinite(curves)) else np.inf)
    return min(aucs)


def test_criterion_09_grid_ordering():
    t0 = time.perf_counter()
    seeds = range(5)
    envs = {(task, s): make_grid_task(task, 8, seed=s) for task in (1, 2) for s in seeds}
    settings = {
        "semilinear": (SEMILINEAR_ALPHAS, 100,
                       lambda env, algo, a, s: semilinear_curve(env, algo, a, 100, s)),
        "forward": (FORWARD_ALPHAS, 250,
                    lambda env, algo, a, s: nonlinear_curve(env, algo, a, 250, s, view="forward", hidden=4)),
    }
    parts, ok = [], True
    for name, (alphas, _, fn) in settings.items():
        for task in (1, 2):
            auc = {algo: best_auc(lambda a, s: fn(envs[task, s], algo, a, s), alphas[algo], seeds)
                   for algo in ("ptd", "td-lambda", "etd-variable")}
            good = auc["ptd"] < auc["td-lambda"] and auc["ptd"] <= 1.2 * auc["etd-variable"]
            ok &= good
            parts.append(f"{name}/grid{task}: PTD {auc['ptd']:.3f} TD {auc['td-lambda']:.3f} "
                         f"ETD {auc['etd-variable']:.3f} {'ok' if good else 'VIOLATED'}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 600
    report(9, ok, f"{'; '.join(parts)}; {elapsed:.1f}s")
    assert ok


def test_criterion_10_gradient_checks():
    t0 = time.perf_counter()
    errors = []
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        net = Mlp(6, 8, 2, seed=seed)
        x = rng.normal(size=6)
        while np.min(np.abs(net.W1 @ x + net.b1)) <= 1e-3:
            x = rng.normal(size=6)
        up = rng.normal(size=2)
        _, cache = mlp_forward(net, x)
        a = mlp_backward(net, cache, up)
        n = numerical_gradient(net, x, up, eps=1e-5)
        errors.append(float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)))
    elapsed = time.perf_counter() - t0
    ok = max(errors) < 1e-4 and elapsed < 5
    report(10, ok, f"relative errors {', '.join(f'{e:.1e}' for e in errors)}; {elapsed:.2f}s")
    assert ok


def test_criterion_11_cartpole():
    t0 = time.perf_counter()
    seeds = range(5)
    critic_lr = {"ptd": 1e-5, "td-lambda": 1e-4}
    summary = {}
    for algo in ("ptd", "td-lambda"):
        best = None
        for actor_lr in (0.005, 0.01, 0.05):
            runs = [actor_critic_curve(algo, 500, s, critic_lr[algo], actor_lr=actor_lr) for s in seeds]
            returns = np.array([r for r, _ in runs])
            percent = np.array([p for _, p in runs])
            score = float(np.mean(returns))
            if best is None or score > best[0]:
                best = (score, actor_lr, returns, percent)
        summary[algo] = best
    _, a_p, ret, pct = summary["ptd"]
    first, last = float(np.mean(ret[:, :50])), float(np.mean(ret[:, -50:]))
    finite_pct = pct[np.isfinite(pct)]
    bounded = finite_pct.size > 0 and bool(np.all((finite_pct >= 0) & (finite_pct <= 100)))
    td_last = float(np.mean(summary["td-lambda"][2][:, -50:]))
    progress = last > first
    on_par = last >= 0.8 * td_last
    elapsed = time.perf_counter() - t0
    ok = progress and bounded and on_par and elapsed < 600
    report(11, ok, f"PTD actor lr {a_p}: first-50 {first:.1f} -> last-50 {last:.1f} (progress={progress}); "
                   f"beta=1 % in [{finite_pct.min():.1f}, {finite_pct.max():.1f}] bounded={bounded}; "
                   f"TD(lambda) last-50 {td_last:.1f} @ actor lr {summary['td-lambda'][1]}; "
                   f"within 20%={on_par}; {elapsed:.1f}s")
    assert ok


def test_criterion_12_determinism(tmp_path):
    t0 = time.perf_counter()
    sweep = tmp_path / "sweep.txt"
    sweep.write_text("env = random-walk\nalgo = ptd, td-lambda\nalpha = 0.1, 1.5\nseeds = 3\n")
    mdp = tmp_path / "two.mdp"
    mdp.write_text("mdp 2 1 0.99\nT 0 0 0 0.5\nT 0 0 1 0.5\nT 1 0 0 0.5\nT 1 0 1 0.5\n"
                   "PHI 0 0.5\nPHI 1 1\nBETA 0 0.01\nBETA 1 0.2\n")
    invocations = {
        "run": ["run", "--env", "random-walk", "--algo", "ptd", "--beta", "0.5", "--alpha", "0.3",
                "--episodes", "10", "--seeds", "25"],
        "corridor": ["run", "--env", "corridor2", "--len", "10", "--algo", "etd-variable", "--alpha", "0.01",
                     "--seeds", "3"],
        "grid": ["run", "--env", "grid2", "--algo", "ptd", "--alpha", "0.01", "--setting", "semilinear",
                 "--episodes", "3", "--seeds", "2"],
        "cartpole": ["run", "--env", "cartpole", "--algo", "ptd", "--alpha", "1e-5", "--episodes", "5"],
        "sweep": ["sweep", str(sweep)],
        "keymatrix": ["analyze", "keymatrix", "--mdp", str(mdp), "--csv"],
        "counterexamples": ["analyze", "counterexamples", "--csv"],
    }
    same = {}
    for name, args in invocations.items():
        outs = []
        for rep in range(2):
            path = tmp_path / f"{name}{rep}.csv"
            main(args + ([str(path)] if args[-1] == "--csv" else ["--out", str(path)]))
            outs.append(path.read_bytes())
        same[name] = outs[0] == outs[1] and len(outs[0]) > 0
    elapsed = time.perf_counter() - t0
    ok = all(same.values())
    report(12, ok, f"byte-identical CSV: {', '.join(f'{k}={v}' for k, v in same.items())}; {elapsed:.1f}s")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
