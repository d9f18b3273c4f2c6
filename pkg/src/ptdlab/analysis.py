"""Expected-update quantities of preferential TD and their audits.

All functions take dense state-space objects: ``P_pi`` (n x n), ``r_pi``
(n,), the stationary distribution ``d_pi`` (n,), the feature matrix
``phi`` (n x k), and the preference either as a vector ``beta`` or as the
diagonal matrix ``B = diag(beta)`` (both are accepted everywhere).
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import linalg
from .exceptions import RankDeficientFeatures, SingularMatrix

REFERENCE_TOL = 0.01
REFERENCE_TOL_FINE = 5e-4


def _diag(B):
    B = np.asarray(B, dtype=float)
    return np.diag(B).copy() if B.ndim == 2 else B


def _resolvent_solve(P_pi, beta, gamma, rhs):
    """``(I - gamma P_pi (I - B))^{-1} rhs``."""
    n = P_pi.shape[0]
    M = np.eye(n) - gamma * P_pi * (1.0 - beta)[None, :]
    return linalg.solve_linear(M, rhs)


def p_beta(P_pi, B, gamma, verify_terms=None):
    """Transition matrix with bootstrap terminations absorbed.

    ``P_beta = gamma (I - gamma P_pi (I - B))^{-1} P_pi B``.  Rows sum to one
    when ``gamma == 1`` and to less than one otherwise.

    If ``verify_terms`` is given, the truncated Neumann series with that many
    terms is also formed and must agree within 1e-8 (only meaningful when
    the series has converged by then).
    """
    P_pi = np.asarray(P_pi, dtype=float)
    beta = _diag(B)
    if gamma == 1.0 and not np.any(beta > 0):
        raise SingularMatrix("beta == 0 everywhere with gamma == 1 makes the resolvent singular")
    P = _resolvent_solve(P_pi, beta, gamma, gamma * P_pi * beta[None, :])
    if verify_terms is not None:
        series = p_beta_series(P_pi, beta, gamma, verify_terms)
        gap = np.max(np.abs(series - P))
        if gap > 1e-8:
            raise ArithmeticError(f"Neumann series disagrees with closed form by {gap:.3e}")
    return P


def p_beta_series(P_pi, B, gamma, terms=100):
    """``gamma * sum_{k<terms} (gamma P_pi (I-B))^k P_pi B``."""
    P_pi = np.asarray(P_pi, dtype=float)
    beta = _diag(B)
    step = gamma * P_pi * (1.0 - beta)[None, :]
    term = gamma * P_pi * beta[None, :]
    total = np.zeros_like(term)
    for _ in range(terms):
        total += term
        term = step @ term
    return total


def apply_t_beta(v, P_pi, r_pi, B, gamma):
    """Expected forward-view target ``T^beta v``.

    ``B (I - gamma P_pi (I-B))^{-1} (r_pi + gamma P_pi B v) + (I - B) v``
    """
    v = np.asarray(v, dtype=float)
    beta = _diag(B)
    P_pi = np.asarray(P_pi, dtype=float)
    inner = _resolvent_solve(P_pi, beta, gamma, np.asarray(r_pi, dtype=float) + gamma * P_pi @ (beta * v))
    return beta * inner + (1.0 - beta) * v


def t_beta_series(v, P_pi, r_pi, B, gamma, terms=200):
    """``T^beta v`` by summing the expanded expectation term by term."""
    v = np.asarray(v, dtype=float)
    beta = _diag(B)
    P_pi = np.asarray(P_pi, dtype=float)
    step = gamma * P_pi * (1.0 - beta)[None, :]
    x = np.asarray(r_pi, dtype=float) + gamma * P_pi @ (beta * v)
    acc = np.zeros_like(x)
    for _ in range(terms):
        acc += x
        x = step @ x
    return beta * acc + (1.0 - beta) * v


@dataclass
class ExpectedModel:
    """Key matrix ``A``, vector ``b`` and the state-space pieces behind them."""

    A: np.ndarray
    b: np.ndarray
    P_beta: np.ndarray
    D: np.ndarray
    B: np.ndarray
    P_pi: np.ndarray = field(repr=False)
    r_pi: np.ndarray = field(repr=False)
    gamma: float = 0.0

    @property
    def beta(self):
        return np.diag(self.B).copy()

    @property
    def state_factor(self):
        """``D^pi B (I - P_beta)``: A equals ``phi^T @ state_factor @ phi``."""
        n = self.P_beta.shape[0]
        return self.D @ self.B @ (np.eye(n) - self.P_beta)


def check_features(phi):
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[1] > phi.shape[0] or linalg.cholesky(phi.T @ phi) is None:
        raise RankDeficientFeatures(f"feature matrix of shape {phi.shape} lacks full column rank")
    return phi


def expected_model(phi, P_pi, r_pi, d_pi, B, gamma) -> ExpectedModel:
    """Expected quantities ``A`` and ``b`` of the online PTD update.

    ``A = phi^T D B (I - P_beta) phi`` and
    ``b = phi^T D B (I - gamma P_pi (I - B))^{-1} r_pi``.
    """
    phi = check_features(phi)
    P_pi = np.asarray(P_pi, dtype=float)
    r_pi = np.asarray(r_pi, dtype=float)
    d_pi = np.asarray(d_pi, dtype=float)
    if not np.all(d_pi > 0):
        raise ValueError("d_pi must be strictly positive")
    beta = _diag(B)
    n = P_pi.shape[0]
    Pb = p_beta(P_pi, beta, gamma)
    DB = d_pi * beta
    A = phi.T @ (DB[:, None] * (np.eye(n) - Pb)) @ phi
    b = phi.T @ (DB * _resolvent_solve(P_pi, beta, gamma, r_pi))
    return ExpectedModel(A, b, Pb, np.diag(d_pi), np.diag(beta), P_pi, r_pi, float(gamma))


def td_lambda_key_matrix(phi, P_pi, d_pi, Lambda, gamma):
    """``phi^T D (I - gamma P_pi Lambda)^{-1} (I - gamma P_pi) phi`` (state-dependent lambda)."""
    phi = np.asarray(phi, dtype=float)
    P_pi = np.asarray(P_pi, dtype=float)
    lam = _diag(Lambda)
    n = P_pi.shape[0]
    # (I - gamma P Lambda)^{-1} == resolvent with beta = 1 - lambda
    right = _resolvent_solve(P_pi, 1.0 - lam, gamma, (np.eye(n) - gamma * P_pi) @ phi)
    return phi.T @ (np.asarray(d_pi, dtype=float)[:, None] * right)


def projection(phi, d_pi):
    """``Pi = phi (phi^T D phi)^{-1} phi^T D``."""
    phi = np.asarray(phi, dtype=float)
    d_pi = np.asarray(d_pi, dtype=float)
    G = phi.T @ (d_pi[:, None] * phi)
    return phi @ linalg.solve_linear(G, phi.T * d_pi[None, :])


def fixed_point(model: ExpectedModel, phi, d_pi):
    """Solve ``A w = b``; return ``(w_star, ||Pi (T^beta(phi w) - phi w)||_inf)``."""
    phi = np.asarray(phi, dtype=float)
    w = linalg.solve_linear(model.A, model.b)
    v = phi @ w
    resid = apply_t_beta(v, model.P_pi, model.r_pi, model.B, model.gamma) - v
    return w, float(np.max(np.abs(projection(phi, d_pi) @ resid)))


@dataclass
class LemmaAudit:
    row_sums_positive: bool
    diag_positive: bool
    col_sums_positive: bool
    pd: bool
    stationarity_identity_residual: float

    @property
    def all_pass(self):
        return (self.row_sums_positive and self.diag_positive and self.col_sums_positive
                and self.pd and self.stationarity_identity_residual <= 1e-9)


def stationarity_residual(P_pi, d_pi, B):
    """``||d_pi B P_beta - d_pi B||_inf`` with ``P_beta`` taken at ``gamma = 1``."""
    beta = _diag(B)
    dB = np.asarray(d_pi, dtype=float) * beta
    return float(np.max(np.abs(dB @ p_beta(P_pi, beta, 1.0) - dB)))


def lemma_audit(model: ExpectedModel, gamma=None) -> LemmaAudit:
    """Check the row-sum, column-sum and definiteness properties.

    Sums and the diagonal are inspected on the state-space factor
    ``D B (I - P_beta)``; definiteness on the k x k key matrix.  The
    stationarity identity is evaluated at ``gamma = 1`` regardless of the
    model's discount.
    """
    S = model.state_factor
    d_pi = np.diag(model.D)
    try:
        resid = stationarity_residual(model.P_pi, d_pi, model.B)
    except SingularMatrix:
        resid = float("inf")
    return LemmaAudit(
        row_sums_positive=bool(np.all(S.sum(axis=1) > 0)),
        diag_positive=bool(np.all(np.diag(S) > 0)),
        col_sums_positive=bool(np.all(S.sum(axis=0) > 0)),
        pd=linalg.is_positive_definite(model.A),
        stationarity_identity_residual=resid,
    )


def forward_backward_residual(model: ExpectedModel, phi, d_pi, w):
    """``||(b - A w) - phi^T D (T^beta(phi w) - phi w)||_inf``."""
    phi = np.asarray(phi, dtype=float)
    w = np.asarray(w, dtype=float)
    v = phi @ w
    backward = model.b - model.A @ w
    forward = phi.T @ (np.asarray(d_pi, dtype=float) * (apply_t_beta(v, model.P_pi, model.r_pi, model.B, model.gamma) - v))
    return float(np.max(np.abs(backward - forward)))


# ---------------------------------------------------------------------------
# the two published two-state counterexamples
# ---------------------------------------------------------------------------

@dataclass
class Comparison:
    example: str
    algo: str
    computed: np.ndarray
    expected: np.ndarray
    tol: float
    pd: bool
    expected_pd: bool

    @property
    def max_abs_error(self):
        return float(np.max(np.abs(self.computed - self.expected)))

    @property
    def values_match(self):
        return self.max_abs_error <= self.tol

    @property
    def passed(self):
        return self.values_match and self.pd == self.expected_pd


@dataclass
class CounterexampleReport:
    comparisons: List[Comparison]

    @property
    def passed(self):
        return all(c.passed for c in self.comparisons)

    def rows(self):
        """Flat records, one per matrix entry."""
        out = []
        for c in self.comparisons:
            for (i, j), val in np.ndenumerate(c.computed):
                exp = c.expected[i, j]
                out.append({
                    "example": c.example, "algo": c.algo, "entry": f"{i}{j}",
                    "computed": float(val), "expected": float(exp), "tol": c.tol,
                    "abs_error": float(abs(val - exp)), "entry_ok": bool(abs(val - exp) <= c.tol),
                    "pd": c.pd, "expected_pd": c.expected_pd, "passed": c.passed,
                })
        return out

    def render(self):
        lines = []
        for c in self.comparisons:
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.example}  {c.algo:<9}  PD={'yes' if c.pd else 'no':<3} "
                         f"(expected {'yes' if c.expected_pd else 'no'})  "
                         f"max|err|={c.max_abs_error:.2e} tol={c.tol:g}  {verdict}")
            for i in range(c.computed.shape[0]):
                comp = "  ".join(f"{x: .5f}" for x in c.computed[i])
                exp = "  ".join(f"{x: .4f}" for x in c.expected[i])
                flags = "  ".join("ok" if abs(x - y) <= c.tol else "MISMATCH"
                                  for x, y in zip(c.computed[i], c.expected[i]))
                lines.append(f"    [{comp}]   published [{exp}]   {flags}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def counterexample_setups():
    """The two-state chains, with beta = 1 - lambda for the PTD side."""
    return {
        "example1": dict(
            P_pi=np.array([[0.5, 0.5], [0.5, 0.5]]),
            phi=np.array([[0.5], [1.0]]),
            lam=np.array([0.99, 0.8]),
            d_pi=np.array([0.5, 0.5]),
            gamma=0.99,
            td_expected=np.array([[-0.0429]]), td_tol=REFERENCE_TOL_FINE,
            ptd_expected=np.array([[0.009]]), ptd_tol=1e-3,
        ),
        "example2": dict(
            P_pi=np.array([[0.0, 1.0], [1.0, 0.0]]),
            phi=np.array([[3.0, 1.0], [1.0, 1.0]]),
            lam=np.array([0.0, 0.99]),
            d_pi=np.array([0.5, 0.5]),
            gamma=0.95,
            td_expected=np.array([[-0.46, 0.15], [-0.77, 0.07]]), td_tol=REFERENCE_TOL,
            ptd_expected=np.array([[0.46, 0.15], [0.15, 0.05]]), ptd_tol=REFERENCE_TOL,
        ),
    }


def counterexample_report() -> CounterexampleReport:
    comparisons = []
    for name, s in counterexample_setups().items():
        A_td = td_lambda_key_matrix(s["phi"], s["P_pi"], s["d_pi"], s["lam"], s["gamma"])
        comparisons.append(Comparison(name, "td-lambda", A_td, s["td_expected"], s["td_tol"],
                                      linalg.is_positive_definite(A_td), False))
        model = expected_model(s["phi"], s["P_pi"], np.zeros(2), s["d_pi"], 1.0 - s["lam"], s["gamma"])
        comparisons.append(Comparison(name, "ptd", model.A, s["ptd_expected"], s["ptd_tol"],
                                      linalg.is_positive_definite(model.A), True))
    return CounterexampleReport(comparisons)
