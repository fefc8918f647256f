"""Direct solution of one carrier stage, used to certify the online scheduler.

A stage problem is: choose a column-stochastic share matrix ``phi`` (users x
RBs) maximizing

    L(phi) = sum_i log U_i(carried_i + sum_j phi_ij H_ij)

This is concave in ``phi``. The solver here is plain projected gradient
ascent over the product of per-RB simplices, started from the uniform
interior point. Steps follow the Barzilai-Borwein rule and are accepted by a
non-monotone Armijo backtracking test, which copes with the very uneven
curvature of log U near zero rate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractViolation, ConvergenceError
from .utility import Utility, UtilityGroup

log = logging.getLogger(__name__)

ACTIVE_THRESHOLD = 1e-6
SIMPLEX_TOL = 1e-9


@dataclass
class StageProblem:
    rate_table: np.ndarray
    utilities: Sequence[Utility]
    carried: np.ndarray = None

    def __post_init__(self):
        self.rate_table = np.atleast_2d(np.asarray(self.rate_table, dtype=float))
        n_users = self.rate_table.shape[0]
        if n_users < 1:
            raise ContractViolation("stage problem needs at least one user")
        if len(self.utilities) != n_users:
            raise ContractViolation(f"{len(self.utilities)} utilities for {n_users} users")
        if np.any(self.rate_table < 0):
            raise ContractViolation("rate table must be nonnegative")
        if self.carried is None:
            self.carried = np.zeros(n_users)
        self.carried = np.asarray(self.carried, dtype=float).reshape(n_users)
        if np.any(self.carried < 0):
            raise ContractViolation("carried rates must be nonnegative")
        self.group = UtilityGroup(self.utilities)

    @property
    def n_users(self) -> int:
        return self.rate_table.shape[0]

    @property
    def n_rbs(self) -> int:
        return self.rate_table.shape[1]


def check_column_stochastic(phi, tol=SIMPLEX_TOL):
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -tol):
        raise ContractViolation(f"negative share {phi.min():.3e}")
    err = np.abs(phi.sum(axis=0) - 1.0)
    if np.any(err > tol):
        raise ContractViolation(f"share columns must sum to 1 (worst deviation {err.max():.3e})")
    return phi


def user_rates(phi, problem: StageProblem) -> np.ndarray:
    """carried_i + sum_j phi_ij H_ij."""
    return problem.carried + np.einsum("ij,ij->i", phi, problem.rate_table)


def objective_L(phi, problem: StageProblem) -> float:
    phi = check_column_stochastic(phi)
    return float(np.sum(problem.group.log_value(user_rates(phi, problem))))


def gradient(phi, problem: StageProblem) -> np.ndarray:
    """dL/dphi_ij = U_i'(x_i) H_ij / U_i(x_i). Entries with H_ij = 0 are 0."""
    ratio = problem.group.slope_ratio(user_rates(phi, problem))
    H = problem.rate_table
    with np.errstate(invalid="ignore"):
        g = ratio[:, None] * H
    return np.where(H > 0, g, 0.0)


def kkt_residual(phi, problem: StageProblem, active_threshold=ACTIVE_THRESHOLD) -> float:
    """Largest gap between an active user's metric and the best metric on its RB.

    Zero exactly when every user holding a share above ``active_threshold``
    on an RB attains that RB's maximal marginal log-utility.
    """
    phi = check_column_stochastic(phi)
    g = gradient(phi, problem)
    best = g.max(axis=0, keepdims=True)
    with np.errstate(invalid="ignore"):
        gap = np.where(np.isinf(best) & np.isinf(g), 0.0, best - g)
    active = phi > active_threshold
    if not np.any(active):
        return 0.0
    return float(np.max(np.where(active, gap, 0.0)))


def project_simplex_columns(Y) -> np.ndarray:
    """Euclidean projection of every column of ``Y`` onto the unit simplex.

    Sort-based method: for sorted ``u``, find the largest ``rho`` with
    ``u_rho > (sum_{k<=rho} u_k - 1) / rho`` and shift by that threshold.
    """
    Y = np.asarray(Y, dtype=float)
    m, n = Y.shape
    U = -np.sort(-Y, axis=0)
    css = np.cumsum(U, axis=0) - 1.0
    ks = np.arange(1, m + 1)[:, None]
    cond = U - css / ks > 0
    rho = m - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(n)] / (rho + 1)
    return np.maximum(Y - theta, 0.0)


@dataclass
class StageSolution:
    phi: np.ndarray
    value: float
    residual: float
    iterations: int
    excluded: list[int] = field(default_factory=list)


def _infeasible_rows(problem: StageProblem) -> list[int]:
    return [i for i in range(problem.n_users)
            if problem.carried[i] == 0 and not np.any(problem.rate_table[i] > 0)]


def solve_stage_optimum(problem: StageProblem, tol: float = 1e-8, max_iter: int = 200_000,
                        armijo: float = 1e-4, memory: int = 10) -> StageSolution:
    """Maximize the stage log-utility by projected gradient ascent.

    Users that can never get positive utility (no positive rate on any RB and
    nothing carried) are dropped from the problem and listed in ``excluded``;
    their rows of ``phi`` are zero.

    Raises
    ------
    ConvergenceError
        If the KKT residual is still above ``tol`` after ``max_iter``
        iterations. The error carries the best iterate.
    """
    excluded = _infeasible_rows(problem)
    keep = [i for i in range(problem.n_users) if i not in excluded]
    if excluded:
        log.warning("users at rows %s cannot reach positive utility; excluded", excluded)
    if not keep:
        raise ConvergenceError("no user in the stage can reach positive utility")
    sub = StageProblem(problem.rate_table[keep], [problem.utilities[i] for i in keep],
                       problem.carried[keep])

    def embed(p):
        full = np.zeros((problem.n_users, problem.n_rbs))
        full[keep] = p
        return full

    phi = np.full((sub.n_users, sub.n_rbs), 1.0 / sub.n_users)
    L = objective_L(phi, sub)
    g = gradient(phi, sub)
    step = 1.0 / max(np.abs(g).max(), 1e-300)
    res = kkt_residual(phi, sub)
    history = [L]
    for it in range(max_iter):
        if res <= tol:
            return StageSolution(embed(phi), L, res, it, excluded)
        # non-monotone reference: best of the recent objective values
        ref = min(history[-memory:])
        trial = step
        while True:
            cand = project_simplex_columns(phi + trial * g)
            d = cand - phi
            ascent = float(np.sum(g * d))
            L_cand = float(np.sum(sub.group.log_value(user_rates(cand, sub))))
            if L_cand >= ref + armijo * ascent:
                break
            if np.isfinite(L_cand) and abs(L_cand - L) <= 1e-12 * max(1.0, abs(L)):
                # Improvement is below the resolution of L itself; judge the
                # step by the directional derivative at the candidate instead.
                # Along the segment phi -> cand the objective is concave, so a
                # nonnegative slope at cand means it never went downhill.
                if float(np.sum(gradient(cand, sub) * d)) >= 0:
                    break
            trial *= 0.5
            if trial < 1e-300:
                raise ConvergenceError("line search failed", embed(phi), L, res)
        g_new = gradient(cand, sub)
        s_dot_y = float(np.sum(d * (g_new - g)))
        # Barzilai-Borwein step; s.y < 0 for a concave objective
        step = float(np.sum(d * d)) / -s_dot_y if s_dot_y < 0 else trial * 2.0
        step = min(max(step, 1e-12), 1e12)
        phi, L, g = cand, L_cand, g_new
        history.append(L)
        res = kkt_residual(phi, sub)
    raise ConvergenceError(f"KKT residual {res:.3e} > {tol:.1e} after {max_iter} iterations",
                           embed(phi), L, res)
