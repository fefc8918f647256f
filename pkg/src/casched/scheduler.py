"""Online frame-by-frame RB scheduling with carrier aggregation.

Each carrier is a stage. Stages run from the smallest coverage area to the
largest; a user's rate from earlier stages is carried into the utility
argument of later ones. Within a stage, every frame each RB goes to the user
with the largest metric, and the long-run shares are updated as

    phi[n+1] = (n-1)/n * phi[n] + 1/n * [user scheduled on the RB]

The utility-proportional-fair (UPF) metric is ``U'(c + r) H / U(c + r)``; the
traditional PF baseline uses ``w H / r`` on the stage rate alone.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from . import oracle
from .channel import coverage_radius, rate_table
from .errors import ContractViolation, EmptyScenarioError
from .grouping import CoverageWarning, GroupAssignment, UserEquipment, build_groups
from .utility import Utility, UtilityGroup

if TYPE_CHECKING:
    from .scenario import Scenario

log = logging.getLogger(__name__)


class Policy(enum.Enum):
    UPF = "upf"
    PF = "pf"
    PF_WEIGHTED = "pf-weighted"

    @property
    def label(self) -> str:
        return {"upf": "UPF", "pf": "PF (equal weights)", "pf-weighted": "PF (weighted)"}[self.value]


def upf_metric(u: Utility, carried: float, stage_rate: float, h: float) -> float:
    if h == 0:
        return 0.0
    x = carried + stage_rate
    if u.value(x) == 0:
        return math.inf
    return u.slope(x) * h / u.value(x)


def pf_metric(weight: float, h: float, avg_rate: float) -> float:
    if h == 0:
        return 0.0
    if avg_rate == 0:
        return math.inf
    return weight * h / avg_rate


@dataclass
class ScheduleState:
    carrier_id: int
    user_ids: tuple
    utilities: UtilityGroup
    rate_table: np.ndarray
    carried: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    frame_index: int = 1
    stage_rate: np.ndarray = None

    def __post_init__(self):
        if self.stage_rate is None:
            self.stage_rate = np.einsum("ij,ij->i", self.phi, self.rate_table)

    @classmethod
    def initial(cls, carrier_id: int, users: Sequence[UserEquipment], rates: np.ndarray,
                carried=None) -> "ScheduleState":
        users = list(users)
        rates = np.asarray(rates, dtype=float)
        if rates.shape[0] != len(users):
            raise ContractViolation(f"rate table has {rates.shape[0]} rows for {len(users)} users")
        carried = np.zeros(len(users)) if carried is None else np.asarray(carried, dtype=float)
        if np.any(carried < 0):
            raise ContractViolation("carried rates must be >= 0")
        return cls(
            carrier_id=carrier_id,
            user_ids=tuple(u.id for u in users),
            utilities=UtilityGroup([u.utility for u in users]),
            rate_table=rates,
            carried=carried,
            weights=np.array([u.pf_weight for u in users], dtype=float),
            phi=np.zeros_like(rates),
        )

    @property
    def n_users(self) -> int:
        return self.rate_table.shape[0]

    @property
    def n_rbs(self) -> int:
        return self.rate_table.shape[1]

    def objective(self) -> float:
        """L(phi[n]) = sum_i ln U_i(c_i + r_i)."""
        return float(np.sum(self.utilities.log_value(self.carried + self.stage_rate)))

    def problem(self) -> oracle.StageProblem:
        return oracle.StageProblem(self.rate_table, self.utilities.utilities, self.carried)


def _metrics(state: ScheduleState, policy: Policy):
    """Metric matrix plus the secondary key used among +inf entries."""
    H = state.rate_table
    if policy is Policy.UPF:
        x = state.carried + state.stage_rate
        ratio = state.utilities.slope_ratio(x)[:, None]
        secondary = state.utilities.slope(x)[:, None] * H
    else:
        w = state.weights if policy is Policy.PF_WEIGHTED else np.ones(state.n_users)
        with np.errstate(divide="ignore"):
            ratio = (w / state.stage_rate)[:, None]
        secondary = w[:, None] * H
    with np.errstate(invalid="ignore"):
        metric = np.where(H > 0, ratio * H, 0.0)
    return metric, secondary


def assign_frame(state: ScheduleState, policy: Policy) -> np.ndarray:
    """Row index of the user scheduled on each RB in the next frame.

    All RBs use the shares at the start of the frame. Users whose metric is
    +inf (zero utility, or zero PF average) take precedence; among those the
    largest ``U' H`` (``w H`` for PF) wins. Remaining ties go to the lowest
    user id.
    """
    metric, secondary = _metrics(state, policy)
    inf = np.isinf(metric)
    key = np.where(inf.any(axis=0, keepdims=True), np.where(inf, secondary, -np.inf), metric)
    # rows are sorted by user id, argmax returns the first maximum
    return np.argmax(key, axis=0)


def _as_assignment(state: ScheduleState, assignment) -> np.ndarray:
    if isinstance(assignment, Mapping):
        if sorted(assignment) != list(range(state.n_rbs)):
            raise ContractViolation(f"assignment must cover RBs 0..{state.n_rbs - 1} exactly once")
        assignment = [assignment[j] for j in range(state.n_rbs)]
    a = np.asarray(assignment)
    if a.shape != (state.n_rbs,) or not np.issubdtype(a.dtype, np.integer):
        raise ContractViolation(f"assignment must give one user row per RB ({state.n_rbs}), got {assignment!r}")
    if np.any(a < 0) or np.any(a >= state.n_users):
        raise ContractViolation("assignment refers to a user outside the group")
    return a


def update_shares(state: ScheduleState, assignment) -> ScheduleState:
    a = _as_assignment(state, assignment)
    n = state.frame_index
    phi = state.phi * ((n - 1) / n)
    phi[a, np.arange(state.n_rbs)] += 1.0 / n
    return replace(state, phi=phi, frame_index=n + 1,
                   stage_rate=np.einsum("ij,ij->i", phi, state.rate_table))


@dataclass
class StageResult:
    carrier_id: int
    user_ids: tuple
    carried: np.ndarray
    stage_rate: np.ndarray
    n: np.ndarray
    trajectory: np.ndarray
    state: ScheduleState
    max_simplex_error: float
    kkt_residual: float = math.nan
    oracle_value: float = math.nan
    oracle_residual: float = math.nan

    @property
    def final_objective(self) -> float:
        return float(self.trajectory[-1]) if len(self.trajectory) else math.nan

    @property
    def phi(self) -> np.ndarray:
        return self.state.phi

    @property
    def oracle_gap(self) -> float:
        return abs(self.final_objective - self.oracle_value)


def run_carrier_stage(carrier_id: int, rates: np.ndarray, users: Sequence[UserEquipment],
                      carried, n_frames: int, policy: Policy = Policy.UPF,
                      early_stop_tol: float | None = None, check_every: int = 100) -> StageResult:
    """Run ``n_frames`` frames of online scheduling on one carrier.

    ``trajectory[t]`` is L(phi[n[t]]) after frame ``t + 1`` (so ``n`` runs
    from 2 to ``n_frames + 1``). With ``early_stop_tol`` set, the loop stops
    once the KKT residual of the current shares drops below it (checked every
    ``check_every`` frames).
    """
    if n_frames < 1:
        raise ContractViolation(f"n_frames must be >= 1, got {n_frames}")
    users = sorted(users, key=lambda u: u.id)
    if not users:
        empty = ScheduleState.initial(carrier_id, [], np.zeros((0, np.shape(rates)[-1])))
        return StageResult(carrier_id, (), np.zeros(0), np.zeros(0), np.zeros(0, dtype=int),
                           np.zeros(0), empty, 0.0)
    state = ScheduleState.initial(carrier_id, users, rates, carried)
    traj = np.empty(n_frames)
    worst = 0.0
    problem = state.problem() if early_stop_tol is not None else None
    done = n_frames
    for t in range(n_frames):
        state = update_shares(state, assign_frame(state, policy))
        worst = max(worst, float(np.max(np.abs(state.phi.sum(axis=0) - 1.0))), float(-state.phi.min()))
        traj[t] = state.objective()
        if problem is not None and (t + 1) % check_every == 0:
            if oracle.kkt_residual(state.phi, problem) < early_stop_tol:
                done = t + 1
                break
    traj = traj[:done]
    return StageResult(
        carrier_id=carrier_id,
        user_ids=state.user_ids,
        carried=state.carried,
        stage_rate=state.stage_rate,
        n=np.arange(2, done + 2),
        trajectory=traj,
        state=state,
        max_simplex_error=worst,
    )


@dataclass
class SimResult:
    policy: Policy
    stages: list[StageResult]
    aggregate_rate: dict[int, float]
    groups: GroupAssignment
    warnings: list[CoverageWarning] = field(default_factory=list)
    utilities: dict[int, Utility] = field(default_factory=dict)

    def stage(self, carrier_id: int) -> StageResult:
        for s in self.stages:
            if s.carrier_id == carrier_id:
                return s
        raise KeyError(carrier_id)

    @property
    def total_log_utility(self) -> float:
        """sum_i ln U_i(r_i) over every covered user."""
        return float(sum(self.utilities[u].log_value(r) for u, r in self.aggregate_rate.items()))

    @property
    def min_rate(self) -> float:
        return min(self.aggregate_rate.values())


def run_simulation(scenario: "Scenario", policy: Policy | None = None, n_frames: int | None = None,
                   certify: bool = True) -> SimResult:
    """Run every carrier stage of a scenario under one policy.

    With ``certify`` each stage is also solved directly by the oracle so the
    result carries the optimal stage objective and the online KKT residual.
    """
    policy = policy or scenario.policy
    if not isinstance(policy, Policy):
        raise ContractViolation(f"run_simulation needs a single policy, got {policy!r}")
    n_frames = n_frames or scenario.n_frames
    groups = build_groups(scenario.users, scenario.carriers, scenario.channel, scenario.loss_threshold)
    for w in groups.warnings:
        log.warning("user %d: %s", w.user_id, w.message)
    by_id = {u.id: u for u in scenario.users}
    carriers = {c.id: c for c in scenario.carriers}
    # smallest coverage radius first, ties by id
    order = sorted(
        groups.order,
        key=lambda k: (coverage_radius(carriers[k].freq, scenario.loss_threshold, scenario.channel), k),
    )
    accumulated = {u: 0.0 for u in groups.alpha}
    stages = []
    for k in order:
        members = [by_id[u] for u in groups.groups[k]]
        if not members:
            continue
        carried = np.array([accumulated[u.id] for u in members])
        H = rate_table(carriers[k], [u.distance for u in members], scenario.channel, scenario.rate_unit)
        res = run_carrier_stage(k, H, members, carried, n_frames, policy,
                                early_stop_tol=scenario.early_stop_tol)
        if certify:
            problem = res.state.problem()
            res.kkt_residual = oracle.kkt_residual(res.phi, problem)
            sol = oracle.solve_stage_optimum(problem, tol=scenario.kkt_tol)
            res.oracle_value = sol.value
            res.oracle_residual = sol.residual
        for uid, r in zip(res.user_ids, res.stage_rate):
            accumulated[uid] += float(r)
        stages.append(res)
    if not stages:
        raise EmptyScenarioError("no carrier has any user in coverage")
    return SimResult(
        policy=policy,
        stages=stages,
        aggregate_rate=accumulated,
        groups=groups,
        warnings=list(groups.warnings),
        utilities={u: by_id[u].utility for u in accumulated},
    )
