"""Exit criteria, one test each. Run with ``pytest tests/test_acceptance.py -s``
to see the pass/fail lines inline; they are also listed in the terminal
summary."""

import time

import numpy as np

from brute import grid_maximize
from casched import Policy, run_simulation
from casched.channel import Carrier, ChannelModel, GainMode, coverage_radius
from casched.errors import EmptyScenarioError
from casched.grouping import UserEquipment, build_groups
from casched.oracle import StageProblem, gradient, kkt_residual, solve_stage_optimum, user_rates
from casched.scenario import Scenario
from casched.utility import make_logarithmic, make_sigmoidal
from conftest import record_criterion

N_FRAMES = 10_000


def decrease_constant(stage):
    """Smallest b with L[n+1] >= L[n] - b/n^2 over all finite consecutive pairs."""
    L, n = stage.trajectory, stage.n.astype(float)
    ok = np.isfinite(L[:-1]) & np.isfinite(L[1:])
    return float(np.max((L[:-1][ok] - L[1:][ok]) * n[:-1][ok] ** 2))


def L_at(stage, n):
    return float(stage.trajectory[np.searchsorted(stage.n, n)])


def random_utility(rng):
    if rng.random() < 0.5:
        return make_sigmoidal(rng.uniform(0.5, 3), rng.uniform(1, 5))
    return make_logarithmic(rng.uniform(0.5, 10), 50)


def random_problem(rng, max_users, max_rbs):
    m, j = int(rng.integers(1, max_users + 1)), int(rng.integers(1, max_rbs + 1))
    return StageProblem(rng.uniform(0.5, 3, (m, j)), [random_utility(rng) for _ in range(m)],
                        rng.uniform(0.5, 2, m))


def test_criterion_1_simplex_invariant(scenario, compare_results):
    t0 = time.perf_counter()
    res = run_simulation(scenario, Policy.UPF, N_FRAMES)
    elapsed = time.perf_counter() - t0
    worst = max(s.max_simplex_error for r in [res, *compare_results.values()] for s in r.stages)
    frames = {len(s.trajectory) for s in res.stages}
    passed = worst <= 1e-9 and elapsed < 10.0 and frames == {N_FRAMES}
    record_criterion("1 simplex invariant", passed,
                     f"max |column sum - 1| over every frame = {worst:.2e} (<= 1e-9), "
                     f"run time {elapsed:.2f} s (< 10 s)")
    assert passed


def test_criterion_2_convergence(upf_result):
    details, passed = [], True
    for s in upf_result.stages:
        b = decrease_constant(s)
        drift = abs(L_at(s, N_FRAMES) - L_at(s, N_FRAMES // 2))
        ok = b <= 100 and drift <= 1e-2
        passed &= ok
        details.append(f"carrier {s.carrier_id}: b = {b:.1f} (<= 100), "
                       f"|L[1e4] - L[5e3]| = {drift:.2e} (<= 1e-2)")
    record_criterion("2 convergence of the online objective", passed, "; ".join(details))
    assert passed


def test_criterion_3_optimality(upf_result):
    gaps = {s.carrier_id: s.oracle_gap for s in upf_result.stages}
    oracle_res = max(s.oracle_residual for s in upf_result.stages)
    online_ok = all(g <= 1e-2 for g in gaps.values()) and oracle_res <= 1e-8

    rng = np.random.default_rng(2024)
    worst = 0.0
    below = True
    for _ in range(25):
        p = random_problem(rng, 3, 2)
        sol = solve_stage_optimum(p, tol=1e-8)
        L_grid, _ = grid_maximize(p.rate_table, p.carried, [u.log_value for u in p.utilities])
        worst = max(worst, abs(sol.value - L_grid))
        below &= L_grid <= sol.value + 1e-9
    passed = online_ok and worst <= 1e-4 and below
    record_criterion("3 online shares reach the stage optimum", passed,
                     "online vs oracle gap " + ", ".join(f"carrier {k}: {g:.2e}" for k, g in gaps.items())
                     + f" (<= 1e-2); grid vs oracle worst {worst:.2e} on 25 instances (<= 1e-4)")
    assert passed


def test_criterion_4_kkt_certificate():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(200):
        p = random_problem(rng, 4, 4)
        sol = solve_stage_optimum(p, tol=1e-8)
        worst = max(worst, kkt_residual(sol.phi, p))
    passed = worst <= 1e-6
    record_criterion("4 KKT certificate", passed, f"worst residual {worst:.2e} on 200 instances (<= 1e-6)")
    assert passed


def test_criterion_5_policy_ordering(compare_results):
    tot = {p: r.total_log_utility for p, r in compare_results.items()}
    passed = tot[Policy.UPF] > tot[Policy.PF_WEIGHTED] > tot[Policy.PF]
    record_criterion("5 policy ordering", passed,
                     ", ".join(f"{p.value}: {v:.4f}" for p, v in tot.items()) + " (sum ln U_i(r_i))")
    assert passed


def random_covered_scenario(rng):
    model = ChannelModel(noise_power_per_rb=1e-14, equal_gain=1e-12,
                         gain_mode=GainMode.EQUAL if rng.random() < 0.5 else GainMode.PATHLOSS)
    freqs = sorted(rng.uniform(7e8, 4e9, int(rng.integers(1, 4))), reverse=True)
    carriers = [Carrier(k + 1, float(f), float(rng.uniform(5, 40)), int(rng.integers(1, 12)))
                for k, f in enumerate(freqs)]
    threshold = 130.0
    r_max = coverage_radius(min(freqs), threshold, model)
    users = [UserEquipment(i + 1, float(rng.uniform(5, 0.99 * r_max)),
                           make_sigmoidal(rng.uniform(0.5, 5), rng.uniform(1, 30)) if rng.random() < 0.5
                           else make_logarithmic(rng.uniform(0.5, 15), 100),
                           float(rng.choice([1.0, 2.0])))
             for i in range(int(rng.integers(1, 9)))]
    return Scenario(carriers=carriers, users=users, channel=model, loss_threshold=threshold,
                    n_frames=200, rate_unit=1e6)


def test_criterion_6_nonzero_allocation():
    rng = np.random.default_rng(66)
    worst = np.inf
    for _ in range(100):
        res = run_simulation(random_covered_scenario(rng), Policy.UPF, certify=False)
        assert not res.warnings
        worst = min(worst, res.min_rate)
    passed = worst > 0
    record_criterion("6 non-zero allocation", passed, f"smallest aggregate rate over 100 scenarios = {worst:.3e}")
    assert passed


def test_criterion_7_grouping(scenario):
    g = build_groups(scenario.users, scenario.carriers, scenario.channel, scenario.loss_threshold)
    exact = g.groups == {1: [1, 2, 3, 4], 2: list(range(1, 9))}
    rng = np.random.default_rng(77)
    model = ChannelModel()
    nested = 0
    for _ in range(500):
        carriers = [Carrier(k + 1, float(f), 10.0, 5) for k, f in enumerate(rng.uniform(4e8, 6e9, rng.integers(1, 6)))]
        users = [UserEquipment(i + 1, float(d), make_logarithmic(1, 10))
                 for i, d in enumerate(rng.uniform(1, 3000, rng.integers(1, 13)))]
        try:
            ga = build_groups(users, carriers, model, float(rng.uniform(100, 160)))
        except EmptyScenarioError:
            nested += 1
            continue
        nested += ga.is_nested() and ga.is_consistent()
    passed = exact and nested == 500
    record_criterion("7 grouping", passed, f"groups {g.groups}; nested in {nested}/500 random scenarios")
    assert passed


def test_criterion_8_numerics():
    rng = np.random.default_rng(88)
    utilities = [make_sigmoidal(5, 10), make_sigmoidal(1, 30), make_logarithmic(15, 100), make_logarithmic(0.5, 100)]
    utilities += [make_sigmoidal(rng.uniform(0.1, 10), rng.uniform(1, 100)) for _ in range(6)]
    utilities += [make_logarithmic(rng.uniform(0.1, 20), rng.uniform(10, 200)) for _ in range(6)]
    slope_err = 0.0
    for u in utilities:
        # sigmoid: up to 4/a past the inflection; log: below r_max
        hi = u.b + 4 / u.a if u.kind.value == "sigmoidal" else 0.999 * u.r_max
        for r in rng.uniform(1e-3, hi, 100):
            h = 1e-6 * max(1.0, r)
            fd = (u.value(r + h) - u.value(r - h)) / (2 * h)
            slope_err = max(slope_err, abs(u.slope(r) - fd) / abs(fd))

    grad_err = 0.0
    for _ in range(50):
        p = random_problem(rng, 4, 4)
        phi = rng.dirichlet(np.ones(p.n_users), size=p.n_rbs).T
        g = gradient(phi, p)
        for i in range(p.n_users):
            for j in range(p.n_rbs):
                e = np.zeros_like(phi)
                e[i, j] = 1e-6
                fd = (np.sum(p.group.log_value(user_rates(phi + e, p)))
                      - np.sum(p.group.log_value(user_rates(phi - e, p)))) / 2e-6
                grad_err = max(grad_err, abs(g[i, j] - fd) / max(abs(fd), 1e-12))

    violations = 0
    for family in ("sigmoidal", "logarithmic"):
        for _ in range(1000):
            if family == "sigmoidal":
                u = make_sigmoidal(rng.uniform(0.1, 10), rng.uniform(1, 100))
            else:
                u = make_logarithmic(rng.uniform(0.1, 20), rng.uniform(1, 200))
            r1, r2 = np.sort(rng.uniform(1e-3, 200, 2))
            mid = u.log_value(0.5 * (r1 + r2))
            violations += mid < 0.5 * (u.log_value(r1) + u.log_value(r2)) - 1e-9

    passed = slope_err <= 1e-6 and grad_err <= 1e-5 and violations == 0
    record_criterion("8 numerics", passed,
                     f"slope vs FD max rel err {slope_err:.1e} (<= 1e-6); gradient vs FD {grad_err:.1e} (<= 1e-5); "
                     f"ln U midpoint-concavity violations {violations}/2000")
    assert passed
