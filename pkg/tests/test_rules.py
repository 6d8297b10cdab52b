import numpy as np
import pytest

from projreg.operators import CollocationScheme, DiracCombo, Kernel, model_rhs
from projreg.rules import (MonotoneIndexUndefined, RuleTrace, SolverFailure,
                           check_collocation_params, choose_n_apriori,
                           choose_n_discrepancy, choose_n_monotone_error,
                           me_index, tau_of_c)
from projreg.solvers import SolveResult, least_error_grid, solve_least_error
from projreg.spaces import SpaceSpec, lp_norm
from projreg.splines import Mesh

K1 = Kernel.volterra(1)


# ------------------------------------------------------------------ tau(c)

def tau_cubic_oracle(c):
    # independent construction: max of the cubic with z(0) = z(c) = 1,
    # z(1) = -1 and z'(0) = 2 / (c(1-c)(2c-1))
    a0 = 1.0
    a1 = 2.0 / (c * (1 - c) * (2 * c - 1))
    lhs = np.array([[c * c, c**3], [1.0, 1.0]])
    rhs = np.array([1 - a0 - a1 * c, -1 - a0 - a1])
    a2, a3 = np.linalg.solve(lhs, rhs)
    t = np.linspace(0, 1, 200001)
    return np.max(a0 + a1 * t + a2 * t * t + a3 * t**3)


@pytest.mark.parametrize("c,expected", [(0.6, 5.67), (0.7, 4.10), (0.8, 4.22)])
def test_tau_reference_values(c, expected):
    assert tau_of_c(c) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("c", [0.55, 0.6, 0.7, 0.8, 0.9, 0.95])
def test_tau_matches_cubic_construction(c):
    # the closed form equals the constrained-cubic maximum everywhere on
    # (0.5, 1); at c = 0.9 both give 6.306 (see the acceptance module for
    # the published reference value at that point)
    assert tau_of_c(c) == pytest.approx(tau_cubic_oracle(c), abs=1e-3)


def test_tau_domain_errors():
    for c in (0.5, 1.0, 0.2, 1.3):
        with pytest.raises(ValueError):
            tau_of_c(c)


def test_tau_above_one_and_divergent_at_ends():
    grid = np.linspace(0.51, 0.99, 49)
    vals = [tau_of_c(c) for c in grid]
    assert min(vals) >= 1.0
    assert tau_of_c(0.5001) > 100.0
    assert tau_of_c(0.9999) > 100.0


# ----------------------------------------------------------- admissibility

def test_admissibility_l1():
    rep = check_collocation_params((1.0,), 1)
    assert rep.admissible and rep.product == 0.0


def test_admissibility_l2():
    good = check_collocation_params((0.7, 1.0), 2)
    assert good.admissible and good.product == pytest.approx(3.0 / 7.0)
    bad = check_collocation_params((0.3, 1.0), 2)
    assert not bad.admissible and bad.product == pytest.approx(7.0 / 3.0)
    # c_k < 1 is inadmissible for l = 2 regardless of the product
    assert not check_collocation_params((0.7, 0.9), 2).admissible


def test_admissibility_open_for_higher_order():
    assert check_collocation_params((0.7, 1.0), 3).admissible is None


def test_admissibility_validation():
    with pytest.raises(ValueError):
        check_collocation_params((0.9, 0.7), 2)


# ----------------------------------------------------------------- a priori

def test_apriori_example():
    assert choose_n_apriori(1e-4, 2, 0.5) == 10


def test_apriori_monotone_in_delta():
    ns = [choose_n_apriori(d, 2, 0.5) for d in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert all(b >= a for a, b in zip(ns, ns[1:]))


def test_apriori_trivial_at_delta_one():
    assert choose_n_apriori(1.0, 1, 0.3) == 1
    assert choose_n_apriori(1.0, 3, 0.9) == 1


def test_apriori_limits():
    # n(delta) -> inf and n(delta)^l * delta -> 0 along delta = 10^-m
    deltas = 10.0 ** -np.arange(1, 13)
    ns = np.array([choose_n_apriori(d, 2, 0.5) for d in deltas])
    assert np.all(np.diff(ns) >= 0) and ns[-1] > ns[0]
    products = ns.astype(float) ** 2 * deltas
    assert products[-1] < products[0]
    with pytest.raises(ValueError):
        choose_n_apriori(0.0, 2, 0.5)
    with pytest.raises(ValueError):
        choose_n_apriori(1e-3, 2, 1.5)


# ------------------------------------------------------------- discrepancy

def fake_result(residual_c):
    return SolveResult(u=None, method="fake", residual_nodes=0.0,
                       iterations=1, converged=True, condition_estimate=1.0,
                       residual_C=residual_c)


def test_discrepancy_first_index_semantics():
    d_values = {1: 1.0, 2: 0.4, 3: 0.08, 4: 0.01, 5: 0.02}
    trace = choose_n_discrepancy(lambda n: fake_result(d_values[n]),
                                 delta=0.02, b=3.0, n_max=5)
    assert trace.chosen_n == 4
    # every earlier index failed the test, the chosen one passes
    for n, value, stopped in trace.records:
        assert stopped == (n == 4)
        if n < 4:
            assert value > 3.0 * 0.02
    assert trace.records[-1][1] <= 3.0 * 0.02


def test_discrepancy_immediate_stop():
    trace = choose_n_discrepancy(lambda n: fake_result(1e-9), delta=1e-3,
                                 b=2.0, n_max=5)
    assert trace.chosen_n == 1
    assert len(trace.records) == 1


def test_discrepancy_not_reached():
    trace = choose_n_discrepancy(lambda n: fake_result(1.0), delta=1e-3,
                                 b=2.0, n_max=4)
    assert not trace.reached
    assert len(trace.records) == 4


def test_discrepancy_validation():
    with pytest.raises(ValueError):
        choose_n_discrepancy(lambda n: fake_result(1.0), delta=0.0, b=2.0, n_max=3)
    with pytest.raises(ValueError):
        choose_n_discrepancy(lambda n: fake_result(1.0), delta=1e-3, b=1.0, n_max=3)


def test_discrepancy_solver_failure_keeps_partial_trace():
    def solve_at(n):
        if n == 3:
            raise np.linalg.LinAlgError("boom")
        return fake_result(1.0)

    with pytest.raises(SolverFailure) as exc:
        choose_n_discrepancy(solve_at, delta=1e-3, b=2.0, n_max=5)
    assert len(exc.value.trace.records) == 2


def test_trace_csv(tmp_path):
    trace = RuleTrace(rule_id="dp", constant=2.0)
    trace.add(1, 0.5, False)
    trace.add(2, 0.01, True)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,criterion_value,decision"
    assert lines[1].startswith("1,0.5,continue")
    assert lines[2].startswith("2,0.01,stop")


# ----------------------------------------------------- monotone error rule

def nested_family_solver(p, delta, seed, family=(1, 2, 4, 8), r_exp=1.0):
    """Least-error solves over a nested endpoint-collocation family with a
    single noise realization drawn on the finest node set."""
    from projreg.harness import gen_noise
    spec = SpaceSpec("Lp", p)
    finest = CollocationScheme(Mesh(family[-1]), (1.0,))
    breaks = least_error_grid(finest)
    noise = gen_noise(finest.nodes(), delta, seed)

    def solve_at(n):
        sch = CollocationScheme(Mesh(n), (1.0,))
        nodes = sch.nodes()
        idx = np.searchsorted(finest.nodes(), nodes)
        f = model_rhs(r_exp, 1, nodes) + noise[idx]
        res = solve_least_error(K1, sch, f, spec, quad_breaks=breaks)
        res.diagnostics["f_nodes"] = f
        return res

    return solve_at, spec


def test_me_index_p2_identity():
    # d_ME = (||u_{n+1}||^2 - ||u_n||^2) / (2 ||v_{n+1} - v_n||)
    solve_at, spec = nested_family_solver(2.0, 1e-3, seed=7)
    res_a, res_b = solve_at(2), solve_at(4)
    d = me_index(res_a.dual, res_b.dual, res_b.diagnostics["f_nodes"], q=2.0)
    na, nb = lp_norm(res_a.u, spec), lp_norm(res_b.u, spec)
    dv = res_b.dual - res_a.dual
    assert d == pytest.approx((nb**2 - na**2) / (2 * dv.tv_norm()), abs=1e-8)


@pytest.mark.parametrize("p,count", [(2.0, 80), (3.0, 20)])
def test_me_index_nonnegative_on_nested_instances(p, count):
    rng = np.random.default_rng(31)
    bad = 0
    for trial in range(count):
        solve_at, _ = nested_family_solver(
            p, delta=10.0 ** rng.uniform(-5, -2), seed=int(rng.integers(1 << 31)),
            family=(1, 2), r_exp=float(rng.uniform(0.5, 2.0)))
        res_a, res_b = solve_at(1), solve_at(2)
        d = me_index(res_a.dual, res_b.dual, res_b.diagnostics["f_nodes"], q=max(2.0, p))
        if d < -1e-10:
            bad += 1
    assert bad == 0


def test_me_index_undefined_for_equal_duals():
    solve_at, _ = nested_family_solver(2.0, 0.0, seed=1)
    res = solve_at(2)
    with pytest.raises(MonotoneIndexUndefined):
        me_index(res.dual, res.dual, res.diagnostics["f_nodes"], q=2.0)


def test_me_index_requires_nesting():
    a = DiracCombo([0.3], [1.0])
    b = DiracCombo([0.5, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="nest"):
        me_index(a, b, np.zeros(2), q=2.0)


def test_monotone_rule_stops_at_first_violation():
    solve_at, _ = nested_family_solver(2.0, 1e-2, seed=3)
    # huge delta: stop at the first transition
    trace = choose_n_monotone_error(solve_at, delta=10.0, n_family=[1, 2, 4],
                                    q=2.0)
    assert trace.chosen_n == 1


def test_monotone_rule_exact_data_never_stops():
    solve_at, _ = nested_family_solver(2.0, 0.0, seed=5)
    trace = choose_n_monotone_error(solve_at, delta=0.0, n_family=[1, 2, 4],
                                    q=2.0)
    assert not trace.reached
    assert all(value >= -1e-12 for _, value, _ in trace.records)


def test_monotone_rule_trace_contents():
    solve_at, _ = nested_family_solver(2.0, 5e-3, seed=11, family=(1, 2, 4, 8))
    trace = choose_n_monotone_error(solve_at, delta=5e-3,
                                    n_family=[1, 2, 4, 8], q=2.0)
    ns = [rec[0] for rec in trace.records]
    assert ns == sorted(ns)
    if trace.reached:
        assert trace.records[-1][2] is True
        assert trace.records[-1][1] < 5e-3
