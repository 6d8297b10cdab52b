import numpy as np
import pytest

from projreg.operators import CollocationScheme, Kernel
from projreg.rules import tau_of_c
from projreg.spaces import SpaceSpec
from projreg.splines import Mesh
from projreg.stability import (estimate_kappa, estimate_kappa_star,
                               estimate_tau_n, exact_kappa_p2,
                               kappa_chain_check, reports_to_csv,
                               stability_report)

K1 = Kernel.volterra(1)
K2 = Kernel.volterra(2)
L2 = SpaceSpec("Lp", 2.0)


def test_kappa_exact_single_constant_cell():
    # E_1 = constants, ||A 1||_{L2}^2 = int t^2 dt = 1/3, so kappa_1 = sqrt(3)
    val = estimate_kappa(K1, Mesh(1), 1, L2, L2)
    assert val == pytest.approx(np.sqrt(3.0), abs=1e-12)


def test_random_search_never_exceeds_exact():
    # the C-norm dominates the L2 norm on [0,1], so every witness ratio is
    # below the exact L2 value
    exact = exact_kappa_p2(K2, Mesh(4), 2)[0]
    rep = stability_report(K2, CollocationScheme(Mesh(4), (0.7, 1.0)), 2, L2,
                           budget=120, seed=2)
    assert rep.kappa <= exact + 1e-9


@pytest.mark.parametrize("l,kernel", [(1, K1), (2, K2)])
def test_kappa_growth_law(l, kernel):
    ns = [4, 8, 16, 32, 64]
    kappas = [estimate_kappa(kernel, Mesh(n), 2, L2, L2) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(kappas), 1)[0]
    assert slope == pytest.approx(l, abs=0.2)


def test_tau_n_at_least_one():
    for n in (1, 3, 8):
        sch = CollocationScheme(Mesh(n), (1.0,))
        assert estimate_tau_n(K1, sch, 1, budget=60, seed=0) >= 1.0


def test_tau_n_bounded_by_analytic_constant():
    # k = 2, c = (0.7, 1), l = 2: tau_n stays below tau(0.7) = 4.10
    bound = tau_of_c(0.7)
    vals = []
    for n in (8, 16):
        sch = CollocationScheme(Mesh(n), (0.7, 1.0))
        vals.append(estimate_tau_n(K2, sch, 2, budget=150, seed=1))
    assert all(v <= bound + 0.05 for v in vals)
    # and the estimates do approach the constant from below
    assert max(vals) > 0.8 * bound


def test_kappa_star_single_node():
    # A* delta_1 = 1_{[0,1]} for the order-1 kernel, so the ratio is 1
    sch = CollocationScheme(Mesh(1), (1.0,))
    val = estimate_kappa_star(K1, sch, budget=60, seed=0, E_spec=L2)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_kappa_star_budget_monotone():
    sch = CollocationScheme(Mesh(3), (0.7, 1.0))
    vals = [estimate_kappa_star(K2, sch, budget=b, seed=4, E_spec=L2)
            for b in (20, 60, 180)]
    assert vals[0] <= vals[1] + 1e-12 and vals[1] <= vals[2] + 1e-12


def test_estimate_kappa_budget_monotone():
    spec = SpaceSpec("Lp", 3.0)
    vals = [estimate_kappa(K2, Mesh(3), 2, spec, SpaceSpec("C"), budget=b, seed=9)
            for b in (20, 60, 180)]
    assert vals[0] <= vals[1] + 1e-12 and vals[1] <= vals[2] + 1e-12


def test_chain_check_on_random_instances():
    rng = np.random.default_rng(17)
    for _ in range(6):
        n = int(rng.integers(1, 6))
        c = float(rng.uniform(0.55, 0.95))
        sch = CollocationScheme(Mesh(n), (c, 1.0))
        rep = stability_report(K2, sch, 2, L2, budget=60,
                               seed=int(rng.integers(1 << 31)))
        check = kappa_chain_check(rep)
        assert check.passed, (rep, check)
        assert rep.kappa_tilde_upper >= rep.kappa - 1e-9


def test_degenerate_single_cell_tilde():
    # n = 1, k = 1, l = 1: Aw(t) = a t, node at t = 1, so kappa~ = 1 while
    # the L2 kappa is sqrt(3): the ratio is exactly ||A1||_L2 / |A1(1)|
    sch = CollocationScheme(Mesh(1), (1.0,))
    rep = stability_report(K1, sch, 1, L2, budget=60, seed=0)
    assert rep.kappa_tilde == pytest.approx(1.0, abs=1e-9)
    assert rep.method == "exact_p2"


def test_report_csv(tmp_path):
    sch = CollocationScheme(Mesh(2), (0.7, 1.0))
    rep = stability_report(K2, sch, 2, L2, budget=30, seed=0)
    path = tmp_path / "stability.csv"
    reports_to_csv([rep], path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ["n", "kappa", "tau", "kappa_tilde_upper",
                                   "kappa_star", "method", "budget", "seed"]
    assert lines[1].split(",")[0] == "2"
    assert lines[1].split(",")[5] == "exact_p2"
