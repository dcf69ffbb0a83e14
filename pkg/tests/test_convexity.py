import numpy as np
import pytest

from doublephase.convexity import (
    admissible_epsilon_bound,
    delta_of_epsilon,
    monotonicity_lower_bound_check,
    pair_split,
    partition,
    scalar_lower_bound_check,
    sweep_monotonicity,
    sweep_two_point,
    sweep_uc_pairs,
    two_point_inequality_check,
    verify_multiphase_uc,
    verify_uc_pair,
)
from doublephase.mesh import ScalarField, build_grid
from doublephase.modular import rho
from test_phase import make_phase

GRID = build_grid(1, [(0, 1)], [12])


def test_partition_examples():
    part = partition(make_phase(GRID, 1.5, [(1.5, 1.0)]))
    assert np.all(part.omega11)
    part = partition(make_phase(GRID, 3.0, [(1.5, 1.0)]))
    assert np.all(part.omega21)
    part = partition(make_phase(GRID, 2.0, [(2.0, 1.0)]))
    assert np.all(part.omega22)  # ties at 2 go to the >= 2 side
    part = partition(make_phase(GRID, 1.5, [(2.5, 1.0)]))
    assert np.all(part.omega12)


def test_partition_covers_disjointly():
    rng = np.random.default_rng(0)
    ph = make_phase(
        GRID, rng.uniform(1.2, 3.0, GRID.n_cells),
        [(rng.uniform(1.2, 3.0, GRID.n_cells), 1.0)],
    )
    part = partition(ph)
    total = (
        part.omega11.astype(int) + part.omega12.astype(int)
        + part.omega21.astype(int) + part.omega22.astype(int)
    )
    assert np.all(total == 1)


def test_pair_split_examples():
    ph = make_phase(GRID, 2.0, [(3.0, 1.0)])
    part = partition(ph)
    rng = np.random.default_rng(1)
    u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
    same = pair_split(u, u, 0.5, part)
    assert np.all(same.g_mask)
    neg = ScalarField(GRID, -u.values)
    split = pair_split(u, neg, 3.9, part)
    assert np.all(split.e_mask)  # |2 grad u| > (alpha/4)(2 |grad u|) iff alpha < 4
    split4 = pair_split(u, neg, 4.0, part)
    assert np.all(split4.g_mask)  # ties go to the G side
    zero = ScalarField.zeros(GRID)
    both_flat = pair_split(zero, zero, 1.0, part)
    assert np.all(both_flat.g_mask)


def test_two_point_equality_cases():
    rng = np.random.default_rng(2)
    a = rng.normal(size=2)
    b = rng.normal(size=2)
    assert two_point_inequality_check(2.0, a, b)
    # parallelogram identity: both sides equal at h = 2
    from doublephase.convexity import _two_point_gaps

    lhs_i, lhs_ii, rhs = _two_point_gaps(2.0, a, b)
    assert lhs_i[0] == pytest.approx(rhs[0], rel=1e-12)
    assert lhs_ii[0] == pytest.approx(rhs[0], rel=1e-12)
    assert two_point_inequality_check(3.7, a, a)  # equality at a == b
    with pytest.raises(ValueError, match="requires"):
        two_point_inequality_check(1.5, [0.0, 0.0], [0.0, 0.0])


def test_two_point_sweep_small():
    out = sweep_two_point(50_000, seed=3)
    assert out["fails"] == 0


def test_delta_of_epsilon():
    assert delta_of_epsilon(0.5, 2.0) == pytest.approx(0.0078125)
    assert delta_of_epsilon(0.5, 17.0) == pytest.approx(0.125)
    with pytest.raises(ValueError, match="eps must lie"):
        delta_of_epsilon(1.2, 2.0)
    # for large m the admissible range shrinks below 1
    assert admissible_epsilon_bound(129.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        delta_of_epsilon(0.5, 129.0)
    # monotone nondecreasing in eps on the admissible range
    for m in (1.5, 3.0, 40.0):
        bound = admissible_epsilon_bound(m)
        eps = np.linspace(0.01, 0.99, 50) * bound
        deltas = [delta_of_epsilon(float(e), m) for e in eps]
        assert np.all(np.diff(deltas) >= 0)
        assert all(0 < d < 1 for d in deltas)


def test_verify_uc_pair_trivial_cases():
    ph = make_phase(GRID, 1.8, [(2.5, 1.0)])
    rng = np.random.default_rng(4)
    u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
    report = verify_uc_pair(u, u, 0.5, ph, "gradient")
    assert report.verdict == "vacuous"
    neg = ScalarField(GRID, -u.values)
    report = verify_uc_pair(u, neg, 0.5, ph, "gradient")
    assert report.verdict == "pass"
    assert report.midpoint_value == 0.0


def test_uc_sweep_no_fails():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(4, 40))
        grid = build_grid(1, [(0, 1)], [n])
        ph = make_phase(
            grid,
            rng.uniform(1.1, 5.0, grid.n_cells),
            [(rng.uniform(1.1, 5.0, grid.n_cells), rng.uniform(0, 10, grid.n_cells))],
        )
        tallies = sweep_uc_pairs(grid, ph, 10, seed=int(rng.integers(0, 2**31)),
                                 kinds=("gradient", "zero_order", "sobolev"))
        for kind in tallies:
            assert tallies[kind]["fail"] == 0


def test_multiphase_with_vanishing_weight_matches_double_phase():
    rng = np.random.default_rng(6)
    q = rng.uniform(1.3, 4.0, GRID.n_cells)
    mu = rng.uniform(0.0, 5.0, GRID.n_cells)
    p = rng.uniform(1.3, 4.0, GRID.n_cells)
    two = make_phase(GRID, p, [(q, mu)])
    three = make_phase(GRID, p, [(q, mu), (q, np.zeros(GRID.n_cells))])
    u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
    v = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
    r2 = verify_uc_pair(u, v, 0.4, two, "gradient")
    r3 = verify_multiphase_uc(u, v, 0.4, three)
    assert r3.verdict == r2.verdict
    assert r3.midpoint_value == pytest.approx(r2.midpoint_value, rel=1e-14)
    assert r3.delta == r2.delta
    report_same = verify_multiphase_uc(u, u, 0.4, three)
    assert report_same.verdict == "vacuous"
    with pytest.raises(ValueError, match="k >= 2"):
        verify_multiphase_uc(u, v, 0.4, two)


def test_monotonicity_check():
    rng = np.random.default_rng(7)
    A = rng.normal(size=2)
    assert monotonicity_lower_bound_check(3.0, A, A)
    # r = 2: lhs = |A - B|^2 and gamma(2) = 1, equality
    B = rng.normal(size=2)
    from doublephase.convexity import _monotonicity_sides

    lhs, rhs = _monotonicity_sides(2.0, A, B)
    assert lhs[0] == pytest.approx(rhs[0], rel=1e-12)
    assert monotonicity_lower_bound_check(2.0, A, B)
    out = sweep_monotonicity(50_000, seed=8)
    assert out["fails"] == 0


def test_scalar_lower_bound():
    assert scalar_lower_bound_check(5.0, 0.0, 2.0)
    assert scalar_lower_bound_check(0.0, 3.0, 2.0)
    # at the interior minimizer the slack is (1 - 1/m) of the bound
    for m in (1.5, 2.0, 4.0):
        a = 2.0
        x_star = (a / m) ** (m / (m - 1.0))
        assert scalar_lower_bound_check(x_star, a, m)
        lhs = x_star - a * x_star ** (1.0 / m)
        rhs = -a * (a / m) ** (1.0 / (m - 1.0))
        assert lhs - rhs == pytest.approx(-rhs / m, rel=1e-12)
    rng = np.random.default_rng(9)
    for _ in range(2000):
        x = float(rng.uniform(0, 100))
        a = float(rng.uniform(0, 10))
        m = float(np.nextafter(rng.uniform(1.0, 8.0), np.inf))
        assert scalar_lower_bound_check(x, a, m)


def test_restricted_modular_set_identity():
    rng = np.random.default_rng(10)
    for _ in range(15):
        ph = make_phase(
            GRID,
            rng.uniform(1.2, 3.5, GRID.n_cells),
            [(rng.uniform(1.2, 3.5, GRID.n_cells), rng.uniform(0, 4, GRID.n_cells))],
        )
        part = partition(ph)
        u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        v = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        eps = float(rng.uniform(0.05, 0.95))
        split = pair_split(u, v, eps, part)
        half = ScalarField(GRID, (u.values - v.values) / 2.0)
        outside = ~(part.omega22 | split.g_mask)
        assert np.all(outside == (split.a_mask | split.b_mask | split.c_mask))
        lhs = rho(half, ph, "gradient", mask=outside).value
        parts = [
            rho(half, ph, "gradient", mask=m).value
            for m in (split.a_mask, split.b_mask, split.c_mask)
        ]
        assert lhs == pytest.approx(sum(parts), rel=1e-13, abs=1e-15)


def test_component_estimates():
    # the three masked midpoint estimates hold for every pair once the split
    # threshold matches eps; no hypothesis on the pair is needed
    rng = np.random.default_rng(11)
    for _ in range(25):
        ph = make_phase(
            GRID,
            rng.uniform(1.15, 3.5, GRID.n_cells),
            [(rng.uniform(1.15, 3.5, GRID.n_cells), rng.uniform(0, 4, GRID.n_cells))],
        )
        s = ph.summary
        part = partition(ph)
        u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        v = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        eps = float(rng.uniform(0.05, 0.95))
        split = pair_split(u, v, eps, part)
        mid = ScalarField(GRID, (u.values + v.values) / 2.0)
        half = ScalarField(GRID, (u.values - v.values) / 2.0)
        cases = [
            (split.a_mask, (s.q_minus_global - 1.0) * eps / 8.0),
            (split.b_mask, (s.p_minus - 1.0) * eps / 8.0),
            (split.c_mask, (s.m - 1.0) * eps / 8.0),
        ]
        for mask, constant in cases:
            lhs = (
                rho(mid, ph, "gradient", mask=mask).value
                + constant * rho(half, ph, "gradient", mask=mask).value
            )
            rhs = 0.5 * (
                rho(u, ph, "gradient", mask=mask).value
                + rho(v, ph, "gradient", mask=mask).value
            )
            assert lhs <= rhs + 1e-12 * (1.0 + rhs)


def test_gap_concentration_estimate():
    # when the gap concentrates outside omega22, the split keeps at least half
    # of the lower bound outside G_eps as well
    rng = np.random.default_rng(12)
    checked = 0
    for _ in range(400):
        ph = make_phase(
            GRID,
            rng.uniform(1.15, 3.5, GRID.n_cells),
            [(rng.uniform(1.15, 3.5, GRID.n_cells), rng.uniform(0, 4, GRID.n_cells))],
        )
        part = partition(ph)
        u = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        v = ScalarField(GRID, rng.normal(size=GRID.n_nodes))
        eps = float(rng.uniform(0.05, 0.95))
        half = ScalarField(GRID, (u.values - v.values) / 2.0)
        avg = 0.5 * (rho(u, ph, "gradient").value + rho(v, ph, "gradient").value)
        outside22 = ~part.omega22
        if rho(half, ph, "gradient", mask=outside22).value <= 0.5 * eps * avg:
            continue
        checked += 1
        split = pair_split(u, v, eps, part)
        target = ~(part.omega22 | split.g_mask)
        lhs = rho(half, ph, "gradient", mask=target).value
        assert lhs >= 0.25 * eps * avg - 1e-12 * (1.0 + avg)
    assert checked > 20  # the hypothesis fires often enough to be meaningful
