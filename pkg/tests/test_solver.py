import math

import numpy as np
import pytest

from cropaware.common import InvalidArgument
from cropaware.geometry import Box, CropRect, Delta, encode
from cropaware.losses import l_bb, l_bb_grad
from cropaware.oracle import OracleConfig, oracle_o1
from cropaware.solver import (
    SQRT32,
    DimKind,
    SolverConfig,
    cabb_loss,
    classify_dimension,
    find_min,
    o1_candidate_intervals,
    o1_surrogates,
    sigma_fn,
    solve_dimension,
    solve_o1,
    solve_o2,
    xi,
    xi_prime,
)


def test_classify_examples():
    assert classify_dimension(200, 100, 400, 200, 100).kind == DimKind.SINGLETON

    case = classify_dimension(380, 40, 400, 200, 100)
    assert case.kind == DimKind.RIGHT_OPEN
    assert case.a == pytest.approx(1.6)
    assert case.b == pytest.approx(2.0)

    assert classify_dimension(200, 400, 400, 200, 100).kind == DimKind.BOTH_OPEN
    assert classify_dimension(20, 40, 400, 200, 100).kind == DimKind.LEFT_OPEN


def test_classify_pins_force_fixed_sides():
    assert classify_dimension(380, 40, 400, 200, 100, pin_right=True).kind == DimKind.SINGLETON
    assert classify_dimension(200, 400, 400, 200, 100, pin_left=True).kind == DimKind.RIGHT_OPEN


def test_classify_rejects_box_outside_crop():
    with pytest.raises(InvalidArgument):
        classify_dimension(500, 40, 400, 200, 100)


def test_xi_vanishes_at_common_optimum():
    assert xi(2.0, 2.0, 2.0, 1.0) == 0
    assert xi_prime(2.0, 2.0, 2.0, 1.0) == 0
    with pytest.raises(InvalidArgument):
        xi(0.0, 1.0, 1.0, 1.0)


def test_find_min_examples():
    phi = lambda w: w - 2.0  # noqa: E731
    assert find_min(1.0, 3.0, phi, 1e-9) == pytest.approx(2.0, abs=1e-8)
    assert find_min(3.0, 5.0, phi) == 3.0
    assert find_min(0.0, 1.0, phi) == 1.0
    assert find_min(2.0, 1.0, phi) is None


def test_solve_o1_boundary():
    assert solve_o1(0.5, 0.6, 0.0, 1.0) == 1.0


def test_solve_o1_interior_branch_matches_oracle():
    w = solve_o1(5.0, 0.2, 0.0, 0.1)
    assert 0.2 <= w <= 5.0
    _, best = oracle_o1(5.0, 0.2, 0.0, 0.1, 1.0)
    assert xi(w, 5.0, 0.2, 1.0) <= best + 1e-6


def test_solve_o1_tie_returns_common_optimum():
    assert solve_o1(2.0, 2.0, 0.0, 1.0) == 2.0


def test_solve_o1_rejects_empty_bounds():
    with pytest.raises(InvalidArgument):
        solve_o1(1.0, 1.0, 1.0, 1.0)


def test_solve_o1_random_against_oracle():
    rng = np.random.default_rng(11)
    cfg = OracleConfig(grid_points=3000)
    for _ in range(300):
        beta = float(rng.choice([1.0 / 9.0, 1.0]))
        omega_p = math.exp(rng.uniform(math.log(1e-2), math.log(1e2)))
        omega_hat = float(rng.uniform(-5, 40))
        b1 = math.exp(rng.uniform(math.log(1e-2), math.log(20)))
        w = solve_o1(omega_p, omega_hat, 0.0, b1, SolverConfig(beta=beta))
        assert w >= b1
        _, best = oracle_o1(omega_p, omega_hat, 0.0, b1, beta, cfg)
        assert xi(w, omega_p, omega_hat, beta) <= best + 1e-6


def test_solve_o2_unconstrained():
    assert solve_o2(0.0, 3.0, -1.0, 1.0) == (0.0, 3.0)


def test_solve_o2_symmetric_tie_picks_first_side():
    d, w = solve_o2(0.0, 1.0, -1.0, 1.0)
    assert d == -1.0 + w / 2.0
    assert w >= 2.0


def test_solve_o2_rejects_empty_bounds():
    with pytest.raises(InvalidArgument):
        solve_o2(0.0, 1.0, 1.0, 1.0)


def test_xi_prime_sign_outside_both_optima():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        beta = float(rng.uniform(0.05, 2.0))
        omega_p = math.exp(rng.uniform(-4, 4))
        omega_hat = math.exp(rng.uniform(-4, 4))
        lo, hi = min(omega_p, omega_hat), max(omega_p, omega_hat)
        assert xi_prime(lo * rng.uniform(0.01, 0.99), omega_p, omega_hat, beta) < 0
        assert xi_prime(hi * rng.uniform(1.01, 10.0), omega_p, omega_hat, beta) > 0


def test_surrogates_increase_on_candidate_intervals():
    rng = np.random.default_rng(4)
    seen = set()
    for _ in range(1000):
        beta = float(rng.choice([1.0 / 9.0, 0.5, 1.0, 2.0]))
        omega_p = math.exp(rng.uniform(-3, 1))
        omega_hat = omega_p * math.exp(rng.uniform(0.01, 5))
        omega0 = omega_p * float(rng.uniform(0.01, 1.0))
        for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, beta):
            if iv.empty or iv.hi - iv.lo < 1e-9:
                continue
            seen.add(iv.label)
            fn = xi_prime if iv.surrogate == "xi_prime" else sigma_fn
            for _ in range(100):
                w1, w2 = sorted(rng.uniform(iv.lo, iv.hi, 2))
                f1 = fn(w1, omega_p, omega_hat, beta)
                f2 = fn(w2, omega_p, omega_hat, beta)
                assert f2 >= f1 - 1e-12 * max(1.0, abs(f1)), iv
    assert {"J1", "J2"} <= seen


def _assert_increasing(fn, lo, hi, omega_p, omega_hat, beta, rng, pairs=100):
    for _ in range(pairs):
        w1, w2 = sorted(rng.uniform(lo, hi, 2))
        f1 = fn(w1, omega_p, omega_hat, beta)
        f2 = fn(w2, omega_p, omega_hat, beta)
        assert f2 >= f1 - 1e-12 * max(1.0, abs(f1)), (lo, hi, omega_p, omega_hat, beta)


def test_xi_prime_increases_below_omega_p():
    # max(ω0, ω̂) < ω_P: the search runs on [max(ω0, ω̂), ω_P] with ξ'.
    rng = np.random.default_rng(6)
    for _ in range(1000):
        beta = float(rng.choice([1.0 / 9.0, 0.5, 1.0, 2.0, 3.0]))
        omega_p = math.exp(rng.uniform(-3, 3))
        omega_hat = omega_p * float(rng.uniform(-1.0, 0.99))
        omega0 = omega_p * float(rng.uniform(0.01, 0.99))
        lo = max(omega0, omega_hat)
        _assert_increasing(xi_prime, lo, omega_p, omega_p, omega_hat, beta, rng)


@pytest.mark.parametrize(
    "beta, omega_p, omega_hat, omega0, labels",
    [
        (2.0, 0.5, 4.0, 0.1, {"J3"}),
        (3.0, 0.2, 6.0, 0.1, {"J4", "J5"}),
    ],
)
def test_sigma_intervals_nonempty_examples(beta, omega_p, omega_hat, omega0, labels):
    found = {
        iv.label
        for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, beta)
        if iv.surrogate == "sigma" and iv.hi - iv.lo > 0.1
    }
    assert found == labels


def test_sigma_increases_on_j3_j4_j5():
    rng = np.random.default_rng(9)
    seen = set()
    problems = [(2.0, 0.5, 4.0, 0.1), (3.0, 0.2, 6.0, 0.1)]
    for _ in range(1000):
        beta = float(rng.choice([1.5, 2.0, 2.5, 3.0]))
        omega_p = math.exp(rng.uniform(-2.5, 0.5))
        omega_hat = float(rng.uniform(math.e * omega_p, SQRT32 + 3.0))
        omega0 = omega_p * float(rng.uniform(0.01, 1.0))
        problems.append((beta, omega_p, omega_hat, omega0))
    for beta, omega_p, omega_hat, omega0 in problems:
        for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, beta):
            if iv.surrogate != "sigma" or iv.empty or iv.hi - iv.lo < 1e-9:
                continue
            seen.add(iv.label)
            _assert_increasing(sigma_fn, iv.lo, iv.hi, omega_p, omega_hat, beta, rng)
    assert {"J3", "J4", "J5"} <= seen


def test_find_min_needs_few_evaluations_on_smooth_input():
    calls = []

    def phi(w):
        calls.append(w)
        return math.log(w) - 0.3

    w = find_min(0.1, 10.0, phi)
    assert w == pytest.approx(math.exp(0.3), abs=2e-6)
    # Plain halving would need about 26 evaluations here.
    assert len(calls) < 20


def test_find_min_lands_on_the_sign_change():
    rng = np.random.default_rng(12)
    for _ in range(500):
        beta = float(rng.choice([1.0 / 9.0, 1.0, 3.0]))
        omega_p = math.exp(rng.uniform(-3, 2))
        omega_hat = omega_p * math.exp(rng.uniform(0.05, 4))
        omega0 = omega_p * float(rng.uniform(0.01, 1.0))
        d_xi, sigma, _ = o1_surrogates(omega_p, omega_hat, beta)
        for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, beta):
            if iv.empty:
                continue
            phi = d_xi if iv.surrogate == "xi_prime" else sigma
            w = find_min(iv.lo, iv.hi, phi)
            assert iv.lo <= w <= iv.hi
            slack = 2e-7 * max(1.0, abs(iv.lo) + abs(iv.hi))
            if w > iv.lo:
                assert phi(max(iv.lo, w - slack)) <= 1e-12
            if w < iv.hi:
                assert phi(min(iv.hi, w + slack)) >= -1e-12


def test_solve_dimension_singleton_is_fixed():
    case = classify_dimension(200, 100, 400, 200, 100)
    assert solve_dimension(case, 3.0, 0.2) == (case.delta_g, case.omega_g, "fixed")


def test_cabb_inside_crop_equals_standard_loss():
    g = Box(200, 150, 80, 60)
    a = Box(190, 170, 64, 64)
    c = CropRect(400, 300)
    p = Delta(0.4, -1.2, 0.7, 2.5)
    sol = cabb_loss(p, g, a, c)
    target = encode(g, a)
    assert sol.per_dim_case == (DimKind.SINGLETON, DimKind.SINGLETON)
    assert sol.loss == l_bb(p, target)
    assert (sol.grad_delta, sol.grad_omega) == l_bb_grad(p, target)


def test_cabb_feasible_prediction_has_zero_loss():
    g = Box.from_corners(300, 50, 700, 150)
    a = Box(350, 100, 100, 100)
    c = CropRect(400, 400)
    p = encode(Box.from_corners(300, 50, 900, 150), a)
    sol = cabb_loss(p, g, a, c)
    assert sol.per_dim_case == (DimKind.RIGHT_OPEN, DimKind.SINGLETON)
    assert sol.loss == pytest.approx(0.0, abs=1e-12)
    assert sol.grad_delta == pytest.approx((0.0, 0.0), abs=1e-9)


def test_cabb_lower_bounds_cropped_loss():
    g = Box.from_corners(-100, 50, 300, 150)
    a = Box(100, 100, 100, 100)
    c = CropRect(400, 400)
    p = Delta(-1.0, 0.2, 5.0, 1.3)
    sol = cabb_loss(p, g, a, c)
    standard = l_bb(p, encode(Box.from_corners(0, 50, 300, 150), a))
    assert sol.per_dim_case[0] == DimKind.LEFT_OPEN
    assert sol.loss <= standard + 1e-12
    assert sol.loss < standard


def test_cabb_crop_origin_translates():
    g = Box.from_corners(300, 50, 900, 150)
    a = Box(350, 100, 100, 100)
    p = Delta(0.3, 0.1, 2.0, 1.1)
    base = cabb_loss(p, g, a, CropRect(400, 400))
    shifted = cabb_loss(p, g.translate(50, 70), a.translate(50, 70), CropRect(400, 400, 50, 70))
    assert shifted.per_dim_case == base.per_dim_case
    assert shifted.loss == pytest.approx(base.loss, abs=1e-12)


def test_cabb_image_extent_pins_sides_inside_image():
    # Box ends at the crop edge but the image continues: not cut.
    g = Box.from_corners(100, 100, 400, 200)
    a = Box(250, 150, 100, 100)
    c = CropRect(400, 400)
    p = Delta(0.0, 0.0, 5.0, 1.0)
    free = cabb_loss(p, g, a, c)
    pinned = cabb_loss(p, g, a, c, image_extent=(1000.0, 1000.0))
    edge = cabb_loss(p, g, a, c, image_extent=(400.0, 400.0))
    assert free.per_dim_case[0] == DimKind.RIGHT_OPEN
    assert pinned.per_dim_case[0] == DimKind.SINGLETON
    assert edge.per_dim_case[0] == DimKind.RIGHT_OPEN


def test_cabb_rejects_disjoint_gt():
    with pytest.raises(InvalidArgument):
        cabb_loss(Delta(0, 0, 1, 1), Box(1000, 1000, 10, 10), Box(0, 0, 10, 10), CropRect(100, 100))
