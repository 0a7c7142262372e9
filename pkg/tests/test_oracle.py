import pytest

from cropaware.common import InvalidArgument
from cropaware.oracle import OracleConfig, oracle_dimension, oracle_o1, oracle_o1_trace, oracle_o2
from cropaware.solver import DimCase, DimKind, SolverConfig, _solve_o2, solve_dimension

SMALL = OracleConfig(grid_points=2000)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        OracleConfig(grid_points=99)
    with pytest.raises(InvalidArgument):
        OracleConfig(refine_passes=-1)


def test_o1_boundary_optimum():
    w, v = oracle_o1(0.5, 0.6, 0.0, 1.0, 1.0, SMALL)
    assert w == pytest.approx(1.0)
    assert v > 0


def test_o1_zero_attainable():
    w, v = oracle_o1(2.0, 2.0, 0.0, 1.0, 1.0)
    assert w == pytest.approx(2.0, rel=1e-6)
    assert v == pytest.approx(0.0, abs=1e-10)


def test_o1_rejects_bad_bounds():
    with pytest.raises(InvalidArgument):
        oracle_o1(1.0, 1.0, 1.0, 0.5, 1.0)


def test_refinement_never_worsens():
    trace = oracle_o1_trace(5.0, 0.2, 0.0, 0.1, 1.0 / 9.0, SMALL)
    assert len(trace) == SMALL.refine_passes + 1
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_o2_feasible_unconstrained():
    assert oracle_o2(0.0, 3.0, -1.0, 1.0, 1.0, SMALL) == (0.0, 3.0, 0.0)


def test_o2_symmetric_tie_matches_solver():
    d, w, tag = _solve_o2(0.0, 1.0, -1.0, 1.0, 1.0, 1e-7)
    assert tag.startswith("side1")
    _, _, best = oracle_o2(0.0, 1.0, -1.0, 1.0, 1.0, SMALL)
    case = DimCase(DimKind.BOTH_OPEN, 0.0, 2.0, -1.0, 1.0)
    _, _, ours = oracle_dimension(DimCase(DimKind.SINGLETON, d, w), 0.0, 1.0, 1.0)
    assert ours == pytest.approx(best, abs=1e-6)
    assert solve_dimension(case, 0.0, 1.0)[:2] == (d, w)


def test_o2_rejects_bad_bounds():
    with pytest.raises(InvalidArgument):
        oracle_o2(0.0, 1.0, 2.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "case,delta_p,omega_p",
    [
        (DimCase(DimKind.RIGHT_OPEN, 0.5, 1.0, 0.0, 2.0), 3.0, 0.3),
        (DimCase(DimKind.LEFT_OPEN, -0.5, 1.0, -3.0, 0.0), -4.0, 7.0),
        (DimCase(DimKind.BOTH_OPEN, 0.0, 2.0, -1.0, 1.0), 0.7, 0.5),
        (DimCase(DimKind.BOTH_OPEN, 0.0, 2.0, -1.0, 1.0), -5.0, 40.0),
    ],
)
def test_solver_never_loses_to_oracle(case, delta_p, omega_p):
    for beta in (1.0 / 9.0, 1.0):
        d, w, _ = solve_dimension(case, delta_p, omega_p, SolverConfig(beta=beta))
        _, _, ours = oracle_dimension(DimCase(DimKind.SINGLETON, d, w), delta_p, omega_p, beta)
        _, _, ref = oracle_dimension(case, delta_p, omega_p, beta, SMALL)
        assert ours <= ref + 1e-6
