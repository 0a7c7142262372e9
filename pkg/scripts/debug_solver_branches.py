import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from cropaware.common import get_env  # noqa: E402
from cropaware.pipeline import InstanceRecord  # noqa: E402
from cropaware.solver import DimKind, find_min, o1_candidate_intervals, o1_surrogates, xi  # noqa: E402

DEFAULT_LINE = "gt=600,100,1000,100 anchor=300,100,200,200 crop=800,800 pred=0,0,1,1 beta=1"


def _dump_o1(label: str, omega_p: float, omega_hat: float, omega0: float, beta: float) -> None:
    print(f"  {label}: omega_p={omega_p!r} omega_hat={omega_hat!r} omega0={omega0!r}")
    print(f"    xi(omega0)={xi(omega0, omega_p, omega_hat, beta)!r}")
    if omega_hat > 0:
        print(f"    xi(omega_hat)={xi(omega_hat, omega_p, omega_hat, beta)!r}")
    if not max(omega0, omega_p) < omega_hat:
        return
    d_xi, sigma, value = o1_surrogates(omega_p, omega_hat, beta)
    for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, beta):
        if iv.empty:
            print(f"    {iv.label} [{iv.lo:.6g}, {iv.hi:.6g}] empty")
            continue
        w = find_min(iv.lo, iv.hi, d_xi if iv.surrogate == "xi_prime" else sigma)
        print(f"    {iv.label} [{iv.lo:.6g}, {iv.hi:.6g}] via {iv.surrogate}: w={w!r} xi={value(w)!r}")


def main() -> None:
    line = " ".join(sys.argv[1:]) or get_env("CABB_DEBUG_INSTANCE", DEFAULT_LINE)
    record = InstanceRecord.parse(line)
    sol = record.solve()

    print("Instance:", record.to_line())
    print("Loss:", sol.loss, " standard (cropped gt):", record.l_bb_cropped())
    for axis, (case, branch) in enumerate(zip(sol.dim_cases, sol.per_dim_branch)):
        dp, wp = record.pred.delta(axis), record.pred.omega(axis)
        print(f"Axis {'xy'[axis]}: {case.kind.value} branch={branch} a={case.a!r} b={case.b!r}")
        print(f"  delta*={sol.delta_star.delta(axis)!r} omega*={sol.delta_star.omega(axis)!r}")
        if case.kind == DimKind.RIGHT_OPEN:
            _dump_o1("O1", wp, 2.0 * (dp - case.a), case.omega0, record.beta)
        elif case.kind == DimKind.LEFT_OPEN:
            _dump_o1("O1", wp, 2.0 * (case.b - dp), case.omega0, record.beta)
        elif case.kind == DimKind.BOTH_OPEN:
            _dump_o1("side1", wp, 2.0 * (dp - case.a), case.omega0, record.beta)
            _dump_o1("side2", wp, 2.0 * (case.b - dp), case.omega0, record.beta)


if __name__ == "__main__":
    main()
