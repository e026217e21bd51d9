"""Every scalar ODE case against its closed form at a ladder of step sizes."""
import argparse

from ricci3.flow import ODE_CASES, ode_case, ode_suite


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, nargs="+", default=[1e-2, 5e-3, 1e-3])
    args = ap.parse_args(argv)
    print("case,dt,max_abs_err,substitution_residual,closed_form")
    for case in ODE_CASES:
        for dt in args.dt:
            rep = ode_suite(ode_case(case), dt=dt)
            print(f"{case},{dt},{rep.max_abs_err:.3e},{rep.substitution_residual:.1e},"
                  f"\"{rep.closed_text}\"")


if __name__ == "__main__":
    main()
