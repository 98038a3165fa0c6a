"""Error convergence for the complex Gaussian and the high-mode problem.

Run with ``python3 demos/convergence.py``. For the smooth Gaussian the
V-norm error falls like h^(p-1). The high-mode data are too rough for any
rate, but the error still shrinks under refinement.
"""
from kronschro.experiments import convergence_study, error_norms, solve
from kronschro.problems import gaussian_1d, high_mode_1d


def main():
    print("Gaussian, V-norm error and observed order")
    for p in (2, 3, 4):
        for r in convergence_study(gaussian_1d(), p, [8, 16, 32, 64]):
            order = "" if r.order is None else f"{r.order:5.2f}"
            print(f"  p={p} n_el={r.n_el:4d} Ndof={r.N_dof:6d} "
                  f"errL2={r.error_L2:.3e} errV={r.error_V:.3e} {order}")

    print("high-mode problem (625 modes), V-norm error")
    ex = high_mode_1d()
    for p in (2, 3):
        for n in (8, 16, 32, 64):
            sol = solve(ex, p, n)
            print(f"  p={p} n_el={n:3d} errV={error_norms(sol.problem, sol.coeffs, ex)[1]:.4f}")


if __name__ == "__main__":
    main()
