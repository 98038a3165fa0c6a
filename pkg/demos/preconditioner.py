"""Condition numbers of the eigenvector matrices and FD-PCG iteration counts.

Prints the kappa2(U) table and then solves the 2D traveling wave with and
without the fast-diagonalization preconditioner.
"""
from kronschro.experiments import condition_table, performance_run
from kronschro.problems import traveling_wave_2d


def main():
    print(" p   kappa2(U) at n_el = 32, 64, 128")
    rows = condition_table(range(2, 9), [32, 64, 128])
    for p in range(2, 9):
        vals = [r["kappa2"] for r in rows if r["p"] == p]
        print(f"{p:2d}   " + "  ".join(f"{v:7.2f}" for v in vals))

    print("\n2D traveling wave, tol 1e-8")
    ex = traveling_wave_2d()
    for p in (2, 3, 4):
        for n in (8, 16, 32):
            _, fd = performance_run(ex, p, n)
            _, plain = performance_run(ex, p, n, preconditioner="none", warmup=False)
            star = "" if plain["converged"] else "*"
            print(f"  p={p} n_el={n:3d} fd={fd['iters']:3d} "
                  f"(setup {fd['setup_s']:.2f}s, solve {fd['solve_s']:.2f}s) "
                  f"none={plain['iters']}{star}")


if __name__ == "__main__":
    main()
