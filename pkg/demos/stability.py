"""Inf-sup constants of least squares and Galerkin, plus the two spectral pencils.

The least-squares constant stays put under refinement while the Galerkin
one decays. The spatial pencil behind the preconditioner keeps its
extremes fixed. The temporal pencil spreads out, which is why time is not
diagonalized.
"""
from kronschro.experiments import (
    infsup_constant,
    spectral_equivalence_space,
    spectral_equivalence_time,
)


def main():
    print("n_el  alpha(least squares)  alpha(Galerkin)")
    for n in (8, 16, 32, 64):
        print(f"{n:4d}  {infsup_constant('least_squares', 2, n):20.4f}  "
              f"{infsup_constant('galerkin', 2, n):15.4f}")

    print("\nspace pencil extremes, p = 3")
    for n in (8, 32, 128):
        e = spectral_equivalence_space(3, n)
        print(f"  n_el={n:4d} [{e.min():.6f}, {e.max():.4f}]")

    print("time pencil spread, p = 3")
    for n in (8, 32, 128):
        e = spectral_equivalence_time(3, n)
        print(f"  n_el={n:4d} max/min = {e.max() / e.min():.3e}")


if __name__ == "__main__":
    main()
