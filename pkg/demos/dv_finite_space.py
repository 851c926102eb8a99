"""Variational entropy on a finite space.

Compares the Donsker-Varadhan supremum with closed-form KL for a dice
example, then shows the search running off to the cap when p puts mass
where r has none.
"""
import numpy as np

from girsanov_lab import DiscreteDist, dv_objective, dv_supremum, kl_divergence, optimal_potential


def main():
    r = DiscreteDist.from_weights(np.ones(6), labels=range(1, 7))
    p = DiscreteDist.from_weights([1, 1, 1, 1, 2, 4], labels=range(1, 7))
    res = dv_supremum(p, r)
    print(f"loaded die vs fair die: KL = {kl_divergence(p, r):.10f}")
    print(f"  DV supremum           = {res.value:.10f} after {res.iterations} Newton steps")
    print(f"  objective at log dp/dr = {dv_objective(optimal_potential(p, r), p, r):.10f}")

    q = DiscreteDist.from_weights([1, 1, 1, 1, 1, 0], labels=range(1, 7))
    res = dv_supremum(r, q)
    print(f"fair die vs die with no six: KL = {kl_divergence(r, q)}, search diverged = {res.diverged}")


if __name__ == "__main__":
    main()
