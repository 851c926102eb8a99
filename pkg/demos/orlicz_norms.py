"""Luxemburg norms for the two Young functions and the Hoelder bound they satisfy."""
import numpy as np

from girsanov_lab.orlicz import WeightedSample, energy_estimate, luxemburg_norm, orlicz_holder_check


def main():
    rng = np.random.default_rng(0)
    masses = rng.random(12)
    u = WeightedSample(rng.normal(size=12), masses)
    z = WeightedSample(rng.exponential(size=12), masses)
    for name, h in (("u", u), ("z", z)):
        a = luxemburg_norm(h, "theta").value
        b = luxemburg_norm(h, "theta_star").value
        print(f"||{name}||_theta = {a:.6f}   ||{name}||_theta* = {b:.6f}")
    check = orlicz_holder_check(z, u)
    print(f"E zu = {check.lhs:.6f} <= 2 ||z||_theta* ||u||_theta = {check.rhs:.6f}: {check.holds}")

    ell = WeightedSample(rng.uniform(0.1, 4.0, 12), masses)
    print(f"entropy integral of a tilt: {energy_estimate(ell):.6f}")


if __name__ == "__main__":
    main()
