"""Run a built-in scenario from Python and print its gates."""
import sys

from girsanov_lab.config import ScenarioConfig
from girsanov_lab.harness import run_scenario


def main(name="poisson_tilt"):
    cfg = ScenarioConfig(name, grid_n=32, n_paths=20_000, seed=7)
    rep = run_scenario(cfg, write=False)
    for g in rep.gates:
        flag = "PASS" if g.passed else "FAIL"
        print(f"{flag}  {g.name:<40} achieved {g.achieved:.6g}  target {g.target:.6g}  tol {g.tolerance:.2g}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
