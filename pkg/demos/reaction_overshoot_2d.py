"""Two-species reaction on the torus: B-mass overshoot and its cure.

Species A converts to B at rate kappa wherever the local B density
exceeds the threshold rho_th, so the B mass should grow monotonically
toward the total mass 1 and never beyond it.  With the plain momentum
dynamics, negative density excursions feed the reaction term and the
B mass overshoots 1 by tens of percent; with the time-scale switch
(tau = 0.02) the excursions are suppressed and the B mass saturates
just below 1.

To keep the runtime at about a minute this demo uses a 16 x 16 grid
instead of the 32 x 32 benchmark resolution; the phenomenology is the
same (overshoot to ~1.34 instead of ~1.42).  Total mass A + B is
conserved to round-off in both cases.
"""

import time

import numpy as np

from ridk.fespace import PairSpace
from ridk.harness import twod_react, twod_react_tau
from ridk.mesh import build_torus2d
from ridk.multispecies import run_two_species

SEED = 101


def main():
    print(f"two-species reaction, 16 x 16 cells, dt = 1e-2, t in [0, 25],"
          f" seed {SEED}")
    print(f"{'dynamics':<12} {'max B mass':>11} {'final B':>8}"
          f" {'total drift':>12} {'min rho':>8} {'wall':>6}")
    for factory, label in ((twod_react, "base"), (twod_react_tau, "tau")):
        preset = factory()
        space = PairSpace(build_torus2d(16, 16), 0)
        t0 = time.time()
        out = run_two_species(space, preset.params, preset.variant,
                              preset.coupling, preset.init_a, preset.init_b,
                              (1e-2, 25.0), SEED, ())
        total = out.a.mass + out.b.mass
        drift = float(np.abs(total - total[0]).max() / total[0])
        min_rho = float(min(out.a.min_rho.min(), out.b.min_rho.min()))
        print(f"{label:<12} {out.b.mass.max():>11.6f} {out.b.mass[-1]:>8.4f}"
              f" {drift:>12.2e} {min_rho:>8.4f} {time.time() - t0:>5.1f}s")
    print("\nthe base B mass exceeds the total mass 1 (unphysical); the")
    print("time-scale switch keeps it below 1 throughout")


if __name__ == "__main__":
    main()
