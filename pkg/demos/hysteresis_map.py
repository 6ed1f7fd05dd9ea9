"""Markers and discontinuities of the hysteretic return map.

For mu = 0 the cuts E_n accumulate geometrically with ratio 1/pi'(0); for
mu = alpha the ratio is 1/sqrt(pi'(0)).
"""

import math

from grazslide.dynsys import make_example_family
from grazslide.hyst import basin_fractions, compute_markers, discontinuity_points
from grazslide.sections import pi_prime_routes

KAPPA, ALPHA = 0.2, 0.01


def main():
    system = make_example_family(KAPPA)
    P = pi_prime_routes(system)[0]
    print(f"kappa={KAPPA}, alpha={ALPHA}, pi'(0)={P:.6f}")
    for mu, target in ((0.0, 1 / P), (ALPHA, 1 / math.sqrt(P))):
        m = compute_markers(system, ALPHA, mu)
        print(f"mu={mu}: E={m.E_mu:.5f} A={m.A_mu:.5f} D={m.D_mu:.5f} graze={m.graze:.5f}")
        seq = discontinuity_points(system, ALPHA, mu, 10)
        print("  ratios " + " ".join(f"{r:.4f}" for r in seq.ratios) + f"  (limit {target:.4f})")
    fr = basin_fractions(system, ALPHA, 0.0, 200, 6)
    print("trapped fraction after k = 1..6 iterates: " + " ".join(f"{f:.3f}" for f in fr))


if __name__ == "__main__":
    main()
