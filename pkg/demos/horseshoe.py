"""Covering certificate for a horseshoe of the hysteretic map.

With mu = sigma1 alpha and sigma1 > 3, two intervals cover each other and
their union under the n-th iterate. Takes about a minute.
"""

from grazslide.dynsys import make_example_family
from grazslide.hyst import horseshoe_check

KAPPA, ALPHA, SIGMA1 = 0.2, 0.05, 4.0


def main():
    c = horseshoe_check(make_example_family(KAPPA), ALPHA, SIGMA1)
    lo, hi = c.window
    print(f"kappa={KAPPA}, alpha={ALPHA}, sigma1={SIGMA1}: n={c.n}, window for n-1 ({lo:.3f}, {hi:.3f})")
    for (a, b), name in zip(c.intervals, ("I1", "I2")):
        print(f"  {name} = [{a:.5f}, {b:.5f}]")
    print("  margins " + " ".join(f"{m:.4g}" for m in c.margins) + f"  passed={c.passed}")


if __name__ == "__main__":
    main()
