"""Fixed points of the smooth return map near the grazing value of mu.

Scans c in ``mu = eps - c eps^(4/3)`` for the example family and compares
the located saddle node with its asymptotic prediction. Takes about a
minute.
"""

from grazslide.bifurcation import locate_mu_star
from grazslide.dynsys import default_phi, make_example_family
from grazslide.sections import SectionMaps

KAPPA, EPS = 1.0, 0.05


def main():
    system, phi = make_example_family(KAPPA), default_phi()
    print(f"kappa={KAPPA}, eps={EPS}, phi={phi.name}")
    for c in (0.5, 0.6, 0.7, 0.75):
        mu = EPS - c * EPS ** (4 / 3)
        pts = SectionMaps(system, phi, EPS, mu).fixed_points().points
        desc = ", ".join(f"{x:.4f} ({s})" for _, x, s in pts) or "none"
        print(f"  c={c:.2f}  mu={mu:.6f}  fixed points: {desc}")
    r = locate_mu_star(system, phi, EPS)
    print(f"saddle node: c={r.c_numeric:.4f}, mu*={r.mu_star_numeric:.7f}, "
          f"asymptotic mu*={r.mu_star_asymptotic:.7f}")


if __name__ == "__main__":
    main()
