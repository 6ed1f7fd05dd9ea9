"""Smooth and hysteretic regularizations against the sliding solution.

Both track the sliding motion of the relay system with an error
proportional to the regularization parameter.
"""

import numpy as np

from grazslide.dynsys import default_phi, make_relay_system
from grazslide.integrate import integrate_to_event
from grazslide.regularize import HysteresisState, filippov_sliding, hysteretic_flow, sliding_trajectory, st_field

T = 2.0


def main():
    system, phi = make_relay_system(), default_phi()
    ref = sliding_trajectory(system, 0.0, T)
    print(f"sliding speed {filippov_sliding(system, 0.0):.4f}")

    def err(t, x):
        return float(np.max(np.abs(x - np.interp(t, ref.t, ref.states[:, 0]))))

    for eps in (0.01, 0.005, 0.0025):
        tr = integrate_to_event(st_field(system, phi, eps), (0.0, 0.0), (0.0, T))
        print(f"smooth     eps={eps:<7} max error/eps   {err(tr.t, tr.states[:, 0]) / eps:.4f}")
    for alpha in (0.1, 0.05, 0.025):
        run = hysteretic_flow(system, alpha, HysteresisState(0.0, alpha, 1), T)
        print(f"hysteretic alpha={alpha:<5} max error/alpha {err(run.t, run.states[:, 0]) / alpha:.4f}"
              f"  ({len(run.switches)} switches)")


if __name__ == "__main__":
    main()
