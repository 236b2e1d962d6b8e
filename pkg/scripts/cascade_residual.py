"""Truncation residual of the Hilbert expansion against eps, per branch and k.

    python3 scripts/cascade_residual.py landau 12
"""

import sys
import warnings

import numpy as np

from landau_hilbert.fluid import acoustic_state, advance_fluid
from landau_hilbert.grid import SpatialGrid, VelocityGrid
from landau_hilbert.hilbert import build_coefficients, decay_profile, expansion_residual

EPS = np.array([0.1, 0.05, 0.025])


def build(branch, k, n_v, n_x=8, n_snap=9):
    sg = SpatialGrid(n_x=n_x)
    vg = VelocityGrid(n_v=n_v, v_max=6.0)
    s0 = acoustic_state(sg, 0.05, maxwell=branch == "vml")
    dt = 0.5 * sg.spacing / vg.v_max
    traj = advance_fluid(s0, dt / 2, 2 * (n_snap - 1), sg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_coefficients(traj, sg, vg, k=k, branch=branch)


def main(branch="landau", n_v=12):
    for k in (2, 3):
        es = build(branch, k, n_v)
        res = np.array([expansion_residual(es, e, 4) for e in EPS])
        slope = np.polyfit(np.log(EPS), np.log(res), 1)[0]
        print(f"{branch} k={k} n_v={n_v}: residual {res} slope {slope:.2f} (2k-1 = {2 * k - 1})")
        print(f"  max solvability defect {np.max(es.solvability):.2e}")
        for n in range(1, es.order + 1):
            print(f"  F_{n} / sqrt(M) at |v - u| = 2, 4, 6 thermal speeds: {decay_profile(es, n, 4)}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "landau", int(sys.argv[2]) if len(sys.argv) > 2 else 12)
