"""Spectral gap of the linearized operator about the global Maxwellian, over a list of n_v.

    python3 scripts/spectral_gap.py 16 24 32
"""

import sys
import time

from landau_hilbert.diagnostics import spectral_gap
from landau_hilbert.grid import VelocityGrid
from landau_hilbert.maxwellian import GlobalMaxwellianParams


def main(sizes):
    p = GlobalMaxwellianParams(1.0)
    print("n_v,delta,n_null,null_angle,iterations,seconds")
    for n in sizes:
        started = time.time()
        g = spectral_gap(p, VelocityGrid(n_v=n, v_max=6.0))
        print(f"{n},{g.delta:.6f},{g.n_null},{g.null_angle:.3e},{g.iterations},{time.time() - started:.1f}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [16, 24])
