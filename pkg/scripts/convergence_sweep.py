"""Hydrodynamic-limit sweep over eps, writing CSVs and a summary through the CLI.

    python3 scripts/convergence_sweep.py landau out_landau
    python3 scripts/convergence_sweep.py vml out_vml --n-x 16 --n-v 16
"""

import argparse
import json

from landau_hilbert.cli import RunConfig, run_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("branch", choices=["landau", "vml"])
    ap.add_argument("out")
    ap.add_argument("--n-x", type=int, default=32)
    ap.add_argument("--n-v", type=int, default=24)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--remainder", action="store_true")
    a = ap.parse_args(argv)
    cfg = RunConfig(
        branch=a.branch,
        eps=tuple(sorted(a.eps, reverse=True)),
        n_x=a.n_x,
        n_v=a.n_v,
        t_end=a.t_end,
        remainder=a.remainder,
        horizon="cap" if a.branch == "vml" else "t_e",
    )
    summary = run_sweep(cfg, a.out)
    print(json.dumps({k: v for k, v in summary.items() if k != "events"}, indent=2))


if __name__ == "__main__":
    main()
