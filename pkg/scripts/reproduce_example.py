"""Prices and exercise boundaries for the reference setup.

Reference setup: T_0 = 1, four semiannual payments, K = 0.05, theta = 2.55,
kappa = 0.03, alpha = theta * kappa, constant sigma, at-the-money start
(swap rate 0.05 at t = 0).

    python scripts/reproduce_example.py --sigma 0.5 --n-steps 200
"""

import argparse
import time

import numpy as np

from lrswaption.american import SolverConfig, american_price, solve_boundary
from lrswaption.bermudan import LatticeSpec, bermudan_price, european_price
from lrswaption.lsm import LSMConfig, exercise_schedule, lsm_price
from lrswaption.model import invert_swap_rate, reference_params, reference_swap
from lrswaption.payoff import build_payoff_table


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--n-steps", type=int, default=200, help="Volterra time steps on [T_0, T_n]")
    ap.add_argument("--n-x", type=int, default=2806, help="Bermudan lattice nodes")
    ap.add_argument("--paths", type=int, default=100_000, help="LSM paths, 0 to skip")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--notional", type=float, default=1.0)
    args = ap.parse_args(argv)

    p = reference_params(args.sigma)
    x0 = invert_swap_rate(p, reference_swap(), 0.0, 0.05)
    p = p.replace(x0=x0)
    print(f"x0 from swap rate 0.05: {x0:.6f}")
    lattice = LatticeSpec(n_x=args.n_x)
    for side in ("payer", "receiver"):
        spec = reference_swap(side, notional=args.notional)
        table = build_payoff_table(p, spec)
        start = time.perf_counter()
        bnd = solve_boundary(table, SolverConfig(n_steps=args.n_steps))
        rows = [("european", european_price(table, 0.0)),
                ("bermudan, payment dates", bermudan_price(table, spec.dates, lattice=lattice).price),
                ("bermudan, weekly", bermudan_price(table, exercise_schedule(spec, 52), lattice=lattice).price),
                ("american", american_price(bnd, 0.0, x0))]
        if args.paths:
            res = lsm_price(table, LSMConfig(n_paths=args.paths, seed=args.seed))
            rows.append((f"lsm weekly (+- {res.stderr:.1e})", res.price))
        print(f"\n{side} swaption at t = 0 ({time.perf_counter() - start:.1f} s)")
        for name, v in rows:
            print(f"  {name:<28s} {v:.6f}")
        print("  boundary at payment dates:")
        for t in spec.dates:
            k = int(np.argmin(np.abs(bnd.grid - t)))
            print(f"    t = {t:.2f}  x = {bnd.values[k]:.6f}  swap rate = {bnd.rate[k]:.6f}")


if __name__ == "__main__":
    main()
