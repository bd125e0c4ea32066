"""Plot-data CSVs for the reference setup.

Writes into ``--out``:

- zero_curves.csv      t, g, h (zero crossings of the gain and benefit coefficients)
- boundary_payer.csv   t, g, h, boundary, swaprate_boundary
- boundary_receiver.csv
- swaprate_boundaries.csv   t, payer, receiver (exercise boundaries in swap-rate terms)
- prices_vs_x.csv      x, european, bermudan, american (payer, t = 0, payment-date Bermudan)

    python scripts/export_figure_data.py --out figdata
"""

import argparse
from pathlib import Path

import numpy as np

from lrswaption.american import SolverConfig, american_price, solve_boundary
from lrswaption.bermudan import LatticeSpec, bermudan_value, split_expectation, european_price
from lrswaption.cli import boundary_rows, write_csv
from lrswaption.density import TransformContext
from lrswaption.model import discount, invert_swap_rate, reference_params, reference_swap
from lrswaption.payoff import build_payoff_table, zero_curves


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("figdata"))
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--n-steps", type=int, default=200)
    ap.add_argument("--n-x", type=int, default=1400)
    ap.add_argument("--x-points", type=int, default=25, help="factor values for the price curves")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    p = reference_params(args.sigma)
    p = p.replace(x0=invert_swap_rate(p, reference_swap(), 0.0, 0.05))
    tables = {side: build_payoff_table(p, reference_swap(side)) for side in ("payer", "receiver")}
    bnds = {side: solve_boundary(t, SolverConfig(n_steps=args.n_steps)) for side, t in tables.items()}

    spec = reference_swap()
    ts = np.linspace(spec.t0, spec.tn, 801)
    write_csv(args.out / "zero_curves.csv", ["t", "g", "h"],
              [(float(t), *zero_curves(tables["payer"], float(t))) for t in ts])
    for side, bnd in bnds.items():
        write_csv(args.out / f"boundary_{side}.csv", ["t", "g", "h", "boundary", "swaprate_boundary"],
                  boundary_rows(bnd))
    pay, rec = bnds["payer"], bnds["receiver"]
    write_csv(args.out / "swaprate_boundaries.csv", ["t", "payer", "receiver"],
              zip(pay.grid, pay.rate, np.interp(pay.grid, rec.grid, rec.rate)))

    # one backward induction, then the t = 0 expectation for each starting factor
    table = tables["payer"]
    nodes, _, cont, _ = bermudan_value(table, spec.dates, LatticeSpec(n_x=args.n_x))
    ctx = TransformContext(p, 0.0, spec.t0)
    xs = np.linspace(0.2, 1.6, args.x_points)
    rows = []
    for x in xs:
        vb = split_expectation(table, ctx, float(x), nodes, cont, "payer")[0] / (1 + x)
        rows.append((float(x), european_price(table, 0.0, float(x)), max(vb, 0.0) / discount(p, 0.0),
                     american_price(pay, 0.0, float(x))))
    write_csv(args.out / "prices_vs_x.csv", ["x", "european", "bermudan", "american"], rows)
    print(f"wrote plot data to {args.out}")


if __name__ == "__main__":
    main()
