#!/usr/bin/env python3
"""Write a demo density pair for the CLI walkthrough in the README."""

import argparse
from pathlib import Path

from planar_mk.density_io import write_density_json
from planar_mk.instances import gaussian_2d
from planar_mk.measures import Grid1D


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo", help="where to write f.json and g.json")
    ap.add_argument("--n", type=int, default=16, help="cells per axis")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid1D.uniform(0.0, 1.0, args.n)
    f = gaussian_2d(grid, grid, mean=(0.45, 0.45), sigma=(0.24, 0.2), rho=0.45)
    g = gaussian_2d(grid, grid, mean=(0.55, 0.55), sigma=(0.2, 0.24), rho=-0.35)
    write_density_json(out / "f.json", f)
    write_density_json(out / "g.json", g)
    print(f"wrote {out/'f.json'} and {out/'g.json'} ({args.n}x{args.n})")


if __name__ == "__main__":
    main()
