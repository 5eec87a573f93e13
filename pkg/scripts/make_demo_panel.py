#!/usr/bin/env python3
"""Generate a synthetic panel CSV plus its column-declaration config.

Writes panel.csv and cols.json into --out so the CLI can be exercised
without any proprietary data:

    python scripts/make_demo_panel.py --out demo
    galqreg fit --data demo/panel.csv --config demo/cols.json \\
        --model freq --quantiles 0.25,0.5 --draws 2000 --burnin 500 \\
        --seed 1 --out demo/fit
"""

import argparse
import json
from pathlib import Path

from galqreg.model import panel_to_csv
from galqreg.simstudy import DgpSpec, generate


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100, help="number of units")
    ap.add_argument("--t", type=int, default=5, help="observations per unit")
    ap.add_argument("--error", choices=("logistic", "normal", "gal"), default="logistic")
    ap.add_argument("--gal-gamma", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = DgpSpec(n=args.n, T=args.t, seed=args.seed, error=args.error,
                   gal_p0=0.5, gal_gamma=args.gal_gamma if args.error == "gal" else 0.0)
    data = generate(spec)
    panel_to_csv(data, out / "panel.csv")
    (out / "cols.json").write_text(
        json.dumps({"x_cols": ["x2", "x3"], "z_cols": ["const", "z2"],
                    "add_intercept": True}, indent=2),
        encoding="utf-8",
    )
    print(f"wrote {out/'panel.csv'} ({data.n} units x {args.t}) and {out/'cols.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
