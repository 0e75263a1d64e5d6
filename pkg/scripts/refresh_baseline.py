"""Regenerate tests/baselines/e2e_baseline.json.

Mirrors the grid in the acceptance suite's end-to-end fixture.  Run only
when a deliberate pipeline change shifts the expected ratios; the new file
must be committed next to the tests.
"""

import json
import time
from itertools import product
from pathlib import Path

import numpy as np

from densecsp.cli import effective_degree
from densecsp.instances import gen_planted_nae3, val_assignment
from densecsp.relaxation import build_sa_lp, lp_to_pd, solve_lp
from densecsp.rounding import RoundingConfig, round_pd


def main() -> None:
    rows = []
    for n, p, seed in product((20, 30, 40), (0.01, 0.05), (0, 1)):
        inst = gen_planted_nae3(n, p, seed).instance
        degree = effective_degree(n, 6, 400_000)
        t0 = time.perf_counter()
        prob = build_sa_lp(inst, degree)
        sol = solve_lp(prob)
        mu = lp_to_pd(prob, sol)
        cfg = RoundingConfig.for_instance(n, seed=seed)
        alpha, trace = round_pd(inst, mu, cfg)
        wall = time.perf_counter() - t0
        val = val_assignment(inst, alpha)
        ratio = val / max(sol.objective, 1.0 / inst.m)
        rows.append(
            {
                "n": n,
                "p": p,
                "seed": seed,
                "degree_effective": degree,
                "lp": sol.objective,
                "val": val,
                "ratio": ratio,
                "stages": trace.depth,
                "wall_time_s": round(wall, 2),
            }
        )
        print(f"n={n} p={p} seed={seed}: ratio {ratio:.4f} in {wall:.1f}s")

    out = {
        "median_ratio": float(np.median([r["ratio"] for r in rows])),
        "runs": rows,
    }
    path = Path(__file__).resolve().parent.parent / "tests" / "baselines" / "e2e_baseline.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"median ratio {out['median_ratio']:.4f} -> {path}")


if __name__ == "__main__":
    main()
