"""Clause deletion on the two-variable residue of a partially fixed instance."""

import numpy as np

from densecsp.instances import gen_planted_nae3
from densecsp.localdist import from_global
from densecsp.twosat import (
    UNFIXED,
    induce_2sat,
    kprt_round,
    metric_check,
    pd_to_metric,
    twosat_brute,
    twosat_violations,
)

pl = gen_planted_nae3(9, p=0.0, seed=11)
inst = pl.instance

# pin three variables to their planted values; every clause with at most
# two unfixed variables becomes a 2-clause, a unit, or is already settled
alpha = np.full(9, UNFIXED)
alpha[[0, 1, 2]] = pl.planted[[0, 1, 2]].astype(float)
W = list(range(3, 9))
ts = induce_2sat(inst, W, alpha)
print(f"{ts.num_clauses} clauses over {ts.m} variables, {ts.dropped} settled")
print(ts.to_dimacs().splitlines()[0])

# distances between literals come straight from the pair marginals:
# d(a, b) is the probability a holds and b does not.  The family mixes the
# planted point with its complement, leaning planted
points = np.array([pl.planted, 1 - pl.planted], dtype=np.uint8)
mu = from_global(9, 3, points, np.array([7 / 8, 1 / 8]))
met = pd_to_metric(ts, mu)
print("metric feasible:", metric_check(met).passed(1e-9))
print("fractional deletion cost:", met.objective)

# ball growing around likely-true literals: each cut pays at most a
# polylog factor over the fractional deletion cost
out = kprt_round(ts, met, np.random.default_rng(0))
print("rounded violations:", twosat_violations(ts, out))

best, cnt = twosat_brute(ts)
print("brute-force minimum:", cnt)
