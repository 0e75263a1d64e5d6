"""Generating complete not-all-equal instances and evaluating assignments."""

import numpy as np

from densecsp.exact import brute_opt
from densecsp.instances import (
    gen_planted_nae3,
    gen_random_nae3,
    read_instance,
    val_assignment,
    write_instance,
)

# a complete instance places one clause on every triple of variables;
# only the polarity pattern is random
inst = gen_random_nae3(10, seed=7)
print(f"n={inst.n}, m={inst.m}, complete={inst.complete}")

# values are violated fractions, so 0 means satisfied
alpha = np.zeros(10, dtype=np.uint8)
print("all-zeros value:", val_assignment(inst, alpha))

best, opt = brute_opt(inst)
print("optimum:", opt, "at", "".join(map(str, best)))

# flipping every bit never changes the value: a not-all-equal clause
# cannot tell an assignment from its complement
print("complement value:", val_assignment(inst, 1 - best))

# planted generation corrupts a known assignment on a p fraction of
# clauses, certifying an upper bound on the optimum
pl = gen_planted_nae3(12, p=0.05, seed=3)
print(
    f"\nplanted n=12: {pl.violated_count} of {pl.instance.m} clauses broken, "
    f"so OPT <= {pl.violated_count / pl.instance.m:.4f}"
)

# the text format round-trips exactly
text = write_instance(pl.instance)
print("\nfirst lines of the on-disk form:")
print("\n".join(text.splitlines()[:4]))
again = read_instance(text)
assert np.array_equal(again.neg, pl.instance.neg)
print("round trip ok")
