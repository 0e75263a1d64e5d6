"""Relax-and-round toolkit for complete constraint satisfaction instances.

The pipeline: generate or load a ternary not-all-equal instance
(:mod:`densecsp.instances`), lift it to a bounded-degree family of local
distributions via a linear relaxation (:mod:`densecsp.relaxation`), then
round the family to a single assignment (:mod:`densecsp.rounding`), with a
metric-based fallback for states that are already far from satisfiable
(:mod:`densecsp.twosat`).  Complete k-ary instances with few satisfying
assignments can instead be decided exactly (:mod:`densecsp.decide`), and
everything is measured against enumeration (:mod:`densecsp.exact`).
"""

__version__ = "0.1.0"
