"""Constrained probabilistic allocation toolkit.

Implements eating-style allocation rules over arbitrary finite unions of
polytopes (the vigilant eating rule and the vigilant priority rule), baseline
mechanisms (probabilistic serial, deferred acceptance, random priority),
builders for stability-constrained feasible sets, and exact property oracles
for efficiency, fairness, and probabilistic stability.
"""

from .model import (
    Allocation,
    Dominance,
    GuaranteeTable,
    Instance,
    SignatureVector,
    WeakOrder,
    as_fraction,
    dl_dominates,
    make_instance,
    sd_dominates,
    signature,
)

__all__ = [
    "Allocation",
    "Dominance",
    "GuaranteeTable",
    "Instance",
    "SignatureVector",
    "WeakOrder",
    "as_fraction",
    "dl_dominates",
    "make_instance",
    "sd_dominates",
    "signature",
]

__version__ = "0.1.0"
