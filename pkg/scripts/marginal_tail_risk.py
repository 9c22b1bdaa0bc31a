"""Chance that an exact sampler breaks the per-site 5-sd rule at t = 2, 5, 10.

Sums, over sites and times, the exact binomial probability that the empirical
frequency leaves p +- 5 sqrt(p(1-p)/n). Sites with n p << 1 dominate.

    python scripts/marginal_tail_risk.py [n_traj]
"""

import sys

import numpy as np
from scipy.stats import binom

from kickback_walk.hamiltonian import build_reduced
from kickback_walk.lattice import ChainConfig
from kickback_walk.propagator import initial_state

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
for chain in (ChainConfig(25, 11, 13), ChainConfig(25, 11, 13, free=True)):
    h = build_reduced(chain)
    psi0 = initial_state(h.indexing).amplitudes
    expected = 0.0
    for t in (2.0, 5.0, 10.0):
        p = np.abs(h.spectrum.propagate(psi0, np.array([t]))[0]) ** 2
        sd = 5 * np.sqrt(p * (1 - p) / n)
        hi, lo = np.floor(n * (p + sd)), np.ceil(n * (p - sd))
        expected += float(np.sum(binom.sf(hi, n, p) + binom.cdf(lo - 1, n, p)))
    label = "free" if chain.free else "interacting"
    print(f"{label}: expected violations {expected:.3f}, P(no violation) ~ {np.exp(-expected):.3f}")
