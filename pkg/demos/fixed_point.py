"""Resolvent bias factor c_p for a non-isotropic spectrum, and its probe deviation at finite n."""
import numpy as np

from ridgesketch import RngStream, solve_cp
from ridgesketch.det_equiv import resolvent_equivalence_test

n, p, lam = 800, 400, 0.5
ev = np.geomspace(0.2, 5, p)
fp = solve_cp(ev, n, lam)
print(f"c = {fp.c:.6f}  c' = {fp.c_prime:.6f}  residual = {fp.residual:.1e}")

Sigma = np.diag(ev)
dev = resolvent_equivalence_test(n, p, Sigma, lam, probes=10, rng=RngStream(0), replicates=10)
print(f"worst probe deviation over 10 rank-one probes: {dev:.4f}")
