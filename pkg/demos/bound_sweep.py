"""How the high-probability error bound shrinks with the sample size.

Evaluates the itemised bound for a fixed architecture over a grid of n
(with as many latent draws as data points) and prints each term.  The last
column rescales the total by sqrt(n).  In one dimension every term decays at
least as fast as n^(-1/2), so the rescaled total stays level.
"""

import math

from momgan.bounds import BoundInputs, capacity_max_n, failure_probability, theorem_total_bound

base = BoundInputs(n=100, m=100, p=1, K=64, N_G=16, L_G=4, N_D=16, L_D=3, sigma=0.5, t=math.log(100))
print("the generator can interpolate up to n =", capacity_max_n(base.N_G, base.L_G, base.p, base.eps))
prob = failure_probability(base.K, 1.0, base.t)
print(f"guarantee holds with probability {prob.probability:.3f} (vacuous: {prob.vacuous})\n")

names = list(theorem_total_bound(base).terms)
print(f"{'n':>9} " + " ".join(f"{k[:13]:>13}" for k in names) + f" {'total':>9} {'total*sqrt(n)':>13}")
for k in range(2, 7):
    n = 10**k
    rep = theorem_total_bound(BoundInputs(**{**base.__dict__, "n": n, "m": n}))
    cells = " ".join(f"{rep.terms[name]:13.3e}" for name in names)
    print(f"{n:>9d} {cells} {rep.total:9.4f} {rep.total * math.sqrt(n):13.2f}")
