"""Median-of-means against the sample mean under gross contamination.

Draws standard-normal inliers, overwrites a few blocks with huge values and
tracks both estimators as the number of corrupted blocks grows.  MoM holds
until the corrupted blocks become a majority.
"""

from momgan.mom import block_means, mom, partition
from momgan.numerics import make_rng

n, K = 1050, 21
rng = make_rng(0)

print(f"n={n}, K={K} blocks of {n // K}")
print(f"{'bad blocks':>10} {'sample mean':>14} {'MoM':>10}")
for n_bad in range(0, K + 1, 2):
    x = rng.standard_normal(n)
    part = partition(n, K, rng)
    bad = rng.choice(K, size=n_bad, replace=False)
    x[part.blocks[bad].ravel()] = 1e6
    value, med = mom(x, part)
    print(f"{n_bad:>10d} {x.mean():>14.2f} {value:>10.4f}")

# the median block is one of the clean ones whenever they are a majority
x = rng.standard_normal(n)
part = partition(n, K, rng)
bad = rng.choice(K, size=K // 2, replace=False)
x[part.blocks[bad].ravel()] = 1e6
value, med = mom(x, part)
means = block_means(x, part)
print(f"\nwith {K // 2} bad blocks the median block is #{med} "
      f"(clean: {med not in bad}), mean {means[med]:.4f}")
