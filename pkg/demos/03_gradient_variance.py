"""
Where block shuffling helps
===========================

Split the per-sample gradients into consecutive blocks. Their spread splits
exactly into a within-block part and a between-block part, and a block
shuffle only sees the between-block part. The prefix average of a uniform
ordering has a closed-form second moment, which we check by brute force.
"""

import numpy as np

from shufflelab import analysis as an
from shufflelab import make_problem
from shufflelab.rngcore import SeededGenerator

problem = make_problem("logreg n=240 d=10 seed=3")
w = np.zeros(problem.d)

for b in (1, 4, 24, 120, 240):
    rep = an.variance_decomposition(problem, w, b)
    print(f"b={b:>3}  ind={rep.sigma2_ind:.5f}  within={rep.sigma2_within:.5f}  blk={rep.sigma2_blk:.5f}")

# prefix means of a uniform ordering: all 720 orders of six vectors
X = SeededGenerator(1).gaussians(6 * 3).reshape(6, 3)
print("\n k  exhaustive     closed form")
for k in range(1, 7):
    print(f"{k:>2}  {an.prefix_second_moment_exhaustive(X, k):.12f}  {an.prefix_closed_form(X, k):.12f}")

# the same quantity by sampling, for a population too big to enumerate
X = SeededGenerator(2).gaussians(50 * 3).reshape(50, 3)
est, se = an.prefix_second_moment_mc(X, 10, samples=5000, seed=4)
print(f"\nm=50, k=10: Monte Carlo {est:.5f} +/- {se:.5f}, closed form {an.prefix_closed_form(X, 10):.5f}")
