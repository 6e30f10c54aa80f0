"""
How much does the order matter?
===============================

One epoch of single-sample SGD is a map from the starting point to the end
point. Two orders give end points that differ at second order in the step
size. Averaging an order with its reversal cancels that term and leaves a
third-order gap.
"""

import numpy as np

from shufflelab import analysis as an
from shufflelab import QuadLinInstance, random_quadratic_ensemble

# two components: f1 = x^2 (a=2) and f2 = 3x (b=3)
q = QuadLinInstance(2.0, 3.0)
print("gamma     |T(2,1) - T(1,2)|    6 gamma^2")
for g in (1e-1, 1e-2, 1e-3, 1e-4):
    print(f"{g:<8g}  {an.order_sensitivity(q, [1.0], [1, 0], [0, 1], g):.6e}   {6 * g * g:.6e}")

# a random quadratic ensemble, plain and paired-reversal sensitivity
p = random_quadratic_ensemble(4, 3, seed=6)
w = np.ones(3)
pi, pi2 = [0, 1, 2, 3], [2, 0, 3, 1]
grid = an.gamma_grid(0.02, 5)
plain = [(g, an.order_sensitivity(p, w, pi, pi2, g)) for g in grid]
paired = [(g, an.order_sensitivity(p, w, pi, pi2, g, symmetrized=True)) for g in grid]
print("\nlog-log slope, plain :", round(an.fit_loglog_slope(plain)[0], 3))
print("log-log slope, paired:", round(an.fit_loglog_slope(paired)[0], 3))

# spread of the end point over all 24 orders
print("\ngamma     Var(T)         Var(T paired)")
for g in grid[:4]:
    print(f"{g:<8g}  {an.permutation_variance(p, w, g):.4e}   {an.permutation_variance(p, w, g, symmetrized=True):.4e}")

# the second-order terms of an order and its reversal always add up to the same thing
target = an.reversal_pair_term(p, w)
print("\nB(pi) + B(rev pi) - sum_{i!=j} H_i g_j:",
      an.second_order_term(p, w, pi) + an.second_order_term(p, w, pi[::-1]) - target)

# the third-order remainder sits well inside its bound
c = an.quadratic_smoothness(p, w, 0.02)
rep = an.epoch_map_exact(p, w, pi, 0.02, c)
print(f"remainder {rep.remainder_norm:.3e} <= bound {rep.remainder_bound:.3e}")
