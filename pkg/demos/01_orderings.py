"""
Data orderings for one epoch
============================

Every scheme hands the training loop one permutation per epoch. Here we
print a few epochs of each one on n = 12 so the structure is visible.
"""

import numpy as np

from shufflelab import make_scheme, next_permutation
from shufflelab.shuffling import block_concatenate, even_odd_interleave, reverse

n = 12

# incremental gradient never moves; shuffle-once draws once and keeps it;
# random reshuffling draws afresh every epoch
for name in ("ig", "so", "rr", "block:3"):
    scheme = make_scheme(name, base_seed=2024)
    print(f"{name:>8}:")
    for e in range(3):
        print("          ", next_permutation(scheme, n, e))

# block reshuffling keeps each run of b consecutive indices together and only
# permutes the order of the runs; a ragged last block stays short
print("\nblocks of 2 on n=5, block order (2, 0, 1):", block_concatenate(5, 2, [2, 0, 1]))

# the two transforms APR applies on a schedule
pi = np.arange(7)
print("reverse     :", reverse(pi))
print("even-odd    :", even_odd_interleave(pi))

# paired reversal: every second epoch replays the previous order backwards
pr = make_scheme("pr:rr", base_seed=7)
print("\npaired reversal:")
for e in range(4):
    print("          ", next_permutation(pr, n, e))
