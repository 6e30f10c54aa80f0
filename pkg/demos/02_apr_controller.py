"""
The APR controller
==================

APR looks at the ratio of the latest training loss to the previous one and
picks a regime: small blocks when the loss is falling fast, larger blocks
when it falls slowly, and plain uniform shuffles otherwise. Reversal and
even-odd interleaving are switched on periodically.
"""

from shufflelab import AprParams, AprState, apr_next_permutation

params = AprParams()
print(params)
print("block sizes for n=40 (strong, mild):", params.block_sizes(40))

# a hand-made loss sequence that visits every branch
losses = [1.0, 0.5, 0.6, 0.3, 0.285, 0.3, 0.15, 0.3, 0.25, 0.24, 0.5]

state = AprState(params, base_seed=11)
print(f"\n{'epoch':>5} {'loss':>6} {'ratio':>7}  regime    transform  first entries")
for e, loss in enumerate(losses):
    pi = apr_next_permutation(state, 40, loss)
    rho = "-" if state.last_rho is None else f"{state.last_rho:.3f}"
    print(f"{e:>5} {loss:>6} {rho:>7}  {state.last_regime:<9} {state.last_transform or '':<10} {pi[:10]}")

# a ratio exactly at a threshold falls to the gentler branch
from shufflelab.shuffling import apr_regime

print("\nratio 0.9 ->", apr_regime(0.9, params), "; ratio 1.0 ->", apr_regime(1.0, params))
