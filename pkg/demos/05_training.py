"""
Training with different orderings
=================================

Logistic regression on a synthetic problem, 30 epochs of mini-batch SGD per
scheme, same initial point for all. We print the best-so-far loss.
"""

from shufflelab import OptimizerConfig, make_problem, make_scheme, run_trial

problem = make_problem("logreg n=2000 d=20 seed=0")
config = OptimizerConfig(gamma0=0.05, batch_size=64, epochs=30)

for name in ("ig", "so", "rr", "block:0.1", "apr"):
    rec = run_trial(problem, make_scheme(name, base_seed=5), config, init_seed=1)
    print(f"{name:>10}: best {rec.best:.6f}   after 1/10/30 epochs "
          f"{rec.per_epoch_loss[0]:.5f} {rec.per_epoch_loss[9]:.5f} {rec.per_epoch_loss[-1]:.5f}")

# a diminishing schedule and Adam run through the same loop
poly = OptimizerConfig(gamma0=0.5, schedule="poly", alpha=0.5, batch_size=64, epochs=30)
adam = OptimizerConfig(kind="adam", gamma0=1e-3, batch_size=64, epochs=30)
print("\nrr, poly schedule:", f"{run_trial(problem, make_scheme('rr', 5), poly, 1).best:.6f}")
print("rr, adam         :", f"{run_trial(problem, make_scheme('rr', 5), adam, 1).best:.6f}")
