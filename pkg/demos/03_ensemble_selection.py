"""Choosing the ensemble size without labels, and checking the choice.

Selection looks only at predictions: how much the top-K members disagree
(V) and how alike they look (R). Adding noisy members raises V but lowers
R, so the two terms pull in opposite directions and the label-free K* is
a compromise, not an oracle. The tables put it next to the test MSE of
every candidate and the bias/variance/covariance split of that MSE.
"""

import numpy as np

from bttf import KGrid, decompose_error, evaluate, select_k

rng = np.random.default_rng(11)
truth = rng.normal(size=(200, 12))


def pool(n_good, n_bad, shared=0.3):
    """Ranked predictions: good members first, sharing part of their error."""
    common = shared * rng.normal(size=truth.shape)
    good = [truth + common + 0.2 * rng.normal(size=truth.shape) for _ in range(n_good)]
    bad = [truth + 1.5 * rng.normal(size=truth.shape) for _ in range(n_bad)]
    return np.stack(good + bad)


for label, P in (("10 good, 10 noisy", pool(10, 10)),
                 ("20 good", pool(20, 0)),
                 ("5 good, 15 noisy", pool(5, 15))):
    grid = KGrid(5, len(P))
    sel = select_k(P, grid)
    print(f"\n{label}: K* = {sel.K}")
    print("   K       V       R       S   test MSE  bias^2   var/K  cov term")
    for st in sel.stats:
        d = decompose_error(P, truth, st.K)
        mse = evaluate(P[:st.K].mean(axis=0), truth).mse
        mark = "*" if st.K == sel.K else " "
        print(f"{mark}{st.K:>3}  {st.V:6.3f}  {st.R:6.3f}  {st.S:6.3f}  {mse:8.4f}  "
              f"{d.bias_sq:6.4f}  {d.variance_term:6.4f}  {d.covariance_term:8.4f}")

# When members share most of their error, averaging more of them stops
# helping: the covariance term dominates and stays put as K grows.
P = pool(20, 0, shared=1.0)
for K in (1, 5, 20):
    d = decompose_error(P, truth, K)
    print(f"\nshared error, K={K:>2}: mse {d.measured_mse:.3f} = "
          f"{d.bias_sq:.3f} + {d.variance_term:.3f} + {d.covariance_term:.3f}", end="")
print()
