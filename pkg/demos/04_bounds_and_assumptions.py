"""Risk bounds and the conditions behind them.

The count bound charges ``min(sigma^2 R / n, 9 sigma^2 k log(1 + eC/k) / n)``
for a comparator of complexity k.  Under the cluster prior, k is the number
of selected covariates plus the number of clusters they form, so a single
block costs one extra unit while scattered covariates double their price.
"""
import numpy as np

from structagg import (BoundInputs, Dataset, DistanceSpec, GroupStructure, PenaltySpec,
                       PriorSpec, bound_prop1, bound_report, check_assumption_grouped,
                       check_assumption_penalized, exact_aggregate)

# large n and M, where the sparse term is the smaller branch of the minimum
n = M = 1000
for label, k in (("9 covariates, plain count", 9), ("one block of 9", 10),
                 ("9 isolated covariates", 18)):
    b = BoundInputs(fit_term=0.0, sigma2=1.0, n=n, M=M, R=M, C=M, complexity=k)
    print(f"{label:<28} k = {k:>2}  remainder {bound_prop1(b):.4f}")

# a small problem where the bound can be compared with what the aggregate achieves
rng = np.random.default_rng(7)
n, M = 50, 12
X = rng.standard_normal((n, M))
beta_bar = np.zeros(M)
beta_bar[4:8] = 1.0
y = X @ beta_bar + rng.standard_normal(n)
data = Dataset(y, X)
ssa = PriorSpec.ssa(PenaltySpec.clusters(DistanceSpec.line(M), 3))
for name, prior in (("spa", PriorSpec.spa(M)), ("ssa", ssa)):
    rep = bound_report(data, beta_bar, 1.0, prior)
    fit = exact_aggregate(data, prior, 1.0)
    lhs = np.sum((X @ fit.beta - y) ** 2) / n
    print(f"\n{name}: complexity {rep['complexity']:.0f}, count bound {rep['count_bound']:.3f}, "
          f"norm bound {rep['norm_bound']:.3f}, training fit of the aggregate {lhs:.3f}")
# here sigma^2 R / n = 0.24 is the smaller branch, so both priors share one bound

scattered = np.zeros(M)
scattered[[0, 4, 8]] = 1.0
print("three covariates four apart, cluster complexity:",
      bound_report(data, scattered, 1.0, ssa)["complexity"])

print("\nassumption scans over all 2^10 patterns")
for pen in (PenaltySpec.clusters(DistanceSpec.line(10), 3),
            PenaltySpec.weights(np.full(10, 0.5)),
            PenaltySpec.cut(DistanceSpec(positions=5.0 * np.arange(10)[:, None]))):
    print(f"  {pen.variant:>8}:", check_assumption_penalized(PriorSpec.ssa(pen)).summary())

wide = GroupStructure([list(range(5 * k, 5 * k + 5)) for k in range(4)])
print("  groups of five:", check_assumption_grouped(PriorSpec.gsa(wide)).summary())
