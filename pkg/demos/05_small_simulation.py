"""A reduced run of the clustered-signal comparison.

One cluster of nine +-1 coefficients on a line of 100 covariates, n = 100,
unit noise.  Twenty replicates instead of 250 to keep the run short; the
command line tool runs the full protocol.  The second setting places two
2 x 2 blocks on a 10 x 10 lattice; with clusters this small and ten replicates
the two priors are close and either may come out ahead.
"""
from structagg import SimSpec, run_comparison

spec = SimSpec(n=100, M=100, C=1, C_on=9, reps=20, seed=0)
summary = run_comparison(spec, ["spa", "ssa", "stepwise"], jobs=2)
print(summary.to_text())
print("\nSSA beats SPA on prediction in", f"{summary.paired_win('ssa'):.0%}", "of replicates")

spec = SimSpec(n=100, M=100, C=2, C_on=4, geometry="lattice", reps=10, seed=1)
print()
print(run_comparison(spec, ["spa", "ssa"], jobs=2).to_text())
