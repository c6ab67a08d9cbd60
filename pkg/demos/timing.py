"""Wall-clock of ridge against primal and dual sketched solves."""
from ridgesketch import RngStream, SketchSpec, timing_benchmark

specs = [SketchSpec(kind, fam, 0.25) for kind in ("primal", "dual") for fam in ("subsample", "srht", "haar")]
table = timing_benchmark(2000, 200, specs, repeats=3, rng=RngStream(0))
for row in table.rows:
    print(f"{row['estimator']:18s} {row['seconds_mean'] * 1e3:8.2f} ms  (sd {row['seconds_std'] * 1e3:.2f})")
