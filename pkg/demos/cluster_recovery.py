"""Check how well cluster structure survives hide-then-fill.

Two well-separated blobs are trivially recoverable by k-means on complete
data (Rand index 1.0 against the true grouping). After hiding 30% of the
cells, each imputer fills the table and k-means runs again on the result.
The Rand index and silhouette then say how much of the geometry each
method preserved.

Usage:
    python3 demos/cluster_recovery.py
"""

import numpy as np

from misslab.cluster import assign_kmeans, fit_kmeans
from misslab.imputers import ImputerSpec, pool_copies, run_imputer
from misslab.metrics import clustering_metrics
from misslab.missingness import MissingnessSpec, induce_missingness

SEED = 23
PER_BLOB = 250

rng = np.random.default_rng(SEED)
lo = np.clip(rng.normal(0.2, 0.06, size=(PER_BLOB, 6)), 0.0, 1.0)
hi = np.clip(rng.normal(0.8, 0.06, size=(PER_BLOB, 6)), 0.0, 1.0)
truth = np.vstack([lo, hi])
labels = np.repeat([0, 1], PER_BLOB)

model = fit_kmeans(truth, k=2, seed=SEED)
clean = clustering_metrics(truth, assign_kmeans(model, truth), labels)
print(f"complete data: rand {clean['rand']:.3f}, "
      f"silhouette {clean['silhouette']:.3f}")

induced = induce_missingness(truth, MissingnessSpec(scheme="MCAR", degree=0.3),
                             seed=SEED)
print(f"hidden cells: {induced.mask.sum()} of {truth.size} "
      f"({100 * induced.realized_fraction:.1f}%)\n")

print("  fill method   rand   silhouette")
for method in ("mean", "knn", "mice", "missforest"):
    spec = ImputerSpec(kind=method, copies=2, sweeps=5, seed=SEED)
    filled = pool_copies(run_imputer(induced.holed, spec))
    model = fit_kmeans(filled, k=2, seed=SEED)
    m = clustering_metrics(filled, assign_kmeans(model, filled), labels)
    print(f"  {method:<12} {m['rand']:.3f}   {m['silhouette']:.3f}")

# Rand stays at 1.0 as long as no point crosses the midplane; the
# silhouette is the sensitive number. Mean filling drags every hidden cell
# to the global column average, midway between the blobs, and the smear
# shows. Neighborhood-based fills move cells toward their local center
# instead, which can even tighten the blobs slightly past the clean score.
