# # Throughput against network size
#
# A cut-down version of the fig5 preset: fewer replicates and supertime slots
# so it finishes in about a minute.  The full sweep is
# `mcast-sim sweep --preset fig5 --out f5.csv`.

# +
import numpy as np

from dcmcast.harness import fit_alpha, preset_spec, run_sweep, scaling_abscissa, summarize

spec = preset_spec("fig5", ["iid", "walk"], replicates=2, supertime_count=2)
records = run_sweep(spec)
table = summarize(records)
print(" n_s   iid     walk   model x")
for n_s in spec.values:
    x = float(scaling_abscissa(n_s, 100))
    print(f"{n_s:5d} {table[(n_s, 'iid')].mean:6.2f} {table[(n_s, 'walk')].mean:7.2f} {x:8.1f}")
# -

# Fit throughput = alpha * 2D sqrt(2D / n_s) through the origin.

# +
for m in ("iid", "walk"):
    fit = fit_alpha(records, m)
    print(m, "alpha = %.4f" % fit.alpha, "relative residuals", np.round(fit.residuals, 3))
# -

# Bigger networks deliver fewer packets per session, roughly like one over
# the square root of n_s, and the walk model trails the i.i.d. one because
# relays cannot reach far-away destinations within the deadline.
