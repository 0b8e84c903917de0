# # Capacity bounds and the Monte Carlo checks behind them
#
# All logs are natural and every hidden constant is set to one, so the regime
# boundaries are order-of-magnitude markers.

# +
import numpy as np

from dcmcast import analysis

for D in (2, 10, 100, 1000):
    r = analysis.capacity_regime(analysis.BoundParams(10**6, 10, D))
    print(f"D={D:5d}  t1={r.t1:6.2f}  t2={r.t2:7.1f}  -> {r}")
# -

# ## The virtual-channel heuristic
#
# Maximize the smaller of the relay and receiving channel rates over the two
# radii.  The optimum tracks sqrt(D / n_s).

# +
for n_s, D in [(10**4, 100), (10**4, 400), (10**5, 100)]:
    h = analysis.heuristic_capacity(n_s, 10, D)
    print(f"n_s={n_s:6d} D={D:3d}: lambda*={h.capacity:.4f}  sqrt(D/n_s)={np.sqrt(D / n_s):.4f}  "
          f"L1*sqrt(n_s)={h.L1 * np.sqrt(n_s):.3f}")
# -

# ## Relaying beats direct delivery

# +
b = analysis.BoundParams(500, 10, 100)
print("no relay %.4g  relay %.4g" % (analysis.lambda_ceiling_no_relay(b), analysis.lambda_ceiling_relay(b)))
# -

# ## Balls in bins
#
# Each round drops one ball into each of m distinct bins.

# +
r = analysis.balls_bins_nonempty(100, 10, 10, trials=20_000)
print("closed form %.3f, simulated %.3f +- %.3f" % (r.expected, r.mc_mean, r.mc_std))
print("P(N >= 0.9 E) = %.4f, Chernoff floor %.4f" % (r.concentration_freq, r.chernoff_floor))
# -

# ## Crowded destinations
#
# How often does a destination find too many session-mates close by?

# +
for n_s, p, gamma in [(100, 10, 0.05), (50, 20, 0.05)]:
    kappa = analysis.kappa_min(gamma, n_s, p)
    est = analysis.cluster_exceedance_mc(n_s, p, gamma, kappa, 20, analysis.OracleConfig(trials=100))
    print(f"({n_s}, {p}, {gamma}): kappa={kappa:.4f} threshold={est.threshold:.1f} "
          f"exceedances={est.exceedances}  mean H={est.mean_h:.4f} vs {est.expected_h:.4f}")
