# %% [markdown]
# # Particles against the density
#
# The finite system of `N` firms is driven by the same common-noise path as
# the density solver. The sup-in-time loss error should fall as `N` grows.

# %%
import numpy as np

from mfcontagion.config import parse_config
from mfcontagion.experiments import run_coupled

cfg = parse_config(
    """
    alpha = 1
    rho = 0.5
    init = dirac:2.0
    t_final = 1
    dt = 0.002
    dx = 0.002
    upper = 6
    common_seed = 3
    idio_seed = 4
    """
)

# %%
report = run_coupled(cfg, (100, 1000, 10000), n_seeds=8)
report.to_csv("convergence.csv")
for r in report.rows:
    print(f"N={r.n:>6}  median={r.median:.4f}  iqr={r.iqr:.4f}")

# %% [markdown]
# A slope near `-1/2` on log-log axes is the Monte Carlo rate.

# %%
n = np.array([r.n for r in report.rows], dtype=float)
slope = np.polyfit(np.log(n), np.log(report.medians()), 1)[0]
round(float(slope), 2)
