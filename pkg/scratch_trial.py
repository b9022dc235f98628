"""Scratch: full trial at desk scale, inspect sensing accuracy."""
import time

import numpy as np
import threadpoolctl

threadpoolctl.threadpool_limits(limits=1)

from fdisac.config import SimConfig
from fdisac.harness import run_trial

cfg = SimConfig(n_symbols=56)
t0 = time.time()
for k in range(6):
    r = run_trial(cfg, k)
    print(
        f"trial {k}: dl {r.dl_se_sum:6.2f} ul {r.ul_se_sum:6.2f} bound {r.dl_su_bound:6.2f} "
        f"| si {r.si_initial_db:6.1f}->{r.si_final_db:7.1f} "
        f"| ang err {r.angle_error_deg:6.3f} deg (init {np.rad2deg(abs(r.angle_initial-r.angle_true)):.3f}) "
        f"| rng {r.range_true:5.1f}->{r.range_est:5.1f} (bin {r.range_bin:.2f}) "
        f"| vel {r.velocity_true:5.1f}->{r.velocity_est:6.1f} (bin {r.velocity_bin:.2f}) "
        f"| ratio {r.peak_ratio:5.1f} masked {r.masked_count}"
    )
print(f"total {time.time()-t0:.1f}s for 6 trials (N=56)")
