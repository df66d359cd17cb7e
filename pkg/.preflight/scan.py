import time
import numpy as np
from zenochain import engine

grid = tuple(0.5 + 0.25 * k for k in range(13))
jobs = [
    (6,  1000, grid),
    (8,  1000, grid),
    (10, 500,  grid),
    (12, 300,  grid),
]
for L, n, g in jobs:
    t0 = time.time()
    cfg = engine.ProtocolConfig(L=(L,), V=1.0, g_grid=g, n_traj=n, seed=1234 + L)
    res = engine.run_sweep(cfg, workers=1)
    engine.save_sweep(res, f"/root/pkg/.preflight/L{L}")
    print(f"L={L} n={n}: {time.time()-t0:.0f}s", flush=True)
    for c in res.cells:
        print(f"  g={c.g:4.2f} S={c.stats.s_mean:.4f} dS={c.stats.s_std:.4f} mix={c.stats.mixedness_mean:.4f}", flush=True)
