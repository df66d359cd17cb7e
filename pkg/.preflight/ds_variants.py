"""Which fluctuation measure peaks in the transition region?

(a) std over realizations of the window-averaged S      [current]
(b) pooled std of all window samples over time+realizations
(c) mean over realizations of each trajectory's temporal std
(d) temporal std of the ensemble-mean S(t) inside the window
"""
import time
import numpy as np
from zenochain import engine

grid = tuple(0.5 + 0.25 * k for k in range(13))
for L, n in ((8, 500), (10, 300)):
    t0 = time.time()
    cfg = engine.ProtocolConfig(L=(L,), V=1.0, g_grid=grid, n_traj=n, seed=777 + L)
    res = engine.run_sweep(cfg, workers=1, keep_records=True)
    i1 = round(cfg.T1 / cfg.dt) // cfg.stride
    i2 = round(cfg.T2 / cfg.dt) // cfg.stride
    print(f"L={L} n={n} ({time.time()-t0:.0f}s):", flush=True)
    print("  g     (a)S_std  (b)pooled  (c)traj-t-std  (d)mean-t-std")
    for (cl, g), recs in sorted(res.records.items()):
        win = np.stack([r.entropy[i1 : i2 + 1] for r in recs])  # (n, samples)
        a = np.std([r.s_avg for r in recs])
        b = np.std(win)
        c = np.mean(np.std(win, axis=1))
        d = np.std(win.mean(axis=0))
        print(f"  {g:4.2f}  {a:.4f}    {b:.4f}     {c:.4f}        {d:.4f}", flush=True)
